#include "vdo/dedup.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace vdo::dedup {
namespace {

constexpr std::size_t kWindow = 48;
constexpr std::uint64_t kBase = 0x100000001B3ULL;
constexpr std::uint64_t kMix = 0xFF51AFD7ED558CCDULL;

constexpr std::uint64_t pow_u64(std::uint64_t base, std::size_t exp) {
  std::uint64_t out = 1;
  for (std::size_t i = 0; i < exp; ++i) out *= base;
  return out;
}

constexpr std::uint64_t kBaseToWindow = pow_u64(kBase, kWindow);

int boundary_bits(std::size_t avg) {
  return std::max(1, static_cast<int>(std::lround(std::log2(static_cast<double>(avg)))));
}

Bytes random_bytes(Rng& rng, std::size_t n) {
  Bytes out(n);
  std::size_t i = 0;
  while (i < n) {
    std::uint64_t word = rng();
    for (int k = 0; k < 8 && i < n; ++k, ++i) {
      out[i] = static_cast<std::uint8_t>(word);
      word >>= 8;
    }
  }
  return out;
}

void append(Bytes& out, ByteView piece) { out.insert(out.end(), piece.begin(), piece.end()); }

}  // namespace

std::vector<SubChunk> cdc_split(ByteView payload, const DedupParams& params) {
  std::vector<SubChunk> pieces;
  const std::size_t n = payload.size();
  const std::size_t min_len = params.cdc_min;
  const std::size_t max_len = params.cdc_max;
  const int shift = 64 - boundary_bits(params.cdc_avg);

  std::size_t start = 0;
  while (start < n) {
    if (n - start <= min_len) {
      pieces.push_back({payload.subspan(start), true});
      break;
    }
    // Prime the window with the bytes just before the first eligible cut.
    const std::size_t window_begin = start + min_len - std::min(min_len, kWindow);
    std::uint64_t h = 0;
    for (std::size_t i = window_begin; i < start + min_len; ++i) h = h * kBase + payload[i] + 1;
    const bool full_window = min_len >= kWindow;

    std::size_t cut = 0;
    bool at_end = false;
    for (std::size_t p = start + min_len;; ++p) {
      if (p == n) {
        cut = p;
        at_end = true;
        break;
      }
      if (p - start == max_len) {
        cut = p;
        break;
      }
      if (((h * kMix) >> shift) == 0) {
        cut = p;
        break;
      }
      h = h * kBase + payload[p] + 1;
      if (full_window || p - window_begin >= kWindow) {
        h -= (static_cast<std::uint64_t>(payload[p - kWindow]) + 1) * kBaseToWindow;
      }
    }
    pieces.push_back({payload.subspan(start, cut - start), at_end});
    start = cut;
  }
  return pieces;
}

Digest fingerprint(ByteView bytes) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  return out;
}

std::string to_hex(const Digest& digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (const auto b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
  }
  return out;
}

bool FingerprintStore::insert(const Digest& digest, const SubChunk& piece) {
  const auto [it, inserted] = lengths_.emplace(digest, piece.bytes.size());
  if (inserted && retain_) {
    retained_.push_back({Bytes(piece.bytes.begin(), piece.bytes.end()), piece.at_input_end});
  }
  return inserted;
}

void FingerprintStore::record_chunk(std::span<const SubChunk> pieces) {
  if (!retain_) return;
  Bytes whole;
  for (const auto& p : pieces) append(whole, p.bytes);
  chunks_.push_back(std::move(whole));
}

std::size_t FingerprintStore::length_of(const Digest& digest) const {
  const auto it = lengths_.find(digest);
  return it == lengths_.end() ? 0 : it->second;
}

void FingerprintStore::clear() {
  lengths_.clear();
  retained_.clear();
  chunks_.clear();
}

double redundancy_ratio(std::span<const SubChunk> pieces, FingerprintStore& store) {
  std::vector<Digest> digests;
  digests.reserve(pieces.size());
  std::size_t total = 0;
  std::size_t duplicate = 0;
  for (const auto& piece : pieces) {
    digests.push_back(fingerprint(piece.bytes));
    total += piece.bytes.size();
    if (store.contains(digests.back())) duplicate += piece.bytes.size();
  }
  for (std::size_t i = 0; i < pieces.size(); ++i) store.insert(digests[i], pieces[i]);
  store.record_chunk(pieces);
  return total == 0 ? 0.0 : static_cast<double>(duplicate) / static_cast<double>(total);
}

Volumes unique_volume(std::span<const double> deltas, std::span<const double> chunk_bits,
                      std::span<const double> betas) {
  if (deltas.size() != chunk_bits.size() || deltas.size() != betas.size()) {
    throw std::invalid_argument("unique_volume: per-follower inputs differ in length");
  }
  Volumes v;
  for (std::size_t j = 0; j < deltas.size(); ++j) {
    const double offloaded = deltas[j] * chunk_bits[j];
    v.received += offloaded;
    v.unique += (1.0 - betas[j]) * offloaded;
  }
  return v;
}

double dedup_time(double received_bits, int n_followers, const DedupParams& params, double cpu_freq) {
  return (params.effective_cycles_per_bit() * received_bits +
          params.per_chunk_overhead * static_cast<double>(n_followers)) /
         cpu_freq;
}

double dedup_energy(double t_c, const DedupParams& params, double cpu_freq) {
  return (params.kappa * cpu_freq * cpu_freq + params.static_power) * t_c;
}

Bytes synth_chunk(double planted_beta, std::size_t size, const FingerprintStore& store, Rng& rng,
                  const DedupParams& params) {
  if (planted_beta < 0.0 || planted_beta > 1.0) {
    throw std::invalid_argument("synth_chunk: planted_beta outside [0, 1]");
  }
  std::vector<const Bytes*> splicable;
  for (const auto& r : store.retained()) {
    if (!r.at_input_end) splicable.push_back(&r.bytes);
  }
  if (planted_beta > 0.0 && store.retained().empty()) {
    throw std::invalid_argument("synth_chunk: planted_beta > 0 needs a store with retained payloads");
  }
  if (planted_beta >= 1.0) {
    for (const auto& chunk : store.chunks()) {
      if (chunk.size() == size) return chunk;
    }
  }

  const double target = planted_beta * static_cast<double>(size);
  Bytes out;
  out.reserve(size);
  double duplicate = 0.0;
  while (out.size() < size) {
    const std::size_t remaining = size - out.size();
    bool spliced = false;
    if (!splicable.empty() && duplicate < target && target - duplicate <= static_cast<double>(params.cdc_max)) {
      // Close to the target: the largest stored piece that does not
      // overshoot, else the piece landing nearest to it.
      const double deficit = target - duplicate;
      const Bytes* below = nullptr;
      const Bytes* nearest = nullptr;
      double best_gap = deficit;
      for (const Bytes* candidate : splicable) {
        if (candidate->size() > remaining) continue;
        const double len = static_cast<double>(candidate->size());
        if (len <= deficit && (below == nullptr || candidate->size() > below->size())) below = candidate;
        if (std::abs(deficit - len) < best_gap) {
          nearest = candidate;
          best_gap = std::abs(deficit - len);
        }
      }
      const Bytes* pick = below != nullptr ? below : nearest;
      if (pick != nullptr) {
        append(out, *pick);
        duplicate += static_cast<double>(pick->size());
        spliced = true;
      }
    } else if (!splicable.empty() && duplicate < target) {
      for (int attempt = 0; attempt < 16 && !spliced; ++attempt) {
        const Bytes& candidate = *splicable[uniform_index(rng, splicable.size())];
        const double len = static_cast<double>(candidate.size());
        if (candidate.size() <= remaining &&
            std::abs(duplicate + len - target) < std::abs(duplicate - target)) {
          append(out, candidate);
          duplicate += len;
          spliced = true;
        }
      }
    }
    if (spliced) continue;
    // A fresh piece cut by the splitter itself, so the next splice starts on
    // a boundary. Whatever no longer fits becomes a fresh tail.
    const Bytes noise = random_bytes(rng, params.cdc_max + 1);
    const auto first = cdc_split(noise, params).front().bytes;
    if (first.size() <= remaining) {
      append(out, first);
    } else {
      append(out, ByteView(noise).first(remaining));
    }
  }
  return out;
}

}  // namespace vdo::dedup

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vdo/config.hpp"
#include "vdo/rng.hpp"

namespace vdo::dedup {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

// A view into the payload passed to cdc_split. `at_input_end` marks the final
// piece, which was closed by the end of input rather than by the content test
// or the maximum length; only such pieces may split differently when the same
// bytes are embedded in a longer stream.
struct SubChunk {
  ByteView bytes;
  bool at_input_end = false;
};

// Content-defined split with a 48-byte polynomial rolling hash. The hash is
// restarted at every cut, so each piece depends only on the bytes from its own
// start; cuts fall where the mixed hash has its top log2(avg) bits clear,
// subject to the min/max lengths.
std::vector<SubChunk> cdc_split(ByteView payload, const DedupParams& params);

// SHA-256.
Digest fingerprint(ByteView bytes);
std::string to_hex(const Digest& digest);

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept {
    std::size_t h = 0;
    for (int i = 0; i < 8; ++i) h = (h << 8) | d[i];
    return h;
  }
};

// Fingerprints of the sub-chunks a leader has seen, with their byte lengths.
// With `retain_payloads` the store also keeps the bytes of each new sub-chunk
// and the ordered sub-chunk lists of whole chunks, which synth_chunk splices.
class FingerprintStore {
 public:
  explicit FingerprintStore(bool retain_payloads = false) : retain_(retain_payloads) {}

  bool contains(const Digest& digest) const { return lengths_.contains(digest); }
  // Returns true when the digest was not present before.
  bool insert(const Digest& digest, const SubChunk& piece);
  void record_chunk(std::span<const SubChunk> pieces);

  std::size_t size() const { return lengths_.size(); }
  std::size_t length_of(const Digest& digest) const;
  bool empty() const { return lengths_.empty(); }
  bool retains_payloads() const { return retain_; }
  void clear();

  struct Retained {
    Bytes bytes;
    bool at_input_end;
  };
  const std::vector<Retained>& retained() const { return retained_; }
  const std::vector<Bytes>& chunks() const { return chunks_; }

 private:
  bool retain_;
  std::unordered_map<Digest, std::size_t, DigestHash> lengths_;
  std::vector<Retained> retained_;
  std::vector<Bytes> chunks_;
};

// Byte-weighted fraction of `pieces` whose fingerprint is already in `store`
// (membership is judged against the store as it was before this chunk); the
// unseen fingerprints are inserted afterwards. Returns 0 for an empty chunk.
double redundancy_ratio(std::span<const SubChunk> pieces, FingerprintStore& store);

struct Volumes {
  double received = 0.0;  // D^r, bits
  double unique = 0.0;    // D^u, bits
};

Volumes unique_volume(std::span<const double> deltas, std::span<const double> chunk_bits,
                      std::span<const double> betas);

// (C4 * D^r + C3 * n_followers) / f.
double dedup_time(double received_bits, int n_followers, const DedupParams& params, double cpu_freq);

// (kappa f^2 + P_static) * t_c.
double dedup_energy(double t_c, const DedupParams& params, double cpu_freq);

// Builds a `size`-byte payload whose duplicate-byte fraction against `store`
// is `planted_beta` to within one sub-chunk, by splicing retained sub-chunks
// between fresh random pieces. Throws std::invalid_argument if planted_beta > 0
// and the store retains nothing.
Bytes synth_chunk(double planted_beta, std::size_t size, const FingerprintStore& store, Rng& rng,
                  const DedupParams& params);

}  // namespace vdo::dedup

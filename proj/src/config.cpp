#include "vdo/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vdo {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

void require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError(message);
}

template <typename T>
void add_number(ConfigRegistry& r, const char* key, T& field) {
  if constexpr (std::is_floating_point_v<T>) {
    r.add(
        key, [&field](std::string_view v) { field = parse_double(v); },
        [&field] { return format_double(field); });
  } else {
    r.add(
        key, [&field](std::string_view v) { field = static_cast<T>(parse_integer(v)); },
        [&field] { return std::to_string(field); });
  }
}

void add_interval(ConfigRegistry& r, const char* key, Interval& field) {
  r.add(
      key,
      [&field](std::string_view v) {
        const auto values = parse_double_list(v);
        if (values.size() != 2) throw ConfigError("expected two values");
        field = {values[0], values[1]};
      },
      [&field] { return format_double_list({field.lo, field.hi}); });
}

}  // namespace

void ChannelParams::validate() const {
  require(bandwidth_v2v > 0 && bandwidth_v2i > 0, "bandwidths must be positive");
  require(noise_density > 0, "noise_density must be positive");
  require(pathloss_const_v2v > 0 && pathloss_const_v2i > 0, "path-loss constants must be positive");
  require(pathloss_exp_v2v >= 2 && pathloss_exp_v2i >= 2, "path-loss exponents must be >= 2");
  require(ref_distance > 0, "ref_distance must be positive");
  require(shadowing_sigma_db >= 0, "shadowing_sigma_db must be non-negative");
}

void DedupParams::validate() const {
  require(cycles_per_bit >= 0 && per_chunk_overhead >= 0 && lookup_cycles >= 0,
          "cycle counts must be non-negative");
  require(avg_subchunk_len > 0, "avg_subchunk_len must be positive");
  require(kappa >= 0 && static_power >= 0, "power coefficients must be non-negative");
  require(cdc_min >= 1 && cdc_min <= cdc_avg && cdc_avg <= cdc_max,
          "cdc lengths must satisfy 1 <= min <= avg <= max");
}

void SimConfig::validate() const {
  require(n_vehicles >= 1 && n_slots >= 1 && n_lanes >= 1, "counts must be >= 1");
  require(slot_duration > 0, "slot_duration must be positive");
  require(lane_y.size() >= static_cast<std::size_t>(n_lanes), "lane_y needs one entry per lane");
  require(speed_range.lo >= 0 && speed_range.lo <= speed_range.hi, "speed_range must be ordered");
  require(init_x_range.lo <= init_x_range.hi, "init_x_range must be ordered");
  require(chunk_bits > 0, "chunk_bits must be positive");
  require(chunks_per_vehicle == n_slots, "chunks_per_vehicle must equal n_slots (one chunk per slot)");
  require(beta >= 0 && beta <= 1, "beta must lie in [0, 1]");
  require(cpu_freq > 0, "cpu_freq must be positive");
  require(zeta >= 0, "zeta must be non-negative");
  require(t_max > 0 && e_max > 0 && p_max > 0, "budgets and p_max must be positive");
  require(lambda_cons >= 0, "lambda_cons must be non-negative");
  require(objective_cap > 0, "objective_cap must be positive");
  require(d_norm > 0 && reward_norm > 0, "normalisation constants must be positive");
  require(meta_bytes >= 0, "meta_bytes must be non-negative");
  channel.validate();
  dedup.validate();
}

std::vector<KeyValueEntry> parse_key_values(std::string_view text) {
  std::vector<KeyValueEntry> entries;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? text.npos : end - pos);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
      const auto key = trim(line.substr(0, eq));
      const auto value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError("empty key", line_no);
      entries.push_back({std::string(key), std::string(value), line_no});
    }
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return entries;
}

std::vector<KeyValueEntry> read_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_key_values(buffer.str());
}

void ConfigRegistry::add(std::string key, Setter set, Getter get) {
  fields_.emplace(std::move(key), std::make_pair(std::move(set), std::move(get)));
}

bool ConfigRegistry::contains(std::string_view key) const { return fields_.find(key) != fields_.end(); }

void ConfigRegistry::set(std::string_view key, std::string_view value) const {
  const auto it = fields_.find(key);
  if (it == fields_.end()) throw ConfigError("unknown key '" + std::string(key) + "'");
  try {
    it->second.first(value);
  } catch (const ConfigError& e) {
    throw ConfigError("key '" + std::string(key) + "': " + e.what());
  }
}

std::string ConfigRegistry::get(std::string_view key) const {
  const auto it = fields_.find(key);
  if (it == fields_.end()) throw ConfigError("unknown key '" + std::string(key) + "'");
  return it->second.second();
}

std::vector<std::string> ConfigRegistry::keys() const {
  std::vector<std::string> out;
  out.reserve(fields_.size());
  for (const auto& [key, _] : fields_) out.push_back(key);
  return out;
}

void register_sim_config(ConfigRegistry& r, SimConfig& c) {
  add_number(r, "n_vehicles", c.n_vehicles);
  add_number(r, "n_slots", c.n_slots);
  add_number(r, "slot_duration", c.slot_duration);
  add_number(r, "road_length", c.road_length);
  add_number(r, "n_lanes", c.n_lanes);
  r.add(
      "lane_y", [&c](std::string_view v) { c.lane_y = parse_double_list(v); },
      [&c] { return format_double_list(c.lane_y); });
  r.add(
      "bs_position",
      [&c](std::string_view v) {
        const auto values = parse_double_list(v);
        if (values.size() != 2) throw ConfigError("expected two values");
        c.bs_position = {values[0], values[1]};
      },
      [&c] { return format_double_list({c.bs_position.x, c.bs_position.y}); });
  add_interval(r, "speed_range", c.speed_range);
  add_interval(r, "init_x_range", c.init_x_range);
  add_number(r, "chunk_bits", c.chunk_bits);
  add_number(r, "chunks_per_vehicle", c.chunks_per_vehicle);
  add_number(r, "beta", c.beta);
  add_number(r, "cpu_freq", c.cpu_freq);
  add_number(r, "zeta", c.zeta);
  add_number(r, "t_max", c.t_max);
  add_number(r, "e_max", c.e_max);
  add_number(r, "p_max", c.p_max);
  add_number(r, "lambda_cons", c.lambda_cons);
  add_number(r, "objective_cap", c.objective_cap);
  add_number(r, "d_norm", c.d_norm);
  add_number(r, "reward_norm", c.reward_norm);
  add_number(r, "meta_bytes", c.meta_bytes);

  auto& ch = c.channel;
  add_number(r, "bandwidth_v2v", ch.bandwidth_v2v);
  add_number(r, "bandwidth_v2i", ch.bandwidth_v2i);
  add_number(r, "noise_density", ch.noise_density);
  add_number(r, "pathloss_const_v2v", ch.pathloss_const_v2v);
  add_number(r, "pathloss_const_v2i", ch.pathloss_const_v2i);
  add_number(r, "pathloss_exp_v2v", ch.pathloss_exp_v2v);
  add_number(r, "pathloss_exp_v2i", ch.pathloss_exp_v2i);
  add_number(r, "ref_distance", ch.ref_distance);
  r.add(
      "fading_mode", [&ch](std::string_view v) { ch.fading_mode = parse_fading_mode(v); },
      [&ch] { return std::string(to_string(ch.fading_mode)); });
  add_number(r, "shadowing_sigma_db", ch.shadowing_sigma_db);

  auto& dd = c.dedup;
  add_number(r, "cycles_per_bit", dd.cycles_per_bit);
  add_number(r, "per_chunk_overhead", dd.per_chunk_overhead);
  add_number(r, "lookup_cycles", dd.lookup_cycles);
  add_number(r, "avg_subchunk_len", dd.avg_subchunk_len);
  add_number(r, "kappa", dd.kappa);
  add_number(r, "static_power", dd.static_power);
  add_number(r, "cdc_min", dd.cdc_min);
  add_number(r, "cdc_avg", dd.cdc_avg);
  add_number(r, "cdc_max", dd.cdc_max);
  r.add(
      "dedup_persist_across_slots",
      [&dd](std::string_view v) { dd.persist_across_slots = parse_bool(v); },
      [&dd] { return std::string(dd.persist_across_slots ? "true" : "false"); });
}

double parse_double(std::string_view text) {
  text = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

long long parse_integer(std::string_view text) {
  text = trim(text);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("not an integer: '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("not a boolean: '" + std::string(text) + "'");
}

std::vector<double> parse_double_list(std::string_view text) {
  text = trim(text);
  if (text.size() >= 2 && text.front() == '[' && text.back() == ']') {
    text = text.substr(1, text.size() - 2);
  }
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = trim(text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos));
    if (!item.empty()) out.push_back(parse_double(item));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::string format_double(double value) {
  // Shortest representation that round-trips.
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return ec == std::errc() ? std::string(buf, ptr) : std::to_string(value);
}

std::string format_double_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += format_double(values[i]);
  }
  return out;
}

std::string_view to_string(FadingMode mode) {
  return mode == FadingMode::kUnit ? "unit" : "rayleigh";
}

FadingMode parse_fading_mode(std::string_view text) {
  text = trim(text);
  if (text == "unit") return FadingMode::kUnit;
  if (text == "rayleigh") return FadingMode::kRayleigh;
  throw ConfigError("fading_mode must be 'unit' or 'rayleigh'");
}

}  // namespace vdo

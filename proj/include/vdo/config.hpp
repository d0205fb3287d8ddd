#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vdo {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

enum class FadingMode { kUnit, kRayleigh };

struct ChannelParams {
  double bandwidth_v2v = 1e7;   // Hz
  double bandwidth_v2i = 2e7;   // Hz
  double noise_density = 4e-21; // W/Hz
  double pathloss_const_v2v = 2e-5;
  double pathloss_const_v2i = 2e-5;
  double pathloss_exp_v2v = 3.5;
  double pathloss_exp_v2i = 3.5;
  double ref_distance = 1.0;  // m, also the distance floor
  FadingMode fading_mode = FadingMode::kRayleigh;
  double shadowing_sigma_db = 0.0;

  void validate() const;
};

struct DedupParams {
  double cycles_per_bit = 10.0;      // C1
  double per_chunk_overhead = 1e6;   // C3, cycles per received chunk
  double lookup_cycles = 0.0;        // C2, cycles per sub-chunk probe
  double avg_subchunk_len = 65536.0; // L-bar, bits
  double kappa = 1e-27;
  double static_power = 0.0;         // W; zero reproduces the dynamic-only energy form
  std::size_t cdc_min = 2048;        // bytes
  std::size_t cdc_avg = 8192;
  std::size_t cdc_max = 65536;
  bool persist_across_slots = false;

  // C4 = C1 + C2 / L-bar.
  double effective_cycles_per_bit() const {
    return cycles_per_bit + lookup_cycles / avg_subchunk_len;
  }

  void validate() const;
};

struct SimConfig {
  int n_vehicles = 5;
  int n_slots = 30;
  double slot_duration = 1.0;
  double road_length = 1000.0;
  int n_lanes = 3;
  std::vector<double> lane_y{5.0, 8.5, 12.0};
  Point2 bs_position{200.0, 0.0};
  Interval speed_range{10.0, 15.0};
  Interval init_x_range{0.0, 50.0};
  double chunk_bits = 2e7;
  int chunks_per_vehicle = 30;
  double beta = 0.5;
  double cpu_freq = 2.8e9;
  double zeta = 0.0;
  double t_max = 1.0;
  double e_max = 1.0;
  double p_max = 0.2;
  double lambda_cons = 1.0;
  double objective_cap = 1e6;  // finite stand-in for infeasible slot costs in rewards
  double d_norm = 1000.0;
  double reward_norm = 10.0;
  double meta_bytes = 0.0;     // carried per chunk, excluded from costs
  ChannelParams channel;
  DedupParams dedup;

  void validate() const;
};

// Raised for malformed or unknown configuration input. `line` is 1-based, or
// 0 when the error is not tied to a file line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct KeyValueEntry {
  std::string key;
  std::string value;
  int line = 0;
};

// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
std::vector<KeyValueEntry> parse_key_values(std::string_view text);
std::vector<KeyValueEntry> read_key_value_file(const std::string& path);

// Maps flat key names onto struct fields. Setters throw ConfigError (without a
// line number) on unparsable values; callers attach the line.
class ConfigRegistry {
 public:
  using Setter = std::function<void(std::string_view)>;
  using Getter = std::function<std::string()>;

  void add(std::string key, Setter set, Getter get);
  bool contains(std::string_view key) const;
  void set(std::string_view key, std::string_view value) const;
  std::string get(std::string_view key) const;
  std::vector<std::string> keys() const;

 private:
  std::map<std::string, std::pair<Setter, Getter>, std::less<>> fields_;
};

void register_sim_config(ConfigRegistry& registry, SimConfig& config);

// Value codecs shared by the registries.
double parse_double(std::string_view text);
long long parse_integer(std::string_view text);
bool parse_bool(std::string_view text);
std::vector<double> parse_double_list(std::string_view text);
std::string format_double(double value);
std::string format_double_list(const std::vector<double>& values);

std::string_view to_string(FadingMode mode);
FadingMode parse_fading_mode(std::string_view text);

}  // namespace vdo

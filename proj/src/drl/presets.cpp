#include "vdo/drl/presets.hpp"

#include <stdexcept>
#include <string>

namespace vdo::drl {

const std::array<Preset, kPresetCount>& preset_table() {
  static constexpr std::array<Preset, kPresetCount> kTable{{
      {0.0, 0.0, 1.0}, {1.0, 1.0, 0.0},                     // extremes
      {0.1, 1.0, 1.0}, {0.1, 0.6, 0.8}, {0.2, 1.0, 1.0}, {0.2, 0.6, 0.8},
      {0.3, 1.0, 1.0}, {0.3, 0.6, 0.8}, {0.4, 1.0, 1.0}, {0.4, 0.7, 0.7},
      {0.5, 1.0, 1.0}, {0.5, 0.7, 0.7}, {0.6, 1.0, 1.0}, {0.6, 0.7, 0.7},
      {0.3, 0.4, 0.6}, {0.4, 0.5, 0.6}, {0.5, 0.5, 0.5}, {0.6, 0.6, 0.5},
      {0.7, 0.6, 0.4}, {0.7, 1.0, 1.0}, {0.7, 0.8, 0.6}, {0.8, 1.0, 1.0},
      {0.8, 0.8, 0.6}, {0.9, 1.0, 1.0}, {0.9, 0.8, 0.6},
  }};
  return kTable;
}

cost::ActionTriple preset_decode(int index, double p_max) {
  if (index < 0 || index >= kPresetCount) {
    throw std::out_of_range("preset index " + std::to_string(index) + " outside [0, 24]");
  }
  const auto& p = preset_table()[static_cast<std::size_t>(index)];
  return cost::make_action(p.delta, p.v2v * p_max, p.v2i * p_max, p_max);
}

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kAllBase: return "all_base";
    case BaselineKind::kAllLeader: return "all_leader";
    case BaselineKind::kBalanced: return "balanced";
  }
  return "unknown";
}

BaselineKind parse_baseline(std::string_view text) {
  if (text == "all_base") return BaselineKind::kAllBase;
  if (text == "all_leader") return BaselineKind::kAllLeader;
  if (text == "balanced") return BaselineKind::kBalanced;
  throw std::invalid_argument("baseline must be all_base, all_leader or balanced");
}

cost::ActionTriple baseline_action(BaselineKind kind, double p_max) {
  switch (kind) {
    case BaselineKind::kAllBase: return cost::make_action(0.0, 0.0, p_max, p_max);
    case BaselineKind::kAllLeader: return cost::make_action(1.0, p_max, 0.0, p_max);
    case BaselineKind::kBalanced: return cost::make_action(0.5, p_max, p_max, p_max);
  }
  throw std::invalid_argument("unknown baseline");
}

}  // namespace vdo::drl

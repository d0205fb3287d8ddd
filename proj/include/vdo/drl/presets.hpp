#pragma once

#include <array>
#include <string_view>

#include "vdo/cost.hpp"

namespace vdo::drl {

// Discrete action presets as (delta, p_v2v / p_max, p_v2i / p_max).
struct Preset {
  double delta;
  double v2v;
  double v2i;
};

inline constexpr int kPresetCount = 25;

const std::array<Preset, kPresetCount>& preset_table();

// Throws std::out_of_range outside [0, 24].
cost::ActionTriple preset_decode(int index, double p_max);

enum class BaselineKind { kAllBase, kAllLeader, kBalanced };

std::string_view to_string(BaselineKind kind);
BaselineKind parse_baseline(std::string_view text);

cost::ActionTriple baseline_action(BaselineKind kind, double p_max);

}  // namespace vdo::drl

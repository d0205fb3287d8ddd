#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vdo/config.hpp"
#include "vdo/cost.hpp"
#include "vdo/dedup.hpp"
#include "vdo/rng.hpp"

namespace vdo::sim {

struct VehicleState {
  int id = 0;
  double x = 0.0;
  int lane = 0;
  double speed = 0.0;
  double cpu_freq = 0.0;
};

// Power fading |f|^2 of every directed link for the current slot.
struct FadingDraws {
  int n = 0;
  std::vector<double> v2i;  // vehicle i -> base station
  std::vector<double> v2v;  // row-major n x n, entry (i, j) is link i -> j; diagonal unused

  double link(int i, int j) const { return v2v[static_cast<std::size_t>(i * n + j)]; }
};

struct EpisodeState {
  int t = 0;
  std::vector<VehicleState> vehicles;
  int leader_id = 0;
  Rng rng;
  FadingDraws fading;
};

struct SlotOutcome {
  cost::SlotCostBreakdown cost;
  cost::Violations violations;
  double received_bits = 0.0;  // D^r
  double unique_bits = 0.0;    // D^u
  cost::SlotContext context;   // what the slot was priced on
};

// Euclidean distance floored at `floor`.
double distance(Point2 a, Point2 b, double floor);
Point2 position(const VehicleState& v, const SimConfig& config);
double distance_to_bs(const VehicleState& v, const SimConfig& config);
double distance_between(const VehicleState& a, const VehicleState& b, const SimConfig& config);

FadingDraws draw_fading(int n, Rng& rng, const ChannelParams& params);

// Places vehicles, draws slot-0 fading and fixes the leader. Throws
// ConfigError for fewer than two vehicles or an invalid config.
EpisodeState init_episode(const SimConfig& config, std::uint64_t seed);

// Argmax over vehicles of (sum of V2V rates to peers + own V2I rate + zeta *
// cpu_freq), all rates at p_max under the current fading; ties go to the
// lowest id.
int select_leader(const EpisodeState& state, const SimConfig& config, double zeta);

// Follower ids in ascending order.
std::vector<int> followers(const EpisodeState& state);

// Gains and loads of the current slot, for pricing actions without stepping.
cost::SlotContext slot_context(const EpisodeState& state, const SimConfig& config);

// Prices `actions` (one per follower, ascending id) on the current geometry
// and fading, then moves every vehicle by speed * slot_duration, increments
// t and resamples fading. Throws std::logic_error past the horizon.
SlotOutcome advance_slot(EpisodeState& state, const SimConfig& config,
                         std::span<const cost::ActionTriple> actions);

inline bool done(const EpisodeState& state, const SimConfig& config) {
  return state.t >= config.n_slots;
}

}  // namespace vdo::sim

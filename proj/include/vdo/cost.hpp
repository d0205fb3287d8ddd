#pragma once

#include <span>
#include <string>
#include <vector>

#include "vdo/config.hpp"
#include "vdo/dedup.hpp"

namespace vdo::cost {

// Per-follower decision for one slot. Use make_action to build one from
// unchecked inputs; it clamps delta to [0, 1] and powers to [0, p_max].
struct ActionTriple {
  double delta = 0.0;
  double p_v2v = 0.0;
  double p_v2i = 0.0;
};

ActionTriple make_action(double delta, double p_v2v, double p_v2i, double p_max);

enum class Objective { kTime, kEnergy };

std::string_view to_string(Objective objective);
Objective parse_objective(std::string_view text);

struct TransTimes {
  double v2v = 0.0;
  double v2i = 0.0;
  double trans = 0.0;  // max of the two parallel paths
};

struct TransEnergies {
  double v2v = 0.0;
  double v2i = 0.0;
  double trans = 0.0;
};

// Load over rate with 0/0 := 0; positive load on a zero rate gives +infinity.
TransTimes trans_times(const ActionTriple& action, double chunk_bits, double r_v2v, double r_v2i);
double leader_upload_time(double unique_bits, double r_leader_v2i);

// Power times time. Zero power costs nothing even on a path that never
// completes; otherwise an infinite time yields infinite energy.
TransEnergies trans_energies(const ActionTriple& action, double t_v2v, double t_v2i);
double leader_upload_energy(double p_leader, double t_upload);

struct FollowerCost {
  TransTimes time;
  TransEnergies energy;
};

struct SlotCostBreakdown {
  std::vector<FollowerCost> followers;
  double t_dedup = 0.0;
  double t_upload = 0.0;
  double e_dedup = 0.0;
  double e_upload = 0.0;
  double f_time = 0.0;
  double f_energy = 0.0;
};

// Sum over followers plus leader dedup and upload terms.
double slot_objective(const SlotCostBreakdown& breakdown, Objective objective);

struct Violations {
  std::vector<bool> follower_time;
  std::vector<bool> follower_energy;
  bool leader_time = false;
  bool leader_energy = false;

  int count() const;
};

Violations constraint_violations(const SlotCostBreakdown& breakdown, double t_max, double e_max);

// -min(objective, cap) - lambda * (number of violated indicators).
double reward(double objective_value, const Violations& violations, double lambda_cons,
              double cap = 1e6);

// What the cost model needs to price one slot: per-follower gains towards the
// leader and the base station, the leader's own uplink gain, and the chunk
// sizes and redundancy ratios of the chunks sent in this slot.
struct SlotContext {
  std::vector<double> v2v_gain;
  std::vector<double> v2i_gain;
  double leader_v2i_gain = 0.0;
  std::vector<double> chunk_bits;
  std::vector<double> beta;
  double leader_cpu_freq = 0.0;
  double leader_power = 0.0;
  ChannelParams channel;
  DedupParams dedup;

  int n_followers() const { return static_cast<int>(v2v_gain.size()); }
};

struct SlotEvaluation {
  SlotCostBreakdown cost;
  dedup::Volumes volumes;
};

SlotEvaluation evaluate_slot(const SlotContext& context, std::span<const ActionTriple> actions);

// Splits the system reward of a slot into one part per follower; the parts
// sum to reward(slot_objective, violations, lambda_cons, cap). Each follower
// carries its own transmission cost, the share of leader dedup and upload
// cost caused by the bits it offloaded, an equal share of the per-chunk
// dedup overhead, its own violations and an equal share of the leader's.
// When the objective exceeds the cap the parts are rescaled to sum to the
// cap; an infinite objective is split evenly among the infinite parts.
std::vector<double> reward_shares(const SlotContext& context, std::span<const ActionTriple> actions,
                                  const SlotCostBreakdown& breakdown, const Violations& violations,
                                  Objective objective, double lambda_cons, double cap = 1e6);

// CSV serialisation of one slot: t, then per follower k the columns
// f<k>_t_v2v, f<k>_t_v2i, f<k>_t_trans, f<k>_e_v2v, f<k>_e_v2i, f<k>_e_trans,
// then t_dedup, t_upload, e_dedup, e_upload, f_time, f_energy, violations.
std::string csv_header(int n_followers);
std::string csv_row(int t, const SlotCostBreakdown& breakdown, int violation_count);

}  // namespace vdo::cost

#pragma once

#include <Eigen/Dense>

#include "vdo/config.hpp"
#include "vdo/sim.hpp"

namespace vdo::drl {

// log10 floor for gains that fade to exactly zero.
inline constexpr double kMinLogGain = -300.0;

inline int centralized_state_dim(int n_vehicles) { return 3 * n_vehicles - 1; }
inline constexpr int kDecentralizedStateDim = 6;

// [log10 g_i for followers, log10 h_{i,leader} for followers, d_i / d_norm
// for every vehicle, t / T]; followers and vehicles in ascending id.
Eigen::VectorXd centralized_state(const sim::EpisodeState& state, const SimConfig& config);

// [log10 g_i, log10 h_{i,leader}, d_i / d_norm, d_leader / d_norm, t / T,
// clip(prev_sys_reward / reward_norm, -1, 1)].
Eigen::VectorXd decentralized_state(const sim::EpisodeState& state, const SimConfig& config,
                                    int follower_id, double prev_sys_reward);

// One column per follower (ascending id).
Eigen::MatrixXd decentralized_states(const sim::EpisodeState& state, const SimConfig& config,
                                     double prev_sys_reward);

}  // namespace vdo::drl

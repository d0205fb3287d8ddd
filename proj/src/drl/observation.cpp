#include "vdo/drl/observation.hpp"

#include <algorithm>
#include <cmath>

#include "vdo/channel.hpp"

namespace vdo::drl {
namespace {

double log_gain(double g) { return g > 0.0 ? std::max(std::log10(g), kMinLogGain) : kMinLogGain; }

double slot_fraction(const sim::EpisodeState& state, const SimConfig& config) {
  return static_cast<double>(state.t) / static_cast<double>(config.n_slots);
}

}  // namespace

Eigen::VectorXd centralized_state(const sim::EpisodeState& state, const SimConfig& config) {
  const auto ctx = sim::slot_context(state, config);
  const int nf = ctx.n_followers();
  const int n = static_cast<int>(state.vehicles.size());
  Eigen::VectorXd s(centralized_state_dim(n));
  for (int k = 0; k < nf; ++k) {
    s[k] = log_gain(ctx.v2i_gain[static_cast<std::size_t>(k)]);
    s[nf + k] = log_gain(ctx.v2v_gain[static_cast<std::size_t>(k)]);
  }
  for (int i = 0; i < n; ++i) {
    s[2 * nf + i] = sim::distance_to_bs(state.vehicles[static_cast<std::size_t>(i)], config) / config.d_norm;
  }
  s[s.size() - 1] = slot_fraction(state, config);
  return s;
}

Eigen::VectorXd decentralized_state(const sim::EpisodeState& state, const SimConfig& config,
                                    int follower_id, double prev_sys_reward) {
  const auto& ch = config.channel;
  const auto& v = state.vehicles.at(static_cast<std::size_t>(follower_id));
  const auto& leader = state.vehicles[static_cast<std::size_t>(state.leader_id)];
  const double d_i = sim::distance_to_bs(v, config);
  Eigen::VectorXd s(kDecentralizedStateDim);
  s[0] = log_gain(channel::v2i_gain(state.fading.v2i[static_cast<std::size_t>(follower_id)], d_i, ch));
  s[1] = log_gain(channel::v2v_gain(state.fading.link(follower_id, leader.id),
                                    sim::distance_between(v, leader, config), ch));
  s[2] = d_i / config.d_norm;
  s[3] = sim::distance_to_bs(leader, config) / config.d_norm;
  s[4] = slot_fraction(state, config);
  s[5] = std::clamp(prev_sys_reward / config.reward_norm, -1.0, 1.0);
  return s;
}

Eigen::MatrixXd decentralized_states(const sim::EpisodeState& state, const SimConfig& config,
                                     double prev_sys_reward) {
  const auto ids = sim::followers(state);
  Eigen::MatrixXd out(kDecentralizedStateDim, static_cast<Eigen::Index>(ids.size()));
  for (std::size_t k = 0; k < ids.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = decentralized_state(state, config, ids[k], prev_sys_reward);
  }
  return out;
}

}  // namespace vdo::drl

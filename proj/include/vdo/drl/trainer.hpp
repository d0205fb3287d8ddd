#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vdo/config.hpp"
#include "vdo/cost.hpp"
#include "vdo/drl/agents.hpp"
#include "vdo/drl/presets.hpp"
#include "vdo/sim.hpp"

namespace vdo::drl {

// Maps the current episode state to one action per follower (ascending id).
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::vector<cost::ActionTriple> decide(const sim::EpisodeState& state, const SimConfig& config,
                                                 double prev_sys_reward) = 0;
  virtual std::string name() const = 0;
};

class BaselinePolicy : public Policy {
 public:
  explicit BaselinePolicy(BaselineKind kind) : kind_(kind) {}
  std::vector<cost::ActionTriple> decide(const sim::EpisodeState& state, const SimConfig& config,
                                         double prev_sys_reward) override;
  std::string name() const override { return std::string(to_string(kind_)); }

 private:
  BaselineKind kind_;
};

// Greedy (noise-free) actions of a trained agent.
class AgentPolicy : public Policy {
 public:
  explicit AgentPolicy(Agent& agent) : agent_(agent) {}
  std::vector<cost::ActionTriple> decide(const sim::EpisodeState& state, const SimConfig& config,
                                         double prev_sys_reward) override;
  std::string name() const override;

 private:
  Agent& agent_;
  Rng unused_rng_{0};
};

AgentDims agent_dims(const AgentConfig& agent, const SimConfig& sim);

// Centralized: one column of length 3N-1. Decentralized: one 6-row column per follower.
Eigen::MatrixXd build_observation(Topology topology, const sim::EpisodeState& state, const SimConfig& config,
                                  double prev_sys_reward);

// Turns an action encoding (one column per observation column) into one
// ActionTriple per follower.
std::vector<cost::ActionTriple> decode_actions(const Agent& agent, const Eigen::MatrixXd& encoding, double p_max);

// Reward of a priced slot under the given objective.
double system_reward(const sim::SlotOutcome& outcome, cost::Objective objective, const SimConfig& config);

struct EpisodeLog {
  int episode = 0;
  double objective_total = 0.0;
  int violations = 0;
  double exploration = 0.0;  // epsilon or alpha (OU scale for DDPG)
  double wallclock_ms = 0.0;
};

struct TrainOptions {
  std::string checkpoint_dir;  // empty disables checkpoints
  std::function<void(const EpisodeLog&)> on_episode;
};

struct TrainResult {
  std::unique_ptr<Agent> agent;
  std::vector<EpisodeLog> log;
  std::int64_t env_steps = 0;
  std::int64_t updates = 0;
};

// Runs agent.episodes episodes. Episode k uses environment seed
// stream_seed(seed, k); network initialisation and minibatch/exploration
// randomness come from two further streams of the same master seed.
TrainResult train(const AgentConfig& agent, const SimConfig& sim, std::uint64_t seed,
                  const TrainOptions& options = {});

std::string training_log_header();
std::string training_log_row(const EpisodeLog& row);
void write_training_log(const std::string& path, const std::vector<EpisodeLog>& log);

// Trailing moving average: entry k averages values[max(0, k-window+1) .. k].
std::vector<double> moving_average(const std::vector<double>& values, int window);

struct EvalSummary {
  int episodes = 0;
  std::string policy;
  std::vector<double> time_totals;
  std::vector<double> energy_totals;
  std::vector<int> violation_totals;
  double time_mean = 0.0, time_std = 0.0;
  double energy_mean = 0.0, energy_std = 0.0;
  double violations_mean = 0.0;
  // Over every (slot, follower) decision.
  double delta_mean = 0.0, delta_std = 0.0;
  double p_v2v_mean = 0.0, p_v2i_mean = 0.0;  // as fractions of p_max
  std::vector<double> delta_trace;            // mean delta per slot
};

// Episode k uses environment seed stream_seed(seed, k). `objective` drives
// the previous-reward feature of decentralized observations.
EvalSummary evaluate(Policy& policy, const SimConfig& config, int n_episodes, std::uint64_t seed,
                     cost::Objective objective = cost::Objective::kTime);

// Mean and sample standard deviation (0 for fewer than two values).
std::pair<double, double> mean_std(const std::vector<double>& values);

}  // namespace vdo::drl

#pragma once

#include <Eigen/Dense>

#include <limits>
#include <memory>
#include <string_view>
#include <vector>

#include "vdo/config.hpp"
#include "vdo/cost.hpp"
#include "vdo/drl/noise.hpp"
#include "vdo/drl/replay_buffer.hpp"
#include "vdo/nn.hpp"
#include "vdo/rng.hpp"

namespace vdo::drl {

enum class Algorithm { kDqn, kDdpg, kSac };
enum class Topology { kCentralized, kDecentralized };

std::string_view to_string(Algorithm algorithm);
std::string_view to_string(Topology topology);
Algorithm parse_algorithm(std::string_view text);
Topology parse_topology(std::string_view text);

struct AgentConfig {
  Algorithm algorithm = Algorithm::kSac;
  Topology topology = Topology::kDecentralized;
  cost::Objective objective = cost::Objective::kTime;

  std::vector<int> hidden{256, 256};
  bool layer_norm = true;
  double gamma = 0.99;
  int batch_size = 256;
  int warmup = 10000;
  int buffer_capacity = 500000;
  int updates_per_step = 1;
  bool random_warmup = true;  // uniform random actions until the buffer holds `warmup` transitions

  double dqn_lr = 1e-4;
  int dqn_target_period = 100;
  double dqn_clip = 1.0;
  double eps_start = 0.3;
  double eps_end = 0.05;
  double eps_decay = 0.999;

  double ddpg_actor_lr = 1e-5;
  double ddpg_critic_lr = 5e-4;
  double ddpg_tau = 1e-3;
  double ddpg_clip = 0.5;
  double ou_theta = 0.1;
  double ou_sigma = 0.05;
  double ou_scale = 0.1;

  double sac_actor_lr = 1e-4;
  double sac_critic_lr = 1e-4;
  double sac_alpha_lr = 1e-4;
  double sac_tau = 5e-3;
  double sac_clip = 1.0;
  double sac_alpha = 0.05;
  bool sac_auto_alpha = true;
  // NaN selects -(action dimension).
  double sac_target_entropy = std::numeric_limits<double>::quiet_NaN();

  int episodes = 5000;
  int checkpoint_every = 0;  // episodes; 0 writes only the final checkpoint
  int moving_average_window = 100;
  bool record_wallclock = true;

  void validate() const;
};

void register_agent_config(ConfigRegistry& registry, AgentConfig& config);

// Network and action shapes. Centralized agents use one observation and one
// action group per follower; decentralized agents use one group per column.
struct AgentDims {
  int obs_dim = 0;
  int groups = 1;             // action groups produced per observation column
  int discrete_actions = 25;  // per group, DQN only
  int action_dim = 3;         // per group, continuous algorithms only
};

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  bool applied = false;
};

// Common interface. Actions are encoded per observation column: DQN writes
// one preset index per group; DDPG/SAC write groups * action_dim values in
// [0, 1].
class Agent {
 public:
  virtual ~Agent() = default;

  virtual Eigen::MatrixXd act(const Eigen::MatrixXd& obs, bool explore, Rng& rng) = 0;
  virtual Eigen::MatrixXd random_action(Eigen::Index columns, Rng& rng) const = 0;
  virtual UpdateStats update(const Batch& batch, Rng& rng) = 0;
  // Called at episode boundaries: decays epsilon, resets OU noise.
  virtual void end_episode() {}
  // Epsilon (DQN), the OU noise scale (DDPG) or the temperature (SAC).
  virtual double exploration_value() const = 0;
  virtual std::vector<nn::CheckpointEntry> checkpoint_entries() = 0;
  virtual std::vector<nn::CheckpointScalar> checkpoint_scalars() { return {}; }

  int encoding_dim() const;
  const AgentDims& dims() const { return dims_; }
  const AgentConfig& config() const { return config_; }

 protected:
  Agent(const AgentConfig& config, const AgentDims& dims) : config_(config), dims_(dims) {}

  AgentConfig config_;
  AgentDims dims_;
};

// DQN with one Q head per action group; the joint value is the sum of the
// selected head values, and the bootstrap target sums the per-head maxima.
class DqnAgent : public Agent {
 public:
  DqnAgent(const AgentConfig& config, const AgentDims& dims, Rng& rng);

  Eigen::MatrixXd act(const Eigen::MatrixXd& obs, bool explore, Rng& rng) override;
  Eigen::MatrixXd random_action(Eigen::Index columns, Rng& rng) const override;
  UpdateStats update(const Batch& batch, Rng& rng) override;
  void end_episode() override;
  double exploration_value() const override { return epsilon_; }
  std::vector<nn::CheckpointEntry> checkpoint_entries() override;
  std::vector<nn::CheckpointScalar> checkpoint_scalars() override;

  Eigen::MatrixXd q_values(const Eigen::MatrixXd& obs) const;
  double epsilon() const { return epsilon_; }
  nn::Mlp& online() { return online_; }
  const nn::Mlp& target() const { return target_; }
  std::int64_t updates() const { return updates_; }

 private:
  nn::Mlp online_, target_;
  nn::AdamState adam_;
  nn::Cache cache_;
  double epsilon_;
  std::int64_t updates_ = 0;
};

class DdpgAgent : public Agent {
 public:
  DdpgAgent(const AgentConfig& config, const AgentDims& dims, Rng& rng);

  Eigen::MatrixXd act(const Eigen::MatrixXd& obs, bool explore, Rng& rng) override;
  Eigen::MatrixXd random_action(Eigen::Index columns, Rng& rng) const override;
  UpdateStats update(const Batch& batch, Rng& rng) override;
  void end_episode() override { noise_.reset(); }
  double exploration_value() const override { return config_.ou_scale; }
  std::vector<nn::CheckpointEntry> checkpoint_entries() override;

  nn::Mlp& actor() { return actor_; }
  nn::Mlp& critic() { return critic_; }
  const nn::Mlp& target_actor() const { return actor_target_; }
  const nn::Mlp& target_critic() const { return critic_target_; }

 private:
  nn::Mlp actor_, critic_, actor_target_, critic_target_;
  nn::AdamState actor_adam_, critic_adam_;
  nn::Cache actor_cache_, critic_cache_;
  OuNoise noise_;
};

class SacAgent : public Agent {
 public:
  SacAgent(const AgentConfig& config, const AgentDims& dims, Rng& rng);

  Eigen::MatrixXd act(const Eigen::MatrixXd& obs, bool explore, Rng& rng) override;
  Eigen::MatrixXd random_action(Eigen::Index columns, Rng& rng) const override;
  UpdateStats update(const Batch& batch, Rng& rng) override;
  double exploration_value() const override { return alpha(); }
  std::vector<nn::CheckpointEntry> checkpoint_entries() override;
  std::vector<nn::CheckpointScalar> checkpoint_scalars() override;

  double alpha() const;
  double target_entropy() const { return target_entropy_; }
  nn::Mlp& actor() { return actor_; }
  nn::Mlp& critic(int k) { return k == 0 ? q1_ : q2_; }

 private:
  nn::Mlp actor_, q1_, q2_, q1_target_, q2_target_;
  nn::AdamState actor_adam_, q1_adam_, q2_adam_, alpha_adam_;
  nn::Cache actor_cache_, q1_cache_, q2_cache_;
  Eigen::VectorXd log_alpha_;
  double target_entropy_;
};

std::unique_ptr<Agent> make_agent(const AgentConfig& config, const AgentDims& dims, Rng& rng);

}  // namespace vdo::drl

#include "vdo/drl/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vdo::drl {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

constexpr double kFinalLayerScale = 3e-3;

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

MatrixXd stack(const MatrixXd& top, const MatrixXd& bottom) {
  MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

void require(bool condition, const char* message) {
  if (!condition) throw ConfigError(message);
}

template <typename T>
void add_field(ConfigRegistry& r, const char* key, T& field) {
  if constexpr (std::is_same_v<T, bool>) {
    r.add(
        key, [&field](std::string_view v) { field = parse_bool(v); },
        [&field] { return std::string(field ? "true" : "false"); });
  } else if constexpr (std::is_floating_point_v<T>) {
    r.add(
        key, [&field](std::string_view v) { field = parse_double(v); },
        [&field] { return format_double(field); });
  } else {
    r.add(
        key, [&field](std::string_view v) { field = static_cast<T>(parse_integer(v)); },
        [&field] { return std::to_string(field); });
  }
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kDqn: return "dqn";
    case Algorithm::kDdpg: return "ddpg";
    case Algorithm::kSac: return "sac";
  }
  return "unknown";
}

std::string_view to_string(Topology topology) {
  return topology == Topology::kCentralized ? "centralized" : "decentralized";
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "dqn") return Algorithm::kDqn;
  if (text == "ddpg") return Algorithm::kDdpg;
  if (text == "sac") return Algorithm::kSac;
  throw ConfigError("algorithm must be dqn, ddpg or sac");
}

Topology parse_topology(std::string_view text) {
  if (text == "centralized") return Topology::kCentralized;
  if (text == "decentralized") return Topology::kDecentralized;
  throw ConfigError("topology must be centralized or decentralized");
}

void AgentConfig::validate() const {
  require(!hidden.empty(), "hidden_sizes must list at least one layer");
  for (const int h : hidden) require(h > 0, "hidden sizes must be positive");
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(batch_size > 0 && warmup >= 0 && buffer_capacity > 0 && updates_per_step >= 0,
          "batch_size, buffer_capacity must be positive; warmup, updates_per_step non-negative");
  require(dqn_lr > 0 && ddpg_actor_lr > 0 && ddpg_critic_lr > 0 && sac_actor_lr > 0 &&
              sac_critic_lr > 0 && sac_alpha_lr > 0,
          "learning rates must be positive");
  require(dqn_target_period > 0, "dqn_target_period must be positive");
  require(eps_start >= eps_end && eps_end >= 0.0 && eps_start <= 1.0, "epsilon schedule must be 1 >= start >= end >= 0");
  require(eps_decay > 0.0 && eps_decay <= 1.0, "eps_decay must lie in (0, 1]");
  require(ddpg_tau >= 0 && ddpg_tau <= 1 && sac_tau >= 0 && sac_tau <= 1, "tau must lie in [0, 1]");
  require(ou_theta >= 0 && ou_sigma >= 0 && ou_scale >= 0, "OU parameters must be non-negative");
  require(sac_alpha > 0, "sac_alpha must be positive");
  require(episodes >= 0 && checkpoint_every >= 0 && moving_average_window > 0,
          "episode counts must be non-negative and the window positive");
}

void register_agent_config(ConfigRegistry& r, AgentConfig& c) {
  r.add(
      "algorithm", [&c](std::string_view v) { c.algorithm = parse_algorithm(v); },
      [&c] { return std::string(to_string(c.algorithm)); });
  r.add(
      "topology", [&c](std::string_view v) { c.topology = parse_topology(v); },
      [&c] { return std::string(to_string(c.topology)); });
  r.add(
      "objective", [&c](std::string_view v) { c.objective = cost::parse_objective(v); },
      [&c] { return std::string(cost::to_string(c.objective)); });
  r.add(
      "hidden_sizes",
      [&c](std::string_view v) {
        c.hidden.clear();
        for (const double x : parse_double_list(v)) {
          if (x != std::floor(x) || x <= 0) throw ConfigError("hidden sizes must be positive integers");
          c.hidden.push_back(static_cast<int>(x));
        }
      },
      [&c] {
        std::vector<double> v(c.hidden.begin(), c.hidden.end());
        return format_double_list(v);
      });
  add_field(r, "layer_norm", c.layer_norm);
  add_field(r, "gamma", c.gamma);
  add_field(r, "batch_size", c.batch_size);
  add_field(r, "warmup", c.warmup);
  add_field(r, "buffer_capacity", c.buffer_capacity);
  add_field(r, "updates_per_step", c.updates_per_step);
  add_field(r, "random_warmup", c.random_warmup);
  add_field(r, "dqn_lr", c.dqn_lr);
  add_field(r, "dqn_target_period", c.dqn_target_period);
  add_field(r, "dqn_clip", c.dqn_clip);
  add_field(r, "eps_start", c.eps_start);
  add_field(r, "eps_end", c.eps_end);
  add_field(r, "eps_decay", c.eps_decay);
  add_field(r, "ddpg_actor_lr", c.ddpg_actor_lr);
  add_field(r, "ddpg_critic_lr", c.ddpg_critic_lr);
  add_field(r, "ddpg_tau", c.ddpg_tau);
  add_field(r, "ddpg_clip", c.ddpg_clip);
  add_field(r, "ou_theta", c.ou_theta);
  add_field(r, "ou_sigma", c.ou_sigma);
  add_field(r, "ou_scale", c.ou_scale);
  add_field(r, "sac_actor_lr", c.sac_actor_lr);
  add_field(r, "sac_critic_lr", c.sac_critic_lr);
  add_field(r, "sac_alpha_lr", c.sac_alpha_lr);
  add_field(r, "sac_tau", c.sac_tau);
  add_field(r, "sac_clip", c.sac_clip);
  add_field(r, "sac_alpha", c.sac_alpha);
  add_field(r, "sac_auto_alpha", c.sac_auto_alpha);
  add_field(r, "sac_target_entropy", c.sac_target_entropy);
  add_field(r, "episodes", c.episodes);
  add_field(r, "checkpoint_every", c.checkpoint_every);
  add_field(r, "moving_average_window", c.moving_average_window);
  add_field(r, "record_wallclock", c.record_wallclock);
}

int Agent::encoding_dim() const {
  return config_.algorithm == Algorithm::kDqn ? dims_.groups : dims_.groups * dims_.action_dim;
}

// ---------------------------------------------------------------- DQN

DqnAgent::DqnAgent(const AgentConfig& config, const AgentDims& dims, Rng& rng)
    : Agent(config, dims),
      online_(layer_sizes(dims.obs_dim, config.hidden, dims.groups * dims.discrete_actions),
              nn::Head{}, config.layer_norm),
      epsilon_(config.eps_start) {
  online_.init(rng);
  target_ = online_;
  adam_ = nn::AdamState(online_.n_params(), config.dqn_lr);
}

MatrixXd DqnAgent::q_values(const MatrixXd& obs) const { return online_.forward(obs); }

MatrixXd DqnAgent::act(const MatrixXd& obs, bool explore, Rng& rng) {
  const MatrixXd q = online_.forward(obs, cache_);
  const int A = dims_.discrete_actions;
  MatrixXd out(dims_.groups, obs.cols());
  for (Index j = 0; j < obs.cols(); ++j) {
    for (int k = 0; k < dims_.groups; ++k) {
      Index best = 0;
      if (explore && uniform01(rng) < epsilon_) {
        best = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(A)));
      } else {
        q.col(j).segment(static_cast<Index>(k) * A, A).maxCoeff(&best);
      }
      out(k, j) = static_cast<double>(best);
    }
  }
  return out;
}

MatrixXd DqnAgent::random_action(Index columns, Rng& rng) const {
  MatrixXd out(dims_.groups, columns);
  for (Index j = 0; j < columns; ++j) {
    for (int k = 0; k < dims_.groups; ++k) {
      out(k, j) = static_cast<double>(uniform_index(rng, static_cast<std::size_t>(dims_.discrete_actions)));
    }
  }
  return out;
}

UpdateStats DqnAgent::update(const Batch& b, Rng&) {
  const Index B = b.size();
  const int A = dims_.discrete_actions;
  const MatrixXd q_next = target_.forward(b.next_state);
  const MatrixXd& q = online_.forward(b.state, cache_);
  MatrixXd d_out = MatrixXd::Zero(q.rows(), B);
  double loss = 0.0;
  for (Index j = 0; j < B; ++j) {
    double next_value = 0.0;
    double value = 0.0;
    for (int k = 0; k < dims_.groups; ++k) {
      const Index offset = static_cast<Index>(k) * A;
      next_value += q_next.col(j).segment(offset, A).maxCoeff();
      value += q(offset + static_cast<Index>(b.action(k, j)), j);
    }
    const double y = b.reward[j] + config_.gamma * (1.0 - b.done[j]) * next_value;
    const double diff = value - y;
    loss += diff * diff;
    for (int k = 0; k < dims_.groups; ++k) {
      d_out(static_cast<Index>(k) * A + static_cast<Index>(b.action(k, j)), j) = 2.0 * diff / static_cast<double>(B);
    }
  }
  UpdateStats stats;
  stats.critic_loss = loss / static_cast<double>(B);
  if (!std::isfinite(stats.critic_loss)) return stats;
  VectorXd grad;
  online_.backward(cache_, d_out, grad);
  stats.applied = nn::adam_step(online_, grad, adam_, config_.dqn_clip).applied;
  if (stats.applied && ++updates_ % config_.dqn_target_period == 0) target_.set_params(online_.params());
  return stats;
}

void DqnAgent::end_episode() {
  epsilon_ = std::max(config_.eps_end, epsilon_ * config_.eps_decay);
}

std::vector<nn::CheckpointEntry> DqnAgent::checkpoint_entries() {
  return {{"q_online", &online_, &adam_}, {"q_target", &target_, nullptr}};
}

std::vector<nn::CheckpointScalar> DqnAgent::checkpoint_scalars() { return {{"epsilon", &epsilon_}}; }

// ---------------------------------------------------------------- DDPG

DdpgAgent::DdpgAgent(const AgentConfig& config, const AgentDims& dims, Rng& rng)
    : Agent(config, dims),
      actor_(layer_sizes(dims.obs_dim, config.hidden, dims.groups * dims.action_dim),
             nn::Head{nn::HeadKind::kSquashed, 0.0, 1.0}, config.layer_norm),
      critic_(layer_sizes(dims.obs_dim + dims.groups * dims.action_dim, config.hidden, 1), nn::Head{},
              config.layer_norm),
      noise_(config.ou_theta, config.ou_sigma, config.ou_scale) {
  actor_.init(rng, kFinalLayerScale);
  critic_.init(rng, kFinalLayerScale);
  actor_target_ = actor_;
  critic_target_ = critic_;
  actor_adam_ = nn::AdamState(actor_.n_params(), config.ddpg_actor_lr);
  critic_adam_ = nn::AdamState(critic_.n_params(), config.ddpg_critic_lr);
}

MatrixXd DdpgAgent::act(const MatrixXd& obs, bool explore, Rng& rng) {
  MatrixXd a = actor_.forward(obs, actor_cache_);
  if (explore) a += noise_.sample(a.rows(), a.cols(), rng);
  return a.cwiseMax(0.0).cwiseMin(1.0);
}

MatrixXd DdpgAgent::random_action(Index columns, Rng& rng) const {
  MatrixXd out(encoding_dim(), columns);
  for (Index j = 0; j < columns; ++j) {
    for (Index i = 0; i < out.rows(); ++i) out(i, j) = uniform01(rng);
  }
  return out;
}

UpdateStats DdpgAgent::update(const Batch& b, Rng&) {
  const auto B = static_cast<double>(b.size());
  UpdateStats stats;

  const MatrixXd a_next = actor_target_.forward(b.next_state);
  const MatrixXd q_next = critic_target_.forward(stack(b.next_state, a_next));
  const RowVectorXd y =
      b.reward.array() + config_.gamma * (1.0 - b.done.array()) * q_next.row(0).array();
  const MatrixXd& q = critic_.forward(stack(b.state, b.action), critic_cache_);
  const RowVectorXd diff = q.row(0) - y;
  stats.critic_loss = diff.squaredNorm() / B;
  if (!std::isfinite(stats.critic_loss)) return stats;
  VectorXd grad;
  critic_.backward(critic_cache_, (2.0 / B) * diff, grad);
  if (!nn::adam_step(critic_, grad, critic_adam_, config_.ddpg_clip).applied) return stats;

  // Deterministic policy gradient: ascend Q(s, mu(s)).
  const MatrixXd& a_pi = actor_.forward(b.state, actor_cache_);
  const MatrixXd& q_pi = critic_.forward(stack(b.state, a_pi), critic_cache_);
  stats.actor_loss = -q_pi.mean();
  MatrixXd d_input;
  critic_.backward_input(critic_cache_, MatrixXd::Constant(1, b.size(), -1.0 / B), d_input);
  VectorXd actor_grad;
  actor_.backward(actor_cache_, d_input.bottomRows(a_pi.rows()), actor_grad);
  stats.applied = nn::adam_step(actor_, actor_grad, actor_adam_, config_.ddpg_clip).applied;

  nn::soft_update(critic_target_, critic_, config_.ddpg_tau);
  nn::soft_update(actor_target_, actor_, config_.ddpg_tau);
  return stats;
}

std::vector<nn::CheckpointEntry> DdpgAgent::checkpoint_entries() {
  return {{"actor", &actor_, &actor_adam_},
          {"critic", &critic_, &critic_adam_},
          {"actor_target", &actor_target_, nullptr},
          {"critic_target", &critic_target_, nullptr}};
}

// ---------------------------------------------------------------- SAC

SacAgent::SacAgent(const AgentConfig& config, const AgentDims& dims, Rng& rng)
    : Agent(config, dims),
      actor_(layer_sizes(dims.obs_dim, config.hidden, 2 * dims.groups * dims.action_dim),
             nn::Head{nn::HeadKind::kGaussian}, config.layer_norm),
      q1_(layer_sizes(dims.obs_dim + dims.groups * dims.action_dim, config.hidden, 1), nn::Head{},
          config.layer_norm),
      q2_(q1_),
      log_alpha_(VectorXd::Constant(1, std::log(config.sac_alpha))) {
  actor_.init(rng, kFinalLayerScale);
  q1_.init(rng, kFinalLayerScale);
  q2_.init(rng, kFinalLayerScale);
  q1_target_ = q1_;
  q2_target_ = q2_;
  actor_adam_ = nn::AdamState(actor_.n_params(), config.sac_actor_lr);
  q1_adam_ = nn::AdamState(q1_.n_params(), config.sac_critic_lr);
  q2_adam_ = nn::AdamState(q2_.n_params(), config.sac_critic_lr);
  alpha_adam_ = nn::AdamState(1, config.sac_alpha_lr);
  target_entropy_ = std::isnan(config.sac_target_entropy)
                        ? -static_cast<double>(dims.groups * dims.action_dim)
                        : config.sac_target_entropy;
}

double SacAgent::alpha() const { return std::exp(log_alpha_[0]); }

MatrixXd SacAgent::act(const MatrixXd& obs, bool explore, Rng& rng) {
  const MatrixXd& head = actor_.forward(obs, actor_cache_);
  if (!explore) return nn::squashed_mean_action(head);
  return nn::squashed_sample(head, actor_.head(), rng).action;
}

MatrixXd SacAgent::random_action(Index columns, Rng& rng) const {
  MatrixXd out(encoding_dim(), columns);
  for (Index j = 0; j < columns; ++j) {
    for (Index i = 0; i < out.rows(); ++i) out(i, j) = uniform01(rng);
  }
  return out;
}

UpdateStats SacAgent::update(const Batch& b, Rng& rng) {
  const auto B = static_cast<double>(b.size());
  const double alpha = this->alpha();
  UpdateStats stats;

  // Entropy-adjusted bootstrap target from the clipped double critic.
  const auto next = nn::squashed_sample(actor_.forward(b.next_state), actor_.head(), rng);
  const MatrixXd sa_next = stack(b.next_state, next.action);
  const MatrixXd q1n = q1_target_.forward(sa_next);
  const MatrixXd q2n = q2_target_.forward(sa_next);
  const RowVectorXd v_next = q1n.row(0).cwiseMin(q2n.row(0)) - alpha * next.log_prob;
  const RowVectorXd y = b.reward.array() + config_.gamma * (1.0 - b.done.array()) * v_next.array();

  const MatrixXd sa = stack(b.state, b.action);
  double critic_loss = 0.0;
  for (int k = 0; k < 2; ++k) {
    nn::Mlp& q = k == 0 ? q1_ : q2_;
    nn::Cache& cache = k == 0 ? q1_cache_ : q2_cache_;
    nn::AdamState& adam = k == 0 ? q1_adam_ : q2_adam_;
    const RowVectorXd diff = q.forward(sa, cache).row(0) - y;
    const double loss = diff.squaredNorm() / B;
    if (!std::isfinite(loss)) return stats;
    critic_loss += 0.5 * loss;
    VectorXd grad;
    q.backward(cache, (2.0 / B) * diff, grad);
    if (!nn::adam_step(q, grad, adam, config_.sac_clip).applied) return stats;
  }
  stats.critic_loss = critic_loss;

  // Policy: minimise alpha * log pi - min(Q1, Q2) through reparameterised samples.
  const MatrixXd& head = actor_.forward(b.state, actor_cache_);
  const auto pi = nn::squashed_sample(head, actor_.head(), rng);
  const MatrixXd sa_pi = stack(b.state, pi.action);
  const RowVectorXd q1p = q1_.forward(sa_pi, q1_cache_).row(0);
  const RowVectorXd q2p = q2_.forward(sa_pi, q2_cache_).row(0);
  MatrixXd d1 = MatrixXd::Zero(1, b.size());
  MatrixXd d2 = MatrixXd::Zero(1, b.size());
  double actor_loss = 0.0;
  for (Index j = 0; j < b.size(); ++j) {
    const bool first = q1p[j] <= q2p[j];
    (first ? d1 : d2)(0, j) = -1.0 / B;
    actor_loss += alpha * pi.log_prob[j] - (first ? q1p[j] : q2p[j]);
  }
  stats.actor_loss = actor_loss / B;
  MatrixXd in1, in2;
  q1_.backward_input(q1_cache_, d1, in1);
  q2_.backward_input(q2_cache_, d2, in2);
  const Index adim = pi.action.rows();
  const MatrixXd d_action = in1.bottomRows(adim) + in2.bottomRows(adim);
  const RowVectorXd d_log_prob = RowVectorXd::Constant(b.size(), alpha / B);
  VectorXd actor_grad;
  actor_.backward(actor_cache_, nn::squashed_backward(pi, d_action, d_log_prob), actor_grad);
  stats.applied = nn::adam_step(actor_, actor_grad, actor_adam_, config_.sac_clip).applied;

  if (config_.sac_auto_alpha) {
    // d/d(log alpha) of -log alpha * (log pi + target entropy), averaged.
    const double g = -(pi.log_prob.array() + target_entropy_).mean();
    nn::adam_step(log_alpha_, VectorXd::Constant(1, g), alpha_adam_, 0.0);
  }
  stats.alpha = this->alpha();

  nn::soft_update(q1_target_, q1_, config_.sac_tau);
  nn::soft_update(q2_target_, q2_, config_.sac_tau);
  return stats;
}

std::vector<nn::CheckpointEntry> SacAgent::checkpoint_entries() {
  return {{"actor", &actor_, &actor_adam_},   {"q1", &q1_, &q1_adam_},
          {"q2", &q2_, &q2_adam_},             {"q1_target", &q1_target_, nullptr},
          {"q2_target", &q2_target_, nullptr}};
}

std::vector<nn::CheckpointScalar> SacAgent::checkpoint_scalars() { return {{"log_alpha", log_alpha_.data()}}; }

std::unique_ptr<Agent> make_agent(const AgentConfig& config, const AgentDims& dims, Rng& rng) {
  config.validate();
  switch (config.algorithm) {
    case Algorithm::kDqn: return std::make_unique<DqnAgent>(config, dims, rng);
    case Algorithm::kDdpg: return std::make_unique<DdpgAgent>(config, dims, rng);
    case Algorithm::kSac: return std::make_unique<SacAgent>(config, dims, rng);
  }
  throw std::invalid_argument("unknown algorithm");
}

}  // namespace vdo::drl

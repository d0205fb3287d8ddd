#include "vdo/drl/trainer.hpp"

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vdo/drl/observation.hpp"
#include "vdo/drl/replay_buffer.hpp"

namespace vdo::drl {
namespace {

// Keeps large minibatch buffers on the heap instead of fresh mappings per update.
void tune_allocator() {
#ifdef __GLIBC__
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
    return true;
  }();
  (void)done;
#endif
}


constexpr std::uint64_t kInitStream = 1ULL << 40;
constexpr std::uint64_t kLearnerStream = 2ULL << 40;

void save_agent(Agent& agent, const std::string& path) {
  nn::save_checkpoint(path, agent.checkpoint_entries(), agent.checkpoint_scalars());
}

}  // namespace

std::vector<cost::ActionTriple> BaselinePolicy::decide(const sim::EpisodeState& state, const SimConfig& config,
                                                       double) {
  return std::vector<cost::ActionTriple>(state.vehicles.size() - 1, baseline_action(kind_, config.p_max));
}

std::vector<cost::ActionTriple> AgentPolicy::decide(const sim::EpisodeState& state, const SimConfig& config,
                                                    double prev_sys_reward) {
  const auto obs = build_observation(agent_.config().topology, state, config, prev_sys_reward);
  return decode_actions(agent_, agent_.act(obs, false, unused_rng_), config.p_max);
}

std::string AgentPolicy::name() const {
  const auto& c = agent_.config();
  return std::string(c.topology == Topology::kCentralized ? "c-" : "d-") + std::string(to_string(c.algorithm));
}

AgentDims agent_dims(const AgentConfig& agent, const SimConfig& sim) {
  AgentDims d;
  if (agent.topology == Topology::kCentralized) {
    d.obs_dim = centralized_state_dim(sim.n_vehicles);
    d.groups = sim.n_vehicles - 1;
  } else {
    d.obs_dim = kDecentralizedStateDim;
    d.groups = 1;
  }
  d.discrete_actions = kPresetCount;
  d.action_dim = 3;
  return d;
}

Eigen::MatrixXd build_observation(Topology topology, const sim::EpisodeState& state, const SimConfig& config,
                                  double prev_sys_reward) {
  if (topology == Topology::kCentralized) return centralized_state(state, config);
  return decentralized_states(state, config, prev_sys_reward);
}

std::vector<cost::ActionTriple> decode_actions(const Agent& agent, const Eigen::MatrixXd& enc, double p_max) {
  const auto& dims = agent.dims();
  const bool discrete = agent.config().algorithm == Algorithm::kDqn;
  if (!discrete && dims.action_dim != 3) throw std::invalid_argument("decode_actions: action_dim must be 3");
  std::vector<cost::ActionTriple> out;
  out.reserve(static_cast<std::size_t>(enc.cols() * dims.groups));
  for (Eigen::Index j = 0; j < enc.cols(); ++j) {
    for (int k = 0; k < dims.groups; ++k) {
      if (discrete) {
        out.push_back(preset_decode(static_cast<int>(enc(k, j)), p_max));
      } else {
        const Eigen::Index r = 3 * k;
        out.push_back(cost::make_action(enc(r, j), enc(r + 1, j) * p_max, enc(r + 2, j) * p_max, p_max));
      }
    }
  }
  return out;
}

double system_reward(const sim::SlotOutcome& outcome, cost::Objective objective, const SimConfig& config) {
  return cost::reward(cost::slot_objective(outcome.cost, objective), outcome.violations, config.lambda_cons,
                      config.objective_cap);
}

TrainResult train(const AgentConfig& agent_config, const SimConfig& sim_config, std::uint64_t seed,
                  const TrainOptions& options) {
  agent_config.validate();
  sim_config.validate();
  if (sim_config.n_vehicles < 2) throw ConfigError("n_vehicles must be >= 2");
  tune_allocator();
  const auto dims = agent_dims(agent_config, sim_config);
  Rng init_rng(stream_seed(seed, kInitStream));
  Rng rng(stream_seed(seed, kLearnerStream));

  TrainResult result;
  result.agent = make_agent(agent_config, dims, init_rng);
  Agent& agent = *result.agent;
  ReplayBuffer buffer(dims.obs_dim, agent.encoding_dim(), agent_config.buffer_capacity);
  const bool central = agent_config.topology == Topology::kCentralized;
  const auto objective = agent_config.objective;
  if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);

  for (int ep = 0; ep < agent_config.episodes; ++ep) {
    const auto start = std::chrono::steady_clock::now();
    auto state = sim::init_episode(sim_config, stream_seed(seed, static_cast<std::uint64_t>(ep)));
    double prev_reward = 0.0;
    Eigen::MatrixXd obs = build_observation(agent_config.topology, state, sim_config, prev_reward);
    EpisodeLog row;
    row.episode = ep;
    while (!sim::done(state, sim_config)) {
      const bool warming = agent_config.random_warmup && buffer.size() < agent_config.warmup;
      const Eigen::MatrixXd enc = warming ? agent.random_action(obs.cols(), rng) : agent.act(obs, true, rng);
      const auto actions = decode_actions(agent, enc, sim_config.p_max);
      const auto outcome = sim::advance_slot(state, sim_config, actions);
      const double reward = system_reward(outcome, objective, sim_config);
      const bool terminal = sim::done(state, sim_config);
      const Eigen::MatrixXd next_obs = build_observation(agent_config.topology, state, sim_config, reward);
      if (central) {
        buffer.push(obs.col(0), enc.col(0), reward, next_obs.col(0), terminal);
      } else {
        const auto shares = cost::reward_shares(outcome.context, actions, outcome.cost, outcome.violations,
                                                objective, sim_config.lambda_cons, sim_config.objective_cap);
        for (Eigen::Index k = 0; k < obs.cols(); ++k) {
          buffer.push(obs.col(k), enc.col(k), shares[static_cast<std::size_t>(k)], next_obs.col(k), terminal);
        }
      }
      ++result.env_steps;
      row.objective_total += cost::slot_objective(outcome.cost, objective);
      row.violations += outcome.violations.count();
      if (buffer.size() >= std::max<Eigen::Index>(agent_config.warmup, 1)) {
        for (int u = 0; u < agent_config.updates_per_step; ++u) {
          const auto stats = agent.update(buffer.sample(agent_config.batch_size, rng), rng);
          if (!stats.applied) {
            std::ostringstream msg;
            msg << "training diverged at episode " << ep << ", slot " << state.t
                << ": non-finite loss or gradient (critic loss " << stats.critic_loss << ", actor loss "
                << stats.actor_loss << ")";
            throw std::runtime_error(msg.str());
          }
          ++result.updates;
        }
      }
      obs = next_obs;
      prev_reward = reward;
    }
    agent.end_episode();
    row.exploration = agent.exploration_value();
    if (agent_config.record_wallclock) {
      row.wallclock_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    result.log.push_back(row);
    if (options.on_episode) options.on_episode(row);
    if (!options.checkpoint_dir.empty() && agent_config.checkpoint_every > 0 &&
        (ep + 1) % agent_config.checkpoint_every == 0 && ep + 1 < agent_config.episodes) {
      save_agent(agent, options.checkpoint_dir + "/checkpoint_ep" + std::to_string(ep + 1) + ".bin");
    }
  }
  if (!options.checkpoint_dir.empty()) save_agent(agent, options.checkpoint_dir + "/model.bin");
  return result;
}

std::string training_log_header() { return "episode,objective_total,violations,epsilon_or_alpha,wallclock_ms"; }

std::string training_log_row(const EpisodeLog& r) {
  std::ostringstream out;
  out.precision(17);
  out << r.episode << ',' << r.objective_total << ',' << r.violations << ',' << r.exploration << ',';
  out.precision(6);
  out << std::fixed << r.wallclock_ms;
  return out.str();
}

void write_training_log(const std::string& path, const std::vector<EpisodeLog>& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << training_log_header() << '\n';
  for (const auto& r : log) out << training_log_row(r) << '\n';
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<double> moving_average(const std::vector<double>& values, int window) {
  if (window <= 0) throw std::invalid_argument("moving_average: window must be positive");
  // Each window is summed afresh: a running sum would turn one infinite episode into NaN for the rest of the run.
  std::vector<double> out(values.size());
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t k = 0; k < values.size(); ++k) {
    const std::size_t first = k + 1 >= w ? k + 1 - w : 0;
    const double sum = std::accumulate(values.begin() + static_cast<long>(first), values.begin() + static_cast<long>(k + 1), 0.0);
    out[k] = sum / static_cast<double>(k + 1 - first);
  }
  return out;
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

EvalSummary evaluate(Policy& policy, const SimConfig& config, int n_episodes, std::uint64_t seed,
                     cost::Objective objective) {
  config.validate();
  EvalSummary s;
  s.policy = policy.name();
  s.episodes = std::max(n_episodes, 0);
  std::vector<double> deltas;
  double pv = 0.0, pi = 0.0;
  std::vector<double> trace_sum(static_cast<std::size_t>(config.n_slots), 0.0);
  std::vector<double> trace_count(static_cast<std::size_t>(config.n_slots), 0.0);
  for (int ep = 0; ep < s.episodes; ++ep) {
    auto state = sim::init_episode(config, stream_seed(seed, static_cast<std::uint64_t>(ep)));
    double prev_reward = 0.0;
    double t_total = 0.0, e_total = 0.0;
    int violations = 0;
    while (!sim::done(state, config)) {
      const int t = state.t;
      const auto actions = policy.decide(state, config, prev_reward);
      for (const auto& a : actions) {
        deltas.push_back(a.delta);
        pv += a.p_v2v / config.p_max;
        pi += a.p_v2i / config.p_max;
        trace_sum[static_cast<std::size_t>(t)] += a.delta;
        trace_count[static_cast<std::size_t>(t)] += 1.0;
      }
      const auto outcome = sim::advance_slot(state, config, actions);
      t_total += outcome.cost.f_time;
      e_total += outcome.cost.f_energy;
      violations += outcome.violations.count();
      prev_reward = system_reward(outcome, objective, config);
    }
    s.time_totals.push_back(t_total);
    s.energy_totals.push_back(e_total);
    s.violation_totals.push_back(violations);
  }
  if (s.episodes == 0) return s;
  std::tie(s.time_mean, s.time_std) = mean_std(s.time_totals);
  std::tie(s.energy_mean, s.energy_std) = mean_std(s.energy_totals);
  s.violations_mean = std::accumulate(s.violation_totals.begin(), s.violation_totals.end(), 0.0) /
                      static_cast<double>(s.episodes);
  std::tie(s.delta_mean, s.delta_std) = mean_std(deltas);
  s.p_v2v_mean = pv / static_cast<double>(deltas.size());
  s.p_v2i_mean = pi / static_cast<double>(deltas.size());
  s.delta_trace.resize(trace_sum.size());
  for (std::size_t t = 0; t < trace_sum.size(); ++t) s.delta_trace[t] = trace_sum[t] / trace_count[t];
  return s;
}

}  // namespace vdo::drl

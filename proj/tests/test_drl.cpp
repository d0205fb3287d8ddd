#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>

#include "drl_checks.hpp"
#include "vdo/channel.hpp"
#include "vdo/drl/agents.hpp"
#include "vdo/drl/noise.hpp"
#include "vdo/drl/observation.hpp"
#include "vdo/drl/presets.hpp"
#include "vdo/drl/replay_buffer.hpp"
#include "vdo/drl/trainer.hpp"

using namespace vdo;
using namespace vdo::drl;
using doctest::Approx;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using checks::bandit_buffer;
using checks::bandit_config;

namespace {

AgentConfig small_config(Algorithm algorithm, Topology topology) {
  AgentConfig c;
  c.algorithm = algorithm;
  c.topology = topology;
  c.hidden = {16, 16};
  c.batch_size = 16;
  c.warmup = 64;
  c.buffer_capacity = 2000;
  c.episodes = 3;
  c.record_wallclock = false;
  return c;
}

SimConfig small_sim() {
  SimConfig s;
  s.n_vehicles = 3;
  return s;
}

VectorXd scalar(double v) { return VectorXd::Constant(1, v); }

}  // namespace

TEST_CASE("preset table matches the canonical list") {
  const double expected[25][3] = {
      {0, 0, 1},       {1, 1, 0},       {0.1, 1, 1},     {0.1, 0.6, 0.8}, {0.2, 1, 1},
      {0.2, 0.6, 0.8}, {0.3, 1, 1},     {0.3, 0.6, 0.8}, {0.4, 1, 1},     {0.4, 0.7, 0.7},
      {0.5, 1, 1},     {0.5, 0.7, 0.7}, {0.6, 1, 1},     {0.6, 0.7, 0.7}, {0.3, 0.4, 0.6},
      {0.4, 0.5, 0.6}, {0.5, 0.5, 0.5}, {0.6, 0.6, 0.5}, {0.7, 0.6, 0.4}, {0.7, 1, 1},
      {0.7, 0.8, 0.6}, {0.8, 1, 1},     {0.8, 0.8, 0.6}, {0.9, 1, 1},     {0.9, 0.8, 0.6}};
  REQUIRE(preset_table().size() == 25);
  std::set<std::tuple<double, double, double>> seen;
  for (int i = 0; i < kPresetCount; ++i) {
    const auto a = preset_decode(i, 0.2);
    CHECK(a.delta == expected[i][0]);
    CHECK(a.p_v2v == Approx(0.2 * expected[i][1]).epsilon(1e-15));
    CHECK(a.p_v2i == Approx(0.2 * expected[i][2]).epsilon(1e-15));
    seen.insert({a.delta, a.p_v2v, a.p_v2i});
  }
  CHECK(seen.size() == 25);
  CHECK_THROWS_AS(preset_decode(25, 0.2), std::out_of_range);
  CHECK_THROWS_AS(preset_decode(-1, 0.2), std::out_of_range);
}

TEST_CASE("baseline actions") {
  const auto base = baseline_action(BaselineKind::kAllBase, 0.2);
  CHECK(base.delta == 0.0);
  CHECK(base.p_v2v == 0.0);
  CHECK(base.p_v2i == 0.2);
  const auto leader = baseline_action(BaselineKind::kAllLeader, 0.2);
  CHECK(leader.delta == 1.0);
  CHECK(leader.p_v2v == 0.2);
  CHECK(leader.p_v2i == 0.0);
  const auto balanced = baseline_action(BaselineKind::kBalanced, 0.2);
  CHECK(balanced.delta == 0.5);
  CHECK(balanced.p_v2v == 0.2);
  CHECK(balanced.p_v2i == 0.2);
  for (auto k : {BaselineKind::kAllBase, BaselineKind::kAllLeader, BaselineKind::kBalanced}) {
    CHECK(parse_baseline(to_string(k)) == k);
  }
}

TEST_CASE("centralized state layout") {
  const SimConfig config;
  auto state = sim::init_episode(config, 3);
  const auto s = centralized_state(state, config);
  CHECK(s.size() == 14);
  CHECK(s[13] == 0.0);
  const auto f = sim::followers(state);
  const auto& v = state.vehicles[static_cast<std::size_t>(f[0])];
  const double g = channel::v2i_gain(state.fading.v2i[static_cast<std::size_t>(f[0])], sim::distance_to_bs(v, config),
                                     config.channel);
  CHECK(s[0] == Approx(std::log10(g)).epsilon(1e-14));
  CHECK(s[4 + 4 + 2] == Approx(sim::distance_to_bs(state.vehicles[2], config) / 1000.0).epsilon(1e-14));

  // Scale the fading so the first follower's uplink gain is 1e-12.
  state.fading.v2i[static_cast<std::size_t>(f[0])] *= 1e-12 / g;
  CHECK(centralized_state(state, config)[0] == Approx(-12.0).epsilon(1e-12));
  state.t = 15;
  CHECK(centralized_state(state, config)[13] == 0.5);
}

TEST_CASE("decentralized state layout") {
  SimConfig config;
  auto state = sim::init_episode(config, 4);
  const int f = sim::followers(state)[1];
  const auto s = decentralized_state(state, config, f, 0.0);
  CHECK(s.size() == 6);
  CHECK(s[5] == 0.0);
  CHECK(decentralized_state(state, config, f, -5.0)[5] == -0.5);
  CHECK(decentralized_state(state, config, f, -50.0)[5] == -1.0);
  const auto& leader = state.vehicles[static_cast<std::size_t>(state.leader_id)];
  CHECK(s[3] == Approx(sim::distance_to_bs(leader, config) / config.d_norm).epsilon(1e-14));
  const auto all = decentralized_states(state, config, -1.0);
  CHECK(all.rows() == 6);
  CHECK(all.cols() == 4);
  CHECK(all.col(1) == decentralized_state(state, config, f, -1.0));
}

TEST_CASE("deep fades are floored in the log features") {
  SimConfig config;
  auto state = sim::init_episode(config, 5);
  std::fill(state.fading.v2i.begin(), state.fading.v2i.end(), 0.0);
  const auto s = centralized_state(state, config);
  CHECK(s[0] == kMinLogGain);
  CHECK(std::isfinite(s.sum()));
}

TEST_CASE("replay buffer size, eviction order and validation") {
  ReplayBuffer buffer(2, 1, 5);
  const VectorXd s = VectorXd::Zero(2);
  for (int k = 1; k <= 5; ++k) {
    buffer.push(s, scalar(0.0), k, s, false);
    CHECK(buffer.size() == k);
  }
  for (int k = 6; k <= 8; ++k) buffer.push(s, scalar(0.0), k, s, false);
  CHECK(buffer.size() == 5);
  // Slots 0..2 were overwritten by 6..8; the oldest surviving entries are 4 and 5.
  CHECK(buffer.reward_at(0) == 6.0);
  CHECK(buffer.reward_at(2) == 8.0);
  CHECK(buffer.reward_at(3) == 4.0);
  CHECK(buffer.cursor() == 3);
  CHECK_THROWS(buffer.push(s, scalar(0.0), std::nan(""), s, false));
}

TEST_CASE("replay buffer sampling is uniform") {
  const int n = 100;
  ReplayBuffer buffer(1, 1, n);
  for (int k = 0; k < n; ++k) buffer.push(scalar(k), scalar(0.0), k, scalar(k), false);
  Rng rng(12);
  std::vector<double> counts(n, 0.0);
  const int draws = 100000;
  for (int i = 0; i < draws / 250; ++i) {
    const auto batch = buffer.sample(250, rng);
    for (Eigen::Index j = 0; j < batch.size(); ++j) {
      counts[static_cast<std::size_t>(batch.reward[j])] += 1.0;
      CHECK(batch.state(0, j) == batch.reward[j]);
    }
  }
  const double expected = static_cast<double>(draws) / n;
  double chi2 = 0.0;
  for (double c : counts) {
    CHECK(c > 0.0);
    chi2 += (c - expected) * (c - expected) / expected;
  }
  // 99 degrees of freedom; 0.1% upper critical value.
  CHECK(chi2 < 148.23);
}

TEST_CASE("ou noise examples") {
  Rng rng(13);
  CHECK(ou_noise_step(MatrixXd::Constant(1, 1, 1.0), 0.1, 0.0, rng)(0, 0) == Approx(0.9).epsilon(1e-15));
  CHECK(ou_noise_step(MatrixXd::Zero(2, 3), 0.1, 0.0, rng).cwiseAbs().maxCoeff() == 0.0);
  const double theta = 0.1, sigma = 0.05;
  MatrixXd x = MatrixXd::Zero(1, 1);
  double s = 0.0, s2 = 0.0;
  const int steps = 1000000;
  for (int i = 0; i < steps; ++i) {
    x = ou_noise_step(x, theta, sigma, rng);
    s += x(0, 0);
    s2 += x(0, 0) * x(0, 0);
  }
  const double var = s2 / steps - (s / steps) * (s / steps);
  CHECK(var == Approx(sigma * sigma / (2 * theta - theta * theta)).epsilon(0.1));

  OuNoise noise(theta, sigma, 0.1);
  const auto a = noise.sample(3, 2, rng);
  CHECK((a - 0.1 * noise.state()).cwiseAbs().maxCoeff() < 1e-18);
  noise.reset();
  CHECK(noise.state().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("epsilon schedule decays per episode to its floor") {
  AgentConfig c = small_config(Algorithm::kDqn, Topology::kDecentralized);
  Rng rng(14);
  DqnAgent agent(c, AgentDims{6, 1, 25, 3}, rng);
  CHECK(agent.epsilon() == 0.3);
  double prev = agent.epsilon();
  bool reached = false;
  for (int e = 0; e < 3000; ++e) {
    agent.end_episode();
    CHECK(agent.epsilon() <= prev);
    CHECK(agent.epsilon() >= 0.05);
    prev = agent.epsilon();
    if (prev == 0.05) reached = true;
  }
  CHECK(reached);
  CHECK(agent.epsilon() == 0.05);
}

TEST_CASE("emitted actions are always legal") {
  const SimConfig sim = small_sim();
  Rng rng(15);
  for (auto algo : {Algorithm::kDqn, Algorithm::kDdpg, Algorithm::kSac}) {
    for (auto topo : {Topology::kCentralized, Topology::kDecentralized}) {
      auto cfg = small_config(algo, topo);
      cfg.ou_scale = 5.0;
      const auto dims = agent_dims(cfg, sim);
      auto agent = make_agent(cfg, dims, rng);
      const Eigen::Index cols = topo == Topology::kCentralized ? 1 : 2;
      for (int trial = 0; trial < 200; ++trial) {
        MatrixXd obs(dims.obs_dim, cols);
        for (Eigen::Index j = 0; j < obs.size(); ++j) obs.data()[j] = 20.0 * standard_normal(rng);
        for (const bool explore : {true, false}) {
          const auto enc = agent->act(obs, explore, rng);
          for (const auto& a : decode_actions(*agent, enc, sim.p_max)) {
            CHECK(a.delta >= 0.0);
            CHECK(a.delta <= 1.0);
            CHECK(a.p_v2v >= 0.0);
            CHECK(a.p_v2v <= sim.p_max);
            CHECK(a.p_v2i >= 0.0);
            CHECK(a.p_v2i <= sim.p_max);
          }
        }
      }
    }
  }
}

TEST_CASE("dqn: terminal batch with zero Q and reward -1 has loss 1") {
  auto cfg = small_config(Algorithm::kDqn, Topology::kDecentralized);
  Rng rng(16);
  DqnAgent agent(cfg, AgentDims{2, 1, 3, 3}, rng);
  agent.online().set_params(VectorXd::Zero(agent.online().n_params()));
  Batch b;
  b.state = MatrixXd::Random(2, 8);
  b.next_state = MatrixXd::Random(2, 8);
  b.action = MatrixXd::Constant(1, 8, 1.0);
  b.reward = Eigen::RowVectorXd::Constant(8, -1.0);
  b.done = Eigen::RowVectorXd::Ones(8);
  CHECK(agent.update(b, rng).critic_loss == 1.0);
}

TEST_CASE("dqn: with gamma zero the target is the reward") {
  auto cfg = small_config(Algorithm::kDqn, Topology::kDecentralized);
  cfg.gamma = 1e-300;
  Rng r1(17), r2(17);
  DqnAgent a(cfg, AgentDims{2, 1, 3, 3}, r1);
  DqnAgent b(cfg, AgentDims{2, 1, 3, 3}, r2);
  Batch batch;
  batch.state = MatrixXd::Random(2, 8);
  batch.next_state = MatrixXd::Random(2, 8);
  batch.action = MatrixXd::Constant(1, 8, 2.0);
  batch.reward = Eigen::RowVectorXd::LinSpaced(8, -1.0, 1.0);
  batch.done = Eigen::RowVectorXd::Zero(8);
  Batch terminal = batch;
  terminal.done.setOnes();
  CHECK(a.update(batch, r1).critic_loss == Approx(b.update(terminal, r2).critic_loss).epsilon(1e-12));
}

TEST_CASE("dqn: toy MDP greedy policy matches value iteration") {
  const auto r = checks::dqn_toy_mdp(18);
  CHECK(r.greedy_matches);
  CHECK(r.max_rel_q_error <= 0.1);
}

TEST_CASE("ddpg: frozen constant critic gives no actor movement") {
  auto cfg = bandit_config(Algorithm::kDdpg);
  cfg.ddpg_critic_lr = 1e-300;
  Rng rng(19);
  DdpgAgent agent(cfg, AgentDims{1, 1, 25, 1}, rng);
  const int last = agent.critic().n_layers() - 1;
  agent.critic().weight(last).setZero();
  const VectorXd before = agent.actor().params();
  auto buffer = bandit_buffer(256, rng);
  for (int u = 0; u < 5; ++u) agent.update(buffer.sample(64, rng), rng);
  CHECK((agent.actor().params() - before).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ddpg: zero tau keeps the targets fixed") {
  auto cfg = bandit_config(Algorithm::kDdpg);
  cfg.ddpg_tau = 0.0;
  Rng rng(20);
  DdpgAgent agent(cfg, AgentDims{1, 1, 25, 1}, rng);
  const VectorXd ta = agent.target_actor().params();
  const VectorXd tc = agent.target_critic().params();
  auto buffer = bandit_buffer(256, rng);
  for (int u = 0; u < 20; ++u) agent.update(buffer.sample(64, rng), rng);
  CHECK(agent.target_actor().params() == ta);
  CHECK(agent.target_critic().params() == tc);
  CHECK(agent.actor().params() != ta);
}

TEST_CASE("ddpg: bandit actor converges to the analytic argmax") {
  CHECK(std::abs(checks::ddpg_bandit_action(21) - 0.3) <= 0.05);
}

TEST_CASE("sac: default target entropy is minus the action dimension") {
  auto cfg = small_config(Algorithm::kSac, Topology::kDecentralized);
  Rng rng(22);
  SacAgent agent(cfg, AgentDims{6, 1, 25, 3}, rng);
  CHECK(agent.target_entropy() == -3.0);
  CHECK(agent.alpha() == Approx(0.05).epsilon(1e-14));
}

TEST_CASE("sac: bandit policy mean converges and keeps positive spread") {
  const auto r = checks::sac_bandit(23);
  CHECK(std::abs(r.mean - 0.3) <= 0.05);
  CHECK(r.log_std > -20.0 + 1.0);
  CHECK(r.sample_sd > 1e-3);
}

TEST_CASE("train: one episode gives one log row and at most T steps") {
  for (auto algo : {Algorithm::kDqn, Algorithm::kDdpg, Algorithm::kSac}) {
    auto cfg = small_config(algo, Topology::kDecentralized);
    cfg.episodes = 1;
    const auto r = train(cfg, small_sim(), 5);
    CHECK(r.log.size() == 1);
    CHECK(r.env_steps <= small_sim().n_slots);
  }
}

TEST_CASE("train: identical configs and seeds give identical logs") {
  for (auto algo : {Algorithm::kDqn, Algorithm::kDdpg, Algorithm::kSac}) {
    for (auto topo : {Topology::kCentralized, Topology::kDecentralized}) {
      const auto cfg = small_config(algo, topo);
      const auto a = train(cfg, small_sim(), 6);
      const auto b = train(cfg, small_sim(), 6);
      REQUIRE(a.log.size() == 3);
      CHECK(a.updates > 0);
      for (std::size_t k = 0; k < a.log.size(); ++k) {
        CHECK(training_log_row(a.log[k]) == training_log_row(b.log[k]));
      }
      const auto c = train(cfg, small_sim(), 7);
      CHECK(training_log_row(c.log[0]) != training_log_row(a.log[0]));
    }
  }
}

TEST_CASE("train: checkpoints at the configured cadence reload into a fresh agent") {
  const auto dir = std::filesystem::temp_directory_path() / "vdo_drl_ckpt_test";
  std::filesystem::remove_all(dir);
  auto cfg = small_config(Algorithm::kSac, Topology::kDecentralized);
  cfg.checkpoint_every = 1;
  TrainOptions opt;
  opt.checkpoint_dir = dir.string();
  int seen = 0;
  opt.on_episode = [&seen](const EpisodeLog&) { ++seen; };
  auto r = train(cfg, small_sim(), 8, opt);
  CHECK(seen == 3);
  // The final episode is saved as model.bin only.
  for (int k = 1; k <= 2; ++k) CHECK(std::filesystem::exists(dir / ("checkpoint_ep" + std::to_string(k) + ".bin")));
  CHECK_FALSE(std::filesystem::exists(dir / "checkpoint_ep3.bin"));
  REQUIRE(std::filesystem::exists(dir / "model.bin"));

  Rng rng(99);
  auto fresh = make_agent(cfg, agent_dims(cfg, small_sim()), rng);
  nn::load_checkpoint((dir / "model.bin").string(), fresh->checkpoint_entries(), fresh->checkpoint_scalars());
  const MatrixXd obs = MatrixXd::Random(6, 4);
  CHECK((fresh->act(obs, false, rng) - r.agent->act(obs, false, rng)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(fresh->exploration_value() == r.agent->exploration_value());
  std::filesystem::remove_all(dir);
}

TEST_CASE("evaluate: balanced baseline reports a constant delta") {
  BaselinePolicy policy(BaselineKind::kBalanced);
  const auto s = evaluate(policy, SimConfig{}, 5, 1);
  CHECK(s.episodes == 5);
  CHECK(s.delta_mean == 0.5);
  CHECK(s.delta_std == 0.0);
  CHECK(s.p_v2v_mean == 1.0);
  CHECK(s.delta_trace.size() == 30);
  CHECK(s.time_totals.size() == 5);
}

TEST_CASE("evaluate: zero episodes gives an empty summary") {
  BaselinePolicy policy(BaselineKind::kAllBase);
  const auto s = evaluate(policy, SimConfig{}, 0, 1);
  CHECK(s.episodes == 0);
  CHECK(s.time_totals.empty());
}

TEST_CASE("evaluate: totals are sums of slot objectives and reproducible") {
  BaselinePolicy policy(BaselineKind::kAllLeader);
  const SimConfig config;
  const auto a = evaluate(policy, config, 3, 42);
  const auto b = evaluate(policy, config, 3, 42);
  CHECK(a.time_totals == b.time_totals);
  CHECK(a.energy_totals == b.energy_totals);
  auto state = sim::init_episode(config, stream_seed(42, 0));
  double total = 0.0;
  while (!sim::done(state, config)) {
    const auto actions = policy.decide(state, config, 0.0);
    total += sim::advance_slot(state, config, actions).cost.f_time;
  }
  CHECK(a.time_totals[0] == total);
}

TEST_CASE("greedy agent policy is deterministic") {
  auto cfg = small_config(Algorithm::kDdpg, Topology::kDecentralized);
  const auto r = train(cfg, small_sim(), 9);
  AgentPolicy policy(*r.agent);
  CHECK(policy.name() == "d-ddpg");
  const auto a = evaluate(policy, small_sim(), 2, 3);
  const auto b = evaluate(policy, small_sim(), 2, 3);
  CHECK(a.time_totals == b.time_totals);
  CHECK(a.delta_trace == b.delta_trace);
}

TEST_CASE("moving average and mean/std helpers") {
  const std::vector<double> v{1, 2, 3, 4, 5};
  const auto ma = moving_average(v, 2);
  CHECK(ma == std::vector<double>{1, 1.5, 2.5, 3.5, 4.5});
  const double inf = std::numeric_limits<double>::infinity();
  const auto spiked = moving_average({1, inf, 3, 5, 7}, 2);
  CHECK(std::isinf(spiked[1]));
  CHECK(std::isinf(spiked[2]));
  CHECK(spiked[3] == 4.0);
  CHECK(spiked[4] == 6.0);
  const auto [m, s] = mean_std(v);
  CHECK(m == 3.0);
  CHECK(s == Approx(std::sqrt(2.5)).epsilon(1e-15));
  CHECK(mean_std({7.0}).second == 0.0);
}

TEST_CASE("agent config registry covers every documented key") {
  AgentConfig c;
  ConfigRegistry r;
  register_agent_config(r, c);
  r.set("algorithm", "dqn");
  r.set("hidden_sizes", "64, 32");
  r.set("eps_decay", "0.99");
  CHECK(c.algorithm == Algorithm::kDqn);
  CHECK(c.hidden == std::vector<int>{64, 32});
  CHECK(c.eps_decay == 0.99);
  CHECK_THROWS_AS(r.set("algorithm", "ppo"), ConfigError);
  c.gamma = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

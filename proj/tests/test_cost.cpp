#include "doctest.h"

#include <cmath>
#include <limits>

#include "reference_model.hpp"
#include "shared_checks.hpp"
#include "vdo/cost.hpp"

using namespace vdo;
using namespace vdo::cost;
using doctest::Approx;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SlotContext make_context(int n, double h, double g, double leader_g, double beta) {
  SlotContext c;
  c.v2v_gain.assign(static_cast<std::size_t>(n), h);
  c.v2i_gain.assign(static_cast<std::size_t>(n), g);
  c.leader_v2i_gain = leader_g;
  c.chunk_bits.assign(static_cast<std::size_t>(n), 2e7);
  c.beta.assign(static_cast<std::size_t>(n), beta);
  c.leader_cpu_freq = 2.8e9;
  c.leader_power = 0.2;
  return c;
}

}  // namespace

TEST_CASE("make_action clamps to the legal box") {
  const auto a = make_action(1.5, -0.1, 0.5, 0.2);
  CHECK(a.delta == 1.0);
  CHECK(a.p_v2v == 0.0);
  CHECK(a.p_v2i == 0.2);
  const auto b = make_action(std::nan(""), 0.1, std::nan(""), 0.2);
  CHECK(b.delta == 0.0);
  CHECK(b.p_v2v == 0.1);
  CHECK(b.p_v2i == 0.0);
}

TEST_CASE("transmission time examples") {
  const auto t = trans_times({0.5, 0.2, 0.2}, 2e7, 1e8, 2e8);
  CHECK(t.v2v == Approx(0.1).epsilon(1e-15));
  CHECK(t.v2i == Approx(0.05).epsilon(1e-15));
  CHECK(t.trans == Approx(0.1).epsilon(1e-15));
  CHECK(trans_times({0.0, 0.0, 0.2}, 2e7, 0.0, 1e8).v2v == 0.0);
  const auto inf = trans_times({1.0, 0.0, 0.2}, 2e7, 0.0, 1e8);
  CHECK(std::isinf(inf.trans));
  CHECK(inf.v2i == 0.0);
}

TEST_CASE("leader upload time examples") {
  CHECK(leader_upload_time(0.0, 0.0) == 0.0);
  CHECK(leader_upload_time(4e7, 5.17e7) == Approx(0.7737).epsilon(1e-4));
  CHECK(leader_upload_time(4e7, 5.17e7 / 2) == Approx(2 * leader_upload_time(4e7, 5.17e7)).epsilon(1e-15));
  CHECK(std::isinf(leader_upload_time(1.0, 0.0)));
}

TEST_CASE("transmission energy examples") {
  const auto e = trans_energies({0.0, 0.2, 0.2}, 0.0, 0.387);
  CHECK(e.trans == Approx(0.0774).epsilon(1e-12));
  const auto zero = trans_energies({0.4, 0.0, 0.0}, 0.3, 0.2);
  CHECK(zero.trans == 0.0);
  const auto split = trans_energies({0.4, 0.1, 0.2}, 0.3, 0.2);
  CHECK(split.trans == split.v2v + split.v2i);
  CHECK(trans_energies({1.0, 0.0, 0.2}, kInf, 0.0).trans == 0.0);
  CHECK(std::isinf(trans_energies({1.0, 0.1, 0.2}, kInf, 0.0).trans));
}

TEST_CASE("leader upload energy examples") {
  CHECK(leader_upload_energy(0.2, 0.7737) == Approx(0.15474).epsilon(1e-12));
  CHECK(leader_upload_energy(0.13, 0.0) == 0.0);
  CHECK(leader_upload_energy(0.4, 0.7) == Approx(2 * leader_upload_energy(0.2, 0.7)).epsilon(1e-15));
}

TEST_CASE("slot objective: vanishing transmissions leave only dedup time") {
  auto c = make_context(4, kInf, 2e-12, 2e-12, 1.0);
  const std::vector<ActionTriple> a(4, {1.0, 0.2, 0.2});
  const auto ev = evaluate_slot(c, a);
  CHECK(ev.cost.t_upload == 0.0);
  CHECK(ev.cost.f_time == ev.cost.t_dedup);
  CHECK(ev.cost.f_time == Approx((10.0 * 8e7 + 4e6) / 2.8e9).epsilon(1e-14));
}

TEST_CASE("slot objective: all-base at 100 m") {
  auto c = make_context(4, 1e-9, 2e-12, 2e-12, 0.5);
  const std::vector<ActionTriple> a(4, {0.0, 0.0, 0.2});
  const auto ev = evaluate_slot(c, a);
  const double t = 2e7 / (2e7 * std::log2(6.0));
  CHECK(t == Approx(0.387).epsilon(1e-3));
  CHECK(ev.cost.f_time == Approx(4 * t + 4e6 / 2.8e9).epsilon(1e-14));
  CHECK(ev.cost.f_time == Approx(1.5486 + 1.43e-3).epsilon(1e-3));
  CHECK(ev.volumes.received == 0.0);
}

TEST_CASE("slot objective: zero follower powers leave only dedup energy") {
  auto c = make_context(3, 1e-9, 1e-12, 2e-12, 1.0);
  const std::vector<ActionTriple> a{{0.3, 0.0, 0.0}, {0.8, 0.0, 0.0}, {0.0, 0.0, 0.0}};
  const auto ev = evaluate_slot(c, a);
  CHECK(ev.cost.f_energy == ev.cost.e_dedup);
  CHECK(std::isinf(ev.cost.f_time));
}

TEST_CASE("constraint violations") {
  SlotCostBreakdown b;
  b.followers.resize(2);
  auto v = constraint_violations(b, 1.0, 1.0);
  CHECK(v.count() == 0);
  b.followers[1].time.trans = 1.2;
  v = constraint_violations(b, 1.0, 1.0);
  CHECK(v.follower_time[1]);
  CHECK(v.count() == 1);
  b.t_upload = 0.6;
  b.t_dedup = 0.5;
  b.e_upload = 2.0;
  v = constraint_violations(b, 1.0, 1.0);
  CHECK(v.leader_time);
  CHECK(v.leader_energy);
  CHECK(v.count() == 3);
}

TEST_CASE("all-base violates the time budget at 200 m but not at 100 m") {
  const double g100 = 2e-12;
  const double g200 = 2e-5 * std::pow(200.0, -3.5);
  const std::vector<ActionTriple> a(4, {0.0, 0.0, 0.2});
  const auto near = evaluate_slot(make_context(4, 1e-9, g100, g100, 0.5), a);
  const auto far = evaluate_slot(make_context(4, 1e-9, g200, g100, 0.5), a);
  CHECK(constraint_violations(near.cost, 1.0, 1.0).count() == 0);
  const auto v = constraint_violations(far.cost, 1.0, 1.0);
  for (bool b : v.follower_time) CHECK(b);
  CHECK(far.cost.followers[0].time.trans > 4 * near.cost.followers[0].time.trans);
}

TEST_CASE("reward examples") {
  Violations v;
  v.follower_time = {true, true, false};
  v.follower_energy = {false, false, false};
  v.leader_time = true;
  CHECK(reward(2.0, v, 1.0) == -5.0);
  CHECK(reward(2.0, v, 0.0) == -2.0);
  Violations none;
  none.follower_time = {false};
  none.follower_energy = {false};
  CHECK(reward(3.25, none, 1.0) == -3.25);
  CHECK(reward(kInf, none, 1.0, 1e6) == -1e6);
}

TEST_CASE("production cost path matches an independent transcription") {
  CHECK(checks::transcription_worst_error(2000, 2024) <= 1e-12);
}

TEST_CASE("time objective is non-increasing in every power") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    auto c = make_context(3, 0.0, 0.0, 2e-12, 0.5);
    for (int i = 0; i < 3; ++i) {
      c.v2v_gain[static_cast<std::size_t>(i)] = 2e-5 * std::pow(uniform(rng, 2.0, 50.0), -3.5);
      c.v2i_gain[static_cast<std::size_t>(i)] = 2e-5 * std::pow(uniform(rng, 20.0, 250.0), -3.5);
    }
    std::vector<ActionTriple> a(3);
    for (auto& x : a) x = {uniform01(rng), uniform(rng, 0.01, 0.2), uniform(rng, 0.01, 0.2)};
    const double base = evaluate_slot(c, a).cost.f_time;
    for (int i = 0; i < 3; ++i) {
      auto up = a;
      up[static_cast<std::size_t>(i)].p_v2v = std::min(0.2, up[static_cast<std::size_t>(i)].p_v2v * 1.5);
      CHECK(evaluate_slot(c, up).cost.f_time <= base);
      up = a;
      up[static_cast<std::size_t>(i)].p_v2i = 0.2;
      CHECK(evaluate_slot(c, up).cost.f_time <= base);
    }
  }
}

TEST_CASE("reward shares sum to the system reward") {
  Rng rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 6));
    auto c = make_context(n, 0.0, 0.0, 2e-5 * std::pow(uniform(rng, 5.0, 300.0), -3.5), uniform01(rng));
    std::vector<ActionTriple> a(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      c.v2v_gain[k] = exponential1(rng) * 2e-5 * std::pow(uniform(rng, 2.0, 50.0), -3.5);
      c.v2i_gain[k] = exponential1(rng) * 2e-5 * std::pow(uniform(rng, 5.0, 300.0), -3.5);
      c.beta[k] = uniform01(rng);
      // Occasionally zero a power to exercise infinite costs.
      const double pv = uniform01(rng) < 0.1 ? 0.0 : uniform(rng, 0.0, 0.2);
      a[k] = {uniform01(rng), pv, uniform(rng, 0.0, 0.2)};
    }
    const auto ev = evaluate_slot(c, a);
    const auto v = constraint_violations(ev.cost, 1.0, 1.0);
    for (auto obj : {Objective::kTime, Objective::kEnergy}) {
      const auto shares = reward_shares(c, a, ev.cost, v, obj, 1.0);
      double sum = 0.0;
      for (double s : shares) {
        CHECK(std::isfinite(s));
        sum += s;
      }
      const double r = reward(slot_objective(ev.cost, obj), v, 1.0);
      CHECK(sum == Approx(r).epsilon(1e-10));
    }
  }
}

TEST_CASE("slot csv row layout") {
  auto c = make_context(2, 1e-9, 2e-12, 2e-12, 0.5);
  const std::vector<ActionTriple> a{{1.0, 0.0, 0.2}, {0.5, 0.2, 0.2}};
  const auto ev = evaluate_slot(c, a);
  const auto header = csv_header(2);
  const auto row = csv_row(4, ev.cost, 3);
  CHECK(header.rfind("t,f0_t_v2v,", 0) == 0);
  CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
  CHECK(row.find("inf") != std::string::npos);
  CHECK(row.rfind("4,", 0) == 0);
  CHECK(row.substr(row.size() - 2) == ",3");
}

TEST_CASE("objective names round-trip") {
  CHECK(parse_objective(to_string(Objective::kTime)) == Objective::kTime);
  CHECK(parse_objective(to_string(Objective::kEnergy)) == Objective::kEnergy);
  CHECK_THROWS(parse_objective("latency"));
}

#include "vdo/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include "vdo/channel.hpp"
#include "vdo/dedup.hpp"

namespace vdo::oracle {
namespace {

struct Term {
  double trans = 0.0;     // objective contribution of the follower's own transmission
  double received = 0.0;  // delta * d
  double unique = 0.0;    // (1 - beta) * delta * d
  int violations = 0;     // own time and energy indicators
};

bool lex_less(const cost::ActionTriple& a, const cost::ActionTriple& b) {
  return std::tie(a.delta, a.p_v2v, a.p_v2i) < std::tie(b.delta, b.p_v2v, b.p_v2i);
}

bool same(const cost::ActionTriple& a, const cost::ActionTriple& b) {
  return a.delta == b.delta && a.p_v2v == b.p_v2v && a.p_v2i == b.p_v2i;
}

std::vector<double> levels(int count, double hi) {
  if (count < 2) throw std::invalid_argument("grid levels must be >= 2");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = hi * (static_cast<double>(i) / (count - 1));
  return out;
}

}  // namespace

double penalized_value(const cost::SlotContext& context, std::span<const cost::ActionTriple> actions,
                       cost::Objective objective, const Penalty& p) {
  const auto eval = cost::evaluate_slot(context, actions);
  const auto v = cost::constraint_violations(eval.cost, p.t_max, p.e_max);
  return -cost::reward(cost::slot_objective(eval.cost, objective), v, p.lambda_cons, p.cap);
}

std::vector<cost::ActionTriple> candidates(const cost::SlotContext& c, int follower, const GridSpec& grid,
                                           const Penalty& p) {
  const auto i = static_cast<std::size_t>(follower);
  std::vector<cost::ActionTriple> out;
  const auto deltas = levels(grid.delta_levels, 1.0);
  if (grid.objective == cost::Objective::kTime) {
    for (const double d : deltas) out.push_back(cost::make_action(d, p.p_max, p.p_max, p.p_max));
    const double rv = channel::v2v_rate(p.p_max, c.v2v_gain[i], c.channel);
    const double ri = channel::v2i_rate(p.p_max, c.v2i_gain[i], c.channel);
    const double bits = c.chunk_bits[i];
    std::vector<double> extra;
    if (rv + ri > 0.0) extra.push_back(rv / (rv + ri));
    extra.push_back(p.t_max * rv / bits);        // V2V arm reaches t_max
    extra.push_back(1.0 - p.t_max * ri / bits);  // V2I arm reaches t_max
    for (const double d : extra) {
      if (std::isfinite(d) && d > 0.0 && d < 1.0) out.push_back(cost::make_action(d, p.p_max, p.p_max, p.p_max));
    }
  } else {
    const auto powers = levels(grid.power_levels, p.p_max);
    for (const double d : deltas) {
      for (const double pv : powers) {
        for (const double pi : powers) out.push_back(cost::make_action(d, pv, pi, p.p_max));
      }
    }
  }
  out.push_back(cost::make_action(0.0, 0.0, p.p_max, p.p_max));
  out.push_back(cost::make_action(1.0, p.p_max, 0.0, p.p_max));
  out.push_back(cost::make_action(0.5, p.p_max, p.p_max, p.p_max));
  std::sort(out.begin(), out.end(), lex_less);
  out.erase(std::unique(out.begin(), out.end(), same), out.end());
  return out;
}

OracleResult grid_search_slot(const cost::SlotContext& c, const GridSpec& grid, const Penalty& p) {
  const int n = c.n_followers();
  if (n < 1) throw std::invalid_argument("grid_search_slot: no followers");
  std::vector<std::vector<cost::ActionTriple>> cand(static_cast<std::size_t>(n));
  double joint = 1.0;
  for (int k = 0; k < n; ++k) {
    cand[static_cast<std::size_t>(k)] = candidates(c, k, grid, p);
    joint *= static_cast<double>(cand[static_cast<std::size_t>(k)].size());
  }
  if (joint > grid.budget) {
    throw BudgetExceeded("oracle refuses: " + std::to_string(static_cast<long long>(joint)) +
                         " joint evaluations exceed the budget of " +
                         std::to_string(static_cast<long long>(grid.budget)));
  }

  const bool time = grid.objective == cost::Objective::kTime;
  std::vector<std::vector<Term>> terms(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double rv_gain = c.v2v_gain[ku];
    const double ri_gain = c.v2i_gain[ku];
    for (const auto& a : cand[ku]) {
      const double rv = channel::v2v_rate(a.p_v2v, rv_gain, c.channel);
      const double ri = channel::v2i_rate(a.p_v2i, ri_gain, c.channel);
      const auto tt = cost::trans_times(a, c.chunk_bits[ku], rv, ri);
      const auto ee = cost::trans_energies(a, tt.v2v, tt.v2i);
      Term t;
      t.trans = time ? tt.trans : ee.trans;
      t.received = a.delta * c.chunk_bits[ku];
      t.unique = (1.0 - c.beta[ku]) * t.received;
      t.violations = (tt.trans > p.t_max ? 1 : 0) + (ee.trans > p.e_max ? 1 : 0);
      terms[ku].push_back(t);
    }
  }
  const double r_leader = channel::v2i_rate(c.leader_power, c.leader_v2i_gain, c.channel);

  // Odometer over candidate indices with the first follower most significant,
  // so the first strict minimum is the lexicographically smallest.
  std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
  std::vector<std::size_t> best_idx = idx;
  double best = std::numeric_limits<double>::infinity();
  double evaluations = 0.0;
  while (true) {
    double trans = 0.0, received = 0.0, unique = 0.0;
    int violations = 0;
    for (int k = 0; k < n; ++k) {
      const auto& t = terms[static_cast<std::size_t>(k)][idx[static_cast<std::size_t>(k)]];
      trans += t.trans;
      received += t.received;
      unique += t.unique;
      violations += t.violations;
    }
    const double t_c = dedup::dedup_time(received, n, c.dedup, c.leader_cpu_freq);
    const double e_c = dedup::dedup_energy(t_c, c.dedup, c.leader_cpu_freq);
    const double t_up = cost::leader_upload_time(unique, r_leader);
    const double e_up = cost::leader_upload_energy(c.leader_power, t_up);
    violations += (t_up + t_c > p.t_max ? 1 : 0) + (e_up + e_c > p.e_max ? 1 : 0);
    const double objective = trans + (time ? t_c + t_up : e_c + e_up);
    const double value = std::min(objective, p.cap) + p.lambda_cons * violations;
    evaluations += 1.0;
    if (value < best) {
      best = value;
      best_idx = idx;
    }
    int k = n - 1;
    while (k >= 0) {
      auto& i = idx[static_cast<std::size_t>(k)];
      if (++i < cand[static_cast<std::size_t>(k)].size()) break;
      i = 0;
      --k;
    }
    if (k < 0) break;
  }

  OracleResult r;
  r.evaluations = evaluations;
  for (int k = 0; k < n; ++k) {
    r.actions.push_back(cand[static_cast<std::size_t>(k)][best_idx[static_cast<std::size_t>(k)]]);
  }
  // Report through the production path and keep any uniform baseline that is
  // at least as good there.
  r.value = penalized_value(c, r.actions, grid.objective, p);
  for (const auto& base : {cost::make_action(0.0, 0.0, p.p_max, p.p_max), cost::make_action(1.0, p.p_max, 0.0, p.p_max),
                           cost::make_action(0.5, p.p_max, p.p_max, p.p_max)}) {
    const std::vector<cost::ActionTriple> uniform(static_cast<std::size_t>(n), base);
    const double v = penalized_value(c, uniform, grid.objective, p);
    if (v < r.value) {
      r.value = v;
      r.actions = uniform;
    }
  }
  const auto eval = cost::evaluate_slot(c, r.actions);
  r.objective = cost::slot_objective(eval.cost, grid.objective);
  r.violations = cost::constraint_violations(eval.cost, p.t_max, p.e_max).count();
  return r;
}

}  // namespace vdo::oracle

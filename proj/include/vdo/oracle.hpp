#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "vdo/cost.hpp"

namespace vdo::oracle {

struct GridSpec {
  int delta_levels = 11;  // uniform on [0, 1], endpoints included
  int power_levels = 5;   // uniform on [0, p_max], endpoints included
  cost::Objective objective = cost::Objective::kTime;
  double budget = 1e7;    // maximum joint evaluations
};

// Penalised slot value: min(objective, cap) + lambda * violations, i.e. the
// negated reward.
struct Penalty {
  double t_max = 1.0;
  double e_max = 1.0;
  double lambda_cons = 1.0;
  double cap = 1e6;
  double p_max = 0.2;
};

double penalized_value(const cost::SlotContext& context, std::span<const cost::ActionTriple> actions,
                       cost::Objective objective, const Penalty& penalty);

struct OracleResult {
  std::vector<cost::ActionTriple> actions;
  double value = 0.0;      // penalised
  double objective = 0.0;  // raw slot objective of `actions`
  int violations = 0;
  double evaluations = 0.0;
};

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-follower candidate actions, sorted lexicographically and deduplicated.
// Time objective: powers pinned to p_max; delta from the grid, plus the point
// equalising both paths and the points where the transmission time meets
// t_max. Energy objective: the full delta x p_v2v x p_v2i grid. Both include
// the three baseline actions.
std::vector<cost::ActionTriple> candidates(const cost::SlotContext& context, int follower, const GridSpec& grid,
                                           const Penalty& penalty);

// Exhaustive joint minimisation of penalized_value over the candidate sets.
// Ties go to the lexicographically smallest joint action (first follower
// most significant). The uniform baseline joint actions are compared through
// the production cost path, so the result never exceeds any of them. Throws
// BudgetExceeded when the joint enumeration would exceed grid.budget.
OracleResult grid_search_slot(const cost::SlotContext& context, const GridSpec& grid, const Penalty& penalty);

}  // namespace vdo::oracle

#include "vdo/cost.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "vdo/channel.hpp"

namespace vdo::cost {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp_or_zero(double value, double hi) {
  if (std::isnan(value)) return 0.0;
  return std::clamp(value, 0.0, hi);
}

double transfer_time(double bits, double rate) {
  if (bits <= 0.0) return 0.0;
  if (rate <= 0.0) return kInf;
  return bits / rate;
}

double energy(double power, double time) {
  if (power <= 0.0) return 0.0;
  if (std::isinf(time)) return kInf;
  return power * time;
}

void put(std::ostringstream& out, double value) {
  out << ',';
  if (std::isinf(value)) {
    out << "inf";
  } else {
    out << value;
  }
}

}  // namespace

ActionTriple make_action(double delta, double p_v2v, double p_v2i, double p_max) {
  return {clamp_or_zero(delta, 1.0), clamp_or_zero(p_v2v, p_max), clamp_or_zero(p_v2i, p_max)};
}

std::string_view to_string(Objective objective) {
  return objective == Objective::kTime ? "time" : "energy";
}

Objective parse_objective(std::string_view text) {
  if (text == "time") return Objective::kTime;
  if (text == "energy") return Objective::kEnergy;
  throw ConfigError("objective must be 'time' or 'energy'");
}

TransTimes trans_times(const ActionTriple& a, double chunk_bits, double r_v2v, double r_v2i) {
  TransTimes t;
  t.v2v = transfer_time(a.delta * chunk_bits, r_v2v);
  t.v2i = transfer_time((1.0 - a.delta) * chunk_bits, r_v2i);
  t.trans = std::max(t.v2v, t.v2i);
  return t;
}

double leader_upload_time(double unique_bits, double r_leader_v2i) {
  return transfer_time(unique_bits, r_leader_v2i);
}

TransEnergies trans_energies(const ActionTriple& a, double t_v2v, double t_v2i) {
  TransEnergies e;
  e.v2v = energy(a.p_v2v, t_v2v);
  e.v2i = energy(a.p_v2i, t_v2i);
  e.trans = e.v2v + e.v2i;
  return e;
}

double leader_upload_energy(double p_leader, double t_upload) { return energy(p_leader, t_upload); }

double slot_objective(const SlotCostBreakdown& b, Objective objective) {
  double total = 0.0;
  if (objective == Objective::kTime) {
    for (const auto& f : b.followers) total += f.time.trans;
    return total + b.t_dedup + b.t_upload;
  }
  for (const auto& f : b.followers) total += f.energy.trans;
  return total + b.e_dedup + b.e_upload;
}

int Violations::count() const {
  const auto ft = std::count(follower_time.begin(), follower_time.end(), true);
  const auto fe = std::count(follower_energy.begin(), follower_energy.end(), true);
  return static_cast<int>(ft + fe) + (leader_time ? 1 : 0) + (leader_energy ? 1 : 0);
}

Violations constraint_violations(const SlotCostBreakdown& b, double t_max, double e_max) {
  Violations v;
  v.follower_time.reserve(b.followers.size());
  v.follower_energy.reserve(b.followers.size());
  for (const auto& f : b.followers) {
    v.follower_time.push_back(f.time.trans > t_max);
    v.follower_energy.push_back(f.energy.trans > e_max);
  }
  v.leader_time = b.t_upload + b.t_dedup > t_max;
  v.leader_energy = b.e_upload + b.e_dedup > e_max;
  return v;
}

double reward(double objective_value, const Violations& violations, double lambda_cons, double cap) {
  return -std::min(objective_value, cap) - lambda_cons * violations.count();
}

SlotEvaluation evaluate_slot(const SlotContext& c, std::span<const ActionTriple> actions) {
  const auto n = static_cast<std::size_t>(c.n_followers());
  if (actions.size() != n || c.v2i_gain.size() != n || c.chunk_bits.size() != n || c.beta.size() != n) {
    throw std::invalid_argument("evaluate_slot: one action, gain pair, chunk and beta per follower");
  }
  SlotEvaluation out;
  auto& b = out.cost;
  b.followers.resize(n);
  std::vector<double> deltas(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = actions[i];
    const double r_v2v = channel::v2v_rate(a.p_v2v, c.v2v_gain[i], c.channel);
    const double r_v2i = channel::v2i_rate(a.p_v2i, c.v2i_gain[i], c.channel);
    b.followers[i].time = trans_times(a, c.chunk_bits[i], r_v2v, r_v2i);
    b.followers[i].energy = trans_energies(a, b.followers[i].time.v2v, b.followers[i].time.v2i);
    deltas[i] = a.delta;
  }
  out.volumes = dedup::unique_volume(deltas, c.chunk_bits, c.beta);
  b.t_dedup = dedup::dedup_time(out.volumes.received, c.n_followers(), c.dedup, c.leader_cpu_freq);
  b.e_dedup = dedup::dedup_energy(b.t_dedup, c.dedup, c.leader_cpu_freq);
  const double r_leader = channel::v2i_rate(c.leader_power, c.leader_v2i_gain, c.channel);
  b.t_upload = leader_upload_time(out.volumes.unique, r_leader);
  b.e_upload = leader_upload_energy(c.leader_power, b.t_upload);
  b.f_time = slot_objective(b, Objective::kTime);
  b.f_energy = slot_objective(b, Objective::kEnergy);
  return out;
}

std::vector<double> reward_shares(const SlotContext& c, std::span<const ActionTriple> actions,
                                  const SlotCostBreakdown& b, const Violations& v, Objective objective,
                                  double lambda_cons, double cap) {
  const auto n = static_cast<std::size_t>(c.n_followers());
  if (actions.size() != n || b.followers.size() != n) {
    throw std::invalid_argument("reward_shares: one action and cost entry per follower");
  }
  double received = 0.0;
  double unique = 0.0;
  std::vector<double> r(n), u(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = actions[i].delta * c.chunk_bits[i];
    u[i] = (1.0 - c.beta[i]) * r[i];
    received += r[i];
    unique += u[i];
  }
  const bool time = objective == Objective::kTime;
  const double overhead_time = dedup::dedup_time(0.0, c.n_followers(), c.dedup, c.leader_cpu_freq);
  const double overhead = time ? overhead_time : dedup::dedup_energy(overhead_time, c.dedup, c.leader_cpu_freq);
  const double dedup_total = time ? b.t_dedup : b.e_dedup;
  const double upload_total = time ? b.t_upload : b.e_upload;
  const double per_bit_dedup = received > 0.0 ? (dedup_total - overhead) / received : 0.0;

  std::vector<double> part(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = b.followers[i];
    double p = (time ? f.time.trans : f.energy.trans) + overhead / static_cast<double>(n) + per_bit_dedup * r[i];
    if (u[i] > 0.0) p += std::isinf(upload_total) ? kInf : upload_total * (u[i] / unique);
    part[i] = p;
    total += p;
  }
  if (std::isinf(total)) {
    const auto n_inf = std::count_if(part.begin(), part.end(), [](double x) { return std::isinf(x); });
    for (auto& p : part) p = std::isinf(p) ? cap / static_cast<double>(n_inf) : 0.0;
  } else if (total > cap) {
    for (auto& p : part) p *= cap / total;
  }
  const double leader_violations = (v.leader_time ? 1.0 : 0.0) + (v.leader_energy ? 1.0 : 0.0);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double own = (v.follower_time[i] ? 1.0 : 0.0) + (v.follower_energy[i] ? 1.0 : 0.0);
    out[i] = -part[i] - lambda_cons * (own + leader_violations / static_cast<double>(n));
  }
  return out;
}

std::string csv_header(int n_followers) {
  std::ostringstream out;
  out << 't';
  for (int k = 0; k < n_followers; ++k) {
    for (const char* name : {"t_v2v", "t_v2i", "t_trans", "e_v2v", "e_v2i", "e_trans"}) {
      out << ",f" << k << '_' << name;
    }
  }
  out << ",t_dedup,t_upload,e_dedup,e_upload,f_time,f_energy,violations";
  return out.str();
}

std::string csv_row(int t, const SlotCostBreakdown& b, int violation_count) {
  std::ostringstream out;
  out.precision(17);
  out << t;
  for (const auto& f : b.followers) {
    for (double v : {f.time.v2v, f.time.v2i, f.time.trans, f.energy.v2v, f.energy.v2i, f.energy.trans}) {
      put(out, v);
    }
  }
  for (double v : {b.t_dedup, b.t_upload, b.e_dedup, b.e_upload, b.f_time, b.f_energy}) put(out, v);
  out << ',' << violation_count;
  return out.str();
}

}  // namespace vdo::cost

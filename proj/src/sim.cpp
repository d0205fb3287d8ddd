#include "vdo/sim.hpp"

#include <cmath>
#include <stdexcept>

#include "vdo/channel.hpp"

namespace vdo::sim {

double distance(Point2 a, Point2 b, double floor) {
  return std::max(std::hypot(a.x - b.x, a.y - b.y), floor);
}

Point2 position(const VehicleState& v, const SimConfig& config) {
  return {v.x, config.lane_y[static_cast<std::size_t>(v.lane)]};
}

double distance_to_bs(const VehicleState& v, const SimConfig& config) {
  return distance(position(v, config), config.bs_position, config.channel.ref_distance);
}

double distance_between(const VehicleState& a, const VehicleState& b, const SimConfig& config) {
  return distance(position(a, config), position(b, config), config.channel.ref_distance);
}

FadingDraws draw_fading(int n, Rng& rng, const ChannelParams& params) {
  FadingDraws f;
  f.n = n;
  f.v2i.resize(static_cast<std::size_t>(n));
  f.v2v.assign(static_cast<std::size_t>(n * n), 0.0);
  for (auto& g : f.v2i) g = channel::sample_fading(rng, params);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) f.v2v[static_cast<std::size_t>(i * n + j)] = channel::sample_fading(rng, params);
    }
  }
  return f;
}

EpisodeState init_episode(const SimConfig& config, std::uint64_t seed) {
  config.validate();
  if (config.n_vehicles < 2) throw ConfigError("n_vehicles must be >= 2 (one leader plus followers)");
  EpisodeState s;
  s.rng.seed(seed);
  s.vehicles.resize(static_cast<std::size_t>(config.n_vehicles));
  for (int i = 0; i < config.n_vehicles; ++i) {
    auto& v = s.vehicles[static_cast<std::size_t>(i)];
    v.id = i;
    v.lane = i % config.n_lanes;
    v.x = uniform(s.rng, config.init_x_range.lo, config.init_x_range.hi);
    v.speed = uniform(s.rng, config.speed_range.lo, config.speed_range.hi);
    v.cpu_freq = config.cpu_freq;
  }
  s.fading = draw_fading(config.n_vehicles, s.rng, config.channel);
  s.leader_id = select_leader(s, config, config.zeta);
  return s;
}

int select_leader(const EpisodeState& state, const SimConfig& config, double zeta) {
  const auto& vs = state.vehicles;
  const auto& ch = config.channel;
  int best = -1;
  double best_score = 0.0;
  for (const auto& v : vs) {
    double score = zeta * v.cpu_freq;
    for (const auto& peer : vs) {
      if (peer.id == v.id) continue;
      const double h = channel::v2v_gain(state.fading.link(v.id, peer.id),
                                         distance_between(v, peer, config), ch);
      score += channel::v2v_rate(config.p_max, h, ch);
    }
    const double g = channel::v2i_gain(state.fading.v2i[static_cast<std::size_t>(v.id)],
                                       distance_to_bs(v, config), ch);
    score += channel::v2i_rate(config.p_max, g, ch);
    if (best < 0 || score > best_score) {
      best = v.id;
      best_score = score;
    }
  }
  return best;
}

std::vector<int> followers(const EpisodeState& state) {
  std::vector<int> out;
  out.reserve(state.vehicles.size() - 1);
  for (const auto& v : state.vehicles) {
    if (v.id != state.leader_id) out.push_back(v.id);
  }
  return out;
}

cost::SlotContext slot_context(const EpisodeState& state, const SimConfig& config) {
  const auto& ch = config.channel;
  const auto& leader = state.vehicles[static_cast<std::size_t>(state.leader_id)];
  cost::SlotContext c;
  c.channel = ch;
  c.dedup = config.dedup;
  c.leader_cpu_freq = leader.cpu_freq;
  c.leader_power = config.p_max;
  c.leader_v2i_gain = channel::v2i_gain(state.fading.v2i[static_cast<std::size_t>(leader.id)],
                                        distance_to_bs(leader, config), ch);
  for (const int id : followers(state)) {
    const auto& v = state.vehicles[static_cast<std::size_t>(id)];
    c.v2v_gain.push_back(channel::v2v_gain(state.fading.link(id, leader.id),
                                           distance_between(v, leader, config), ch));
    c.v2i_gain.push_back(channel::v2i_gain(state.fading.v2i[static_cast<std::size_t>(id)],
                                           distance_to_bs(v, config), ch));
    c.chunk_bits.push_back(config.chunk_bits);
    c.beta.push_back(config.beta);
  }
  return c;
}

SlotOutcome advance_slot(EpisodeState& state, const SimConfig& config,
                         std::span<const cost::ActionTriple> actions) {
  if (done(state, config)) throw std::logic_error("advance_slot: episode already finished");
  SlotOutcome out;
  out.context = slot_context(state, config);
  const auto eval = cost::evaluate_slot(out.context, actions);
  out.cost = eval.cost;
  out.violations = cost::constraint_violations(out.cost, config.t_max, config.e_max);
  out.received_bits = eval.volumes.received;
  out.unique_bits = eval.volumes.unique;

  for (auto& v : state.vehicles) v.x += v.speed * config.slot_duration;
  ++state.t;
  state.fading = draw_fading(config.n_vehicles, state.rng, config.channel);
  return out;
}

}  // namespace vdo::sim

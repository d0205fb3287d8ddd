#include "vdo/cli/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "vdo/dedup.hpp"
#include "vdo/sim.hpp"

#ifndef VDO_BUILD_ID
#define VDO_BUILD_ID "unknown"
#endif

namespace vdo::cli {
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kSchemaVersion = 1;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

void write_json(const fs::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

// Collects artifact names and their CSV/JSON schema descriptions for the manifest.
struct Artifacts {
  ordered_json files = ordered_json::object();
  void add(const std::string& name, const std::string& schema) { files[name] = schema; }
};

std::string episodes_csv(const drl::EvalSummary& s) {
  std::ostringstream out;
  out.precision(17);
  out << "episode,time_total,energy_total,violations\n";
  for (int k = 0; k < s.episodes; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    out << k << ',' << s.time_totals[ku] << ',' << s.energy_totals[ku] << ',' << s.violation_totals[ku] << '\n';
  }
  return out.str();
}

std::string delta_trace_csv(const drl::EvalSummary& s) {
  std::ostringstream out;
  out.precision(17);
  out << "t,mean_delta\n";
  for (std::size_t t = 0; t < s.delta_trace.size(); ++t) out << t << ',' << s.delta_trace[t] << '\n';
  return out.str();
}

// Per-slot cost rows of every episode under `policy`.
std::string slots_csv(drl::Policy& policy, const SimConfig& config, int episodes, std::uint64_t seed,
                      cost::Objective objective) {
  std::ostringstream out;
  out << "episode," << cost::csv_header(config.n_vehicles - 1) << '\n';
  for (int ep = 0; ep < episodes; ++ep) {
    auto state = sim::init_episode(config, stream_seed(seed, static_cast<std::uint64_t>(ep)));
    double prev = 0.0;
    while (!sim::done(state, config)) {
      const int t = state.t;
      const auto actions = policy.decide(state, config, prev);
      const auto outcome = sim::advance_slot(state, config, actions);
      out << ep << ',' << cost::csv_row(t, outcome.cost, outcome.violations.count()) << '\n';
      prev = drl::system_reward(outcome, objective, config);
    }
  }
  return out.str();
}

void write_eval(const fs::path& dir, const std::string& suffix, const drl::EvalSummary& s, Artifacts& a) {
  write_json(dir / ("summary" + suffix + ".json"), summary_json(s));
  write_text(dir / ("episodes" + suffix + ".csv"), episodes_csv(s));
  write_text(dir / ("delta_trace" + suffix + ".csv"), delta_trace_csv(s));
  a.add("summary" + suffix + ".json", "evaluation summary v1");
  a.add("episodes" + suffix + ".csv", "episode,time_total,energy_total,violations");
  a.add("delta_trace" + suffix + ".csv", "t,mean_delta");
}

std::vector<drl::EvalSummary> run_baselines(const ExperimentSpec& spec, const SimConfig& sim, const fs::path& dir,
                                            Artifacts& a) {
  const int episodes = spec.episodes.value_or(100);
  std::vector<drl::EvalSummary> out;
  for (const auto kind : spec.baselines) {
    drl::BaselinePolicy policy(kind);
    const std::string suffix = "_" + std::string(drl::to_string(kind));
    auto s = drl::evaluate(policy, sim, episodes, spec.seed, spec.agent.objective);
    write_eval(dir, suffix, s, a);
    write_text(dir / ("slots" + suffix + ".csv"), slots_csv(policy, sim, episodes, spec.seed, spec.agent.objective));
    a.add("slots" + suffix + ".csv", "episode," + cost::csv_header(sim.n_vehicles - 1));
    out.push_back(std::move(s));
  }
  return out;
}

ordered_json model_manifest(const drl::Agent& agent) {
  const auto& c = agent.config();
  ordered_json j;
  j["algorithm"] = std::string(drl::to_string(c.algorithm));
  j["topology"] = std::string(drl::to_string(c.topology));
  j["objective"] = std::string(cost::to_string(c.objective));
  j["obs_dim"] = agent.dims().obs_dim;
  j["action_groups"] = agent.dims().groups;
  j["encoding_dim"] = agent.encoding_dim();
  j["hidden_sizes"] = c.hidden;
  j["layer_norm"] = c.layer_norm;
  j["gamma"] = c.gamma;
  j["batch_size"] = c.batch_size;
  j["warmup"] = c.warmup;
  j["buffer_capacity"] = c.buffer_capacity;
  switch (c.algorithm) {
    case drl::Algorithm::kDqn:
      j["lr"] = c.dqn_lr;
      j["target_period"] = c.dqn_target_period;
      j["clip_norm"] = c.dqn_clip;
      j["epsilon"] = {{"start", c.eps_start}, {"end", c.eps_end}, {"decay", c.eps_decay}};
      break;
    case drl::Algorithm::kDdpg:
      j["actor_lr"] = c.ddpg_actor_lr;
      j["critic_lr"] = c.ddpg_critic_lr;
      j["tau"] = c.ddpg_tau;
      j["clip_norm"] = c.ddpg_clip;
      j["ou"] = {{"theta", c.ou_theta}, {"sigma", c.ou_sigma}, {"scale", c.ou_scale}};
      break;
    case drl::Algorithm::kSac:
      j["actor_lr"] = c.sac_actor_lr;
      j["critic_lr"] = c.sac_critic_lr;
      j["alpha_lr"] = c.sac_alpha_lr;
      j["tau"] = c.sac_tau;
      j["clip_norm"] = c.sac_clip;
      j["initial_alpha"] = c.sac_alpha;
      j["auto_alpha"] = c.sac_auto_alpha;
      break;
  }
  j["checkpoint"] = "model.bin";
  return j;
}

drl::TrainResult run_training(const ExperimentSpec& spec, const SimConfig& sim, drl::AgentConfig agent,
                              const fs::path& dir, Artifacts& a) {
  auto result = drl::train(agent, sim, spec.seed, {dir.string(), nullptr});
  drl::write_training_log((dir / "training_log.csv").string(), result.log);
  std::vector<double> totals;
  for (const auto& r : result.log) totals.push_back(r.objective_total);
  const auto ma = drl::moving_average(totals, agent.moving_average_window);
  std::ostringstream out;
  out.precision(17);
  out << "episode,objective_moving_average\n";
  for (std::size_t k = 0; k < ma.size(); ++k) out << k << ',' << ma[k] << '\n';
  write_text(dir / "moving_average.csv", out.str());
  write_json(dir / "model.json", model_manifest(*result.agent));
  a.add("training_log.csv", drl::training_log_header());
  a.add("moving_average.csv", "episode,objective_moving_average");
  a.add("model.json", "model hyperparameter manifest v1");
  a.add("model.bin", "checkpoint v1");
  return result;
}

std::unique_ptr<drl::Agent> load_model(const fs::path& model_dir, const SimConfig& sim, drl::AgentConfig& agent) {
  SimConfig trained_sim;
  apply_entries(read_key_value_file((model_dir / "resolved.cfg").string()), trained_sim, agent);
  if (trained_sim.n_vehicles != sim.n_vehicles) {
    throw ConfigError("model was trained for n_vehicles = " + std::to_string(trained_sim.n_vehicles) +
                      ", evaluation requests " + std::to_string(sim.n_vehicles));
  }
  Rng rng(0);
  auto model = drl::make_agent(agent, drl::agent_dims(agent, sim), rng);
  nn::load_checkpoint((model_dir / "model.bin").string(), model->checkpoint_entries(), model->checkpoint_scalars());
  return model;
}

void run_oracle(const ExperimentSpec& spec, const fs::path& dir, Artifacts& a) {
  const auto& sim = spec.sim;
  const int episodes = spec.episodes.value_or(10);
  auto grid = spec.grid;
  grid.objective = spec.agent.objective;
  const oracle::Penalty penalty{sim.t_max, sim.e_max, sim.lambda_cons, sim.objective_cap, sim.p_max};
  const int nf = sim.n_vehicles - 1;
  std::ostringstream out;
  out.precision(17);
  out << "episode,t";
  for (int k = 0; k < nf; ++k) out << ",f" << k << "_delta,f" << k << "_p_v2v,f" << k << "_p_v2i";
  out << ",oracle_value,all_base,all_leader,balanced\n";
  double sum_oracle = 0.0;
  std::vector<double> sum_base(3, 0.0);
  int slots = 0;
  const drl::BaselineKind kinds[] = {drl::BaselineKind::kAllBase, drl::BaselineKind::kAllLeader,
                                     drl::BaselineKind::kBalanced};
  for (int ep = 0; ep < episodes; ++ep) {
    auto state = sim::init_episode(sim, stream_seed(spec.seed, static_cast<std::uint64_t>(ep)));
    while (!sim::done(state, sim)) {
      const auto ctx = sim::slot_context(state, sim);
      const auto r = oracle::grid_search_slot(ctx, grid, penalty);
      out << ep << ',' << state.t;
      for (const auto& act : r.actions) out << ',' << act.delta << ',' << act.p_v2v << ',' << act.p_v2i;
      out << ',' << r.value;
      for (int b = 0; b < 3; ++b) {
        const std::vector<cost::ActionTriple> acts(static_cast<std::size_t>(nf),
                                                   drl::baseline_action(kinds[b], sim.p_max));
        const double v = oracle::penalized_value(ctx, acts, grid.objective, penalty);
        sum_base[static_cast<std::size_t>(b)] += v;
        out << ',' << v;
      }
      out << '\n';
      sum_oracle += r.value;
      ++slots;
      sim::advance_slot(state, sim, r.actions);
    }
  }
  write_text(dir / "oracle.csv", out.str());
  ordered_json s;
  s["episodes"] = episodes;
  s["slots"] = slots;
  s["objective"] = std::string(cost::to_string(grid.objective));
  s["delta_levels"] = grid.delta_levels;
  s["power_levels"] = grid.power_levels;
  const double n = slots > 0 ? static_cast<double>(slots) : 1.0;
  s["mean_oracle_value"] = sum_oracle / n;
  s["mean_baseline_value"] = {{"all_base", sum_base[0] / n}, {"all_leader", sum_base[1] / n},
                              {"balanced", sum_base[2] / n}};
  write_json(dir / "summary.json", s);
  a.add("oracle.csv", "episode,t,per-follower (delta,p_v2v,p_v2i),oracle_value,all_base,all_leader,balanced");
  a.add("summary.json", "oracle summary v1");
}

void run_dedup_validate(const ExperimentSpec& spec, const fs::path& dir, Artifacts& a) {
  const std::vector<double> planted{0.1, 0.3, 0.5, 0.7, 0.9};
  const int seeds = spec.episodes.value_or(50);
  const auto rows = dedup_validation(spec.sim.dedup, planted, seeds, 1u << 20, spec.seed);
  std::ostringstream out;
  out.precision(17);
  out << "seed,planted_beta,measured_beta,analytical_unique_bits,byte_level_unique_bits\n";
  double max_beta_err = 0.0, max_du_rel = 0.0;
  for (const auto& r : rows) {
    out << r.seed << ',' << r.planted << ',' << r.measured << ',' << r.analytical_unique_bits << ','
        << r.byte_level_unique_bits << '\n';
    max_beta_err = std::max(max_beta_err, std::abs(r.measured - r.planted));
    max_du_rel = std::max(max_du_rel, std::abs(r.byte_level_unique_bits - r.analytical_unique_bits) /
                                          r.analytical_unique_bits);
  }
  write_text(dir / "dedup_validation.csv", out.str());
  ordered_json s;
  s["seeds"] = seeds;
  s["chunk_bytes"] = 1u << 20;
  s["planted_betas"] = planted;
  s["max_abs_beta_error"] = max_beta_err;
  s["max_rel_unique_bits_error"] = max_du_rel;
  write_json(dir / "summary.json", s);
  a.add("dedup_validation.csv", "seed,planted_beta,measured_beta,analytical_unique_bits,byte_level_unique_bits");
  a.add("summary.json", "dedup validation summary v1");
}

void run_sweep(const ExperimentSpec& spec, const fs::path& dir, Artifacts& a) {
  std::vector<double> values = spec.sweep_values;
  if (values.empty()) {
    values = spec.sweep_axis == SweepAxis::kVehicles ? std::vector<double>{3, 4, 5, 6, 7}
                                                     : std::vector<double>{0.3, 0.4, 0.5, 0.6, 0.7};
  }
  std::ostringstream table;
  table.precision(17);
  table << "cell,policy,time_mean,time_std,energy_mean,energy_std,delta_mean\n";
  for (const double v : values) {
    SimConfig sim = spec.sim;
    std::string cell;
    if (spec.sweep_axis == SweepAxis::kVehicles) {
      sim.n_vehicles = static_cast<int>(v);
      cell = "n_" + std::to_string(sim.n_vehicles);
    } else {
      sim.beta = v;
      cell = "beta_" + format_double(v);
    }
    sim.validate();
    const fs::path cell_dir = dir / cell;
    fs::create_directories(cell_dir);
    Artifacts cell_artifacts;
    std::vector<drl::EvalSummary> summaries;
    if (spec.agent_given) {
      auto agent = spec.agent;
      if (spec.episodes) agent.episodes = *spec.episodes;
      auto result = run_training(spec, sim, agent, cell_dir, cell_artifacts);
      drl::AgentPolicy policy(*result.agent);
      auto s = drl::evaluate(policy, sim, spec.eval_episodes, spec.seed + 1, agent.objective);
      write_eval(cell_dir, "", s, cell_artifacts);
      summaries.push_back(std::move(s));
    } else {
      summaries = run_baselines(spec, sim, cell_dir, cell_artifacts);
    }
    write_text(cell_dir / "resolved.cfg", resolved_config_text(sim, spec.agent));
    for (const auto& s : summaries) {
      table << cell << ',' << s.policy << ',' << s.time_mean << ',' << s.time_std << ',' << s.energy_mean << ','
            << s.energy_std << ',' << s.delta_mean << '\n';
    }
    for (auto it = cell_artifacts.files.begin(); it != cell_artifacts.files.end(); ++it) {
      a.add(cell + "/" + it.key(), it.value().get<std::string>());
    }
  }
  write_text(dir / "sweep.csv", table.str());
  a.add("sweep.csv", "cell,policy,time_mean,time_std,energy_mean,energy_std,delta_mean");
}

}  // namespace

std::string_view to_string(RunKind kind) {
  switch (kind) {
    case RunKind::kTrain: return "train";
    case RunKind::kEval: return "eval";
    case RunKind::kBaseline: return "baseline";
    case RunKind::kOracle: return "oracle";
    case RunKind::kDedupValidate: return "dedup-validate";
    case RunKind::kSweep: return "sweep";
  }
  return "unknown";
}

RunKind parse_run_kind(std::string_view text) {
  for (const auto k : {RunKind::kTrain, RunKind::kEval, RunKind::kBaseline, RunKind::kOracle,
                       RunKind::kDedupValidate, RunKind::kSweep}) {
    if (text == to_string(k)) return k;
  }
  throw ConfigError("unknown run kind '" + std::string(text) + "'");
}

ConfigRegistry make_registry(SimConfig& sim, drl::AgentConfig& agent) {
  ConfigRegistry r;
  register_sim_config(r, sim);
  register_agent_config(r, agent);
  return r;
}

bool apply_entries(const std::vector<KeyValueEntry>& entries, SimConfig& sim, drl::AgentConfig& agent) {
  SimConfig sim_keys_probe;
  ConfigRegistry sim_only;
  register_sim_config(sim_only, sim_keys_probe);
  const auto registry = make_registry(sim, agent);
  bool agent_key = false;
  for (const auto& e : entries) {
    if (!registry.contains(e.key)) throw ConfigError("unknown key '" + e.key + "'", e.line);
    try {
      registry.set(e.key, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError(err.what(), e.line);
    }
    if (!sim_only.contains(e.key)) agent_key = true;
  }
  return agent_key;
}

ordered_json resolved_config(const SimConfig& sim, const drl::AgentConfig& agent) {
  SimConfig s = sim;
  drl::AgentConfig g = agent;
  const auto registry = make_registry(s, g);
  ordered_json j = ordered_json::object();
  for (const auto& key : registry.keys()) j[key] = registry.get(key);
  return j;
}

std::string resolved_config_text(const SimConfig& sim, const drl::AgentConfig& agent) {
  SimConfig s = sim;
  drl::AgentConfig g = agent;
  const auto registry = make_registry(s, g);
  std::string out;
  for (const auto& key : registry.keys()) out += key + " = " + registry.get(key) + "\n";
  return out;
}

ordered_json summary_json(const drl::EvalSummary& s) {
  ordered_json j;
  j["policy"] = s.policy;
  j["episodes"] = s.episodes;
  if (s.episodes == 0) {
    j["time"] = nullptr;
    j["energy"] = nullptr;
    j["violations_mean"] = nullptr;
    j["action"] = nullptr;
    j["delta_trace"] = ordered_json::array();
    return j;
  }
  j["time"] = {{"mean", s.time_mean}, {"std", s.time_std}};
  j["energy"] = {{"mean", s.energy_mean}, {"std", s.energy_std}};
  j["violations_mean"] = s.violations_mean;
  j["action"] = {{"delta_mean", s.delta_mean},
                 {"delta_std", s.delta_std},
                 {"p_v2v_over_pmax_mean", s.p_v2v_mean},
                 {"p_v2i_over_pmax_mean", s.p_v2i_mean}};
  j["delta_trace"] = s.delta_trace;
  return j;
}

std::vector<DedupValidationRow> dedup_validation(const DedupParams& params, const std::vector<double>& planted,
                                                 int n_seeds, std::size_t chunk_bytes, std::uint64_t master_seed) {
  std::vector<DedupValidationRow> rows;
  const double bits = 8.0 * static_cast<double>(chunk_bytes);
  for (int s = 0; s < n_seeds; ++s) {
    const auto seed = stream_seed(master_seed, static_cast<std::uint64_t>(s));
    Rng rng(seed);
    dedup::FingerprintStore store(true);
    dedup::Bytes first(chunk_bytes);
    for (auto& b : first) b = static_cast<std::uint8_t>(rng() >> 56);
    dedup::redundancy_ratio(dedup::cdc_split(first, params), store);
    for (const double p : planted) {
      const auto payload = dedup::synth_chunk(p, chunk_bytes, store, rng, params);
      auto probe = store;
      const double measured = dedup::redundancy_ratio(dedup::cdc_split(payload, params), probe);
      rows.push_back({seed, p, measured, (1.0 - p) * bits, (1.0 - measured) * bits});
    }
  }
  return rows;
}

std::string build_id() { return VDO_BUILD_ID; }

void run_or_throw(const ExperimentSpec& spec) {
  if (spec.output_dir.empty()) throw ConfigError("--out is required");
  spec.sim.validate();
  spec.agent.validate();
  const fs::path out_dir(spec.output_dir);
  fs::path staging = out_dir;
  staging += ".partial";
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    Artifacts a;
    SimConfig sim = spec.sim;
    drl::AgentConfig agent = spec.agent;
    switch (spec.kind) {
      case RunKind::kTrain: {
        if (spec.episodes) agent.episodes = *spec.episodes;
        run_training(spec, sim, agent, staging, a);
        break;
      }
      case RunKind::kEval: {
        if (spec.model_dir.empty()) throw ConfigError("eval needs --model <directory written by train>");
        auto model = load_model(spec.model_dir, sim, agent);
        drl::AgentPolicy policy(*model);
        const auto s = drl::evaluate(policy, sim, spec.episodes.value_or(100), spec.seed, agent.objective);
        write_eval(staging, "", s, a);
        break;
      }
      case RunKind::kBaseline: run_baselines(spec, sim, staging, a); break;
      case RunKind::kOracle: run_oracle(spec, staging, a); break;
      case RunKind::kDedupValidate: run_dedup_validate(spec, staging, a); break;
      case RunKind::kSweep: run_sweep(spec, staging, a); break;
    }
    write_text(staging / "resolved.cfg", resolved_config_text(sim, agent));
    a.add("resolved.cfg", "key = value");
    ordered_json m;
    m["schema_version"] = kSchemaVersion;
    m["build"] = build_id();
    m["run_kind"] = std::string(to_string(spec.kind));
    m["seed"] = spec.seed;
    m["episodes"] = spec.episodes ? ordered_json(*spec.episodes) : ordered_json(nullptr);
    m["command_line"] = spec.command_line;
    m["config"] = resolved_config(sim, agent);
    m["artifacts"] = a.files;
    write_json(staging / "manifest.json", m);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  fs::create_directories(out_dir);
  for (const auto& entry : fs::directory_iterator(staging)) {
    const auto target = out_dir / entry.path().filename();
    fs::remove_all(target);
    fs::rename(entry.path(), target);
  }
  fs::remove_all(staging);
}

int run(const ExperimentSpec& spec) {
  try {
    run_or_throw(spec);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace vdo::cli

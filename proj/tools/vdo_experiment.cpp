#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "vdo/cli/experiment.hpp"

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 1;
  std::optional<int> episodes;
  std::string out;
  std::string algo;
  std::string topology;
  std::string objective;
  std::string model;
  std::vector<std::string> baselines;
  std::string axis = "n";
  std::vector<double> values;
  int delta_levels = 11;
  int power_levels = 5;
  int eval_episodes = 100;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Flat key = value configuration file");
  cmd->add_option("--seed", f.seed, "Master seed")->capture_default_str();
  cmd->add_option("--episodes", f.episodes, "Episode count (seed count for dedup-validate)");
  cmd->add_option("--out", f.out, "Output directory")->required();
  cmd->add_option("--algo", f.algo, "dqn | ddpg | sac")->check(CLI::IsMember({"dqn", "ddpg", "sac"}));
  cmd->add_option("--topology", f.topology, "centralized | decentralized")
      ->check(CLI::IsMember({"centralized", "decentralized"}));
  cmd->add_option("--objective", f.objective, "time | energy")->check(CLI::IsMember({"time", "energy"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vehicular offloading with leader deduplication: experiment runner"};
  app.require_subcommand(1);
  Flags f;
  std::vector<std::pair<CLI::App*, vdo::cli::RunKind>> commands;
  const std::pair<const char*, const char*> names[] = {
      {"train", "Train an agent"},
      {"eval", "Evaluate a trained agent"},
      {"baseline", "Evaluate the baseline policies"},
      {"oracle", "Per-slot grid-search oracle"},
      {"dedup-validate", "Byte-level deduplication validation"},
      {"sweep", "Sweep cluster size or redundancy"},
  };
  for (const auto& [name, help] : names) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, f);
    commands.emplace_back(cmd, vdo::cli::parse_run_kind(name));
  }
  app.get_subcommand("eval")->add_option("--model", f.model, "Directory written by train")->required();
  for (const char* name : {"baseline", "sweep"}) {
    app.get_subcommand(name)
        ->add_option("--baseline", f.baselines, "all_base | all_leader | balanced (repeatable)")
        ->check(CLI::IsMember({"all_base", "all_leader", "balanced"}));
  }
  auto* sweep = app.get_subcommand("sweep");
  sweep->add_option("--axis", f.axis, "n (cluster size) | beta")->check(CLI::IsMember({"n", "beta"}))
      ->capture_default_str();
  sweep->add_option("--values", f.values, "Cell values (default 3..7 or 0.3..0.7)");
  sweep->add_option("--eval-episodes", f.eval_episodes, "Evaluation episodes per trained cell")
      ->capture_default_str();
  auto* oracle = app.get_subcommand("oracle");
  oracle->add_option("--delta-levels", f.delta_levels, "Offloading-fraction grid levels")->capture_default_str();
  oracle->add_option("--power-levels", f.power_levels, "Power grid levels")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  vdo::cli::ExperimentSpec spec;
  for (const auto& [cmd, kind] : commands) {
    if (cmd->parsed()) spec.kind = kind;
  }
  spec.command_line.assign(argv, argv + argc);
  try {
    if (!f.config.empty()) {
      spec.agent_given = vdo::cli::apply_entries(vdo::read_key_value_file(f.config), spec.sim, spec.agent);
    }
    if (!f.algo.empty()) {
      spec.agent.algorithm = vdo::drl::parse_algorithm(f.algo);
      spec.agent_given = true;
    }
    if (!f.topology.empty()) spec.agent.topology = vdo::drl::parse_topology(f.topology);
    if (!f.objective.empty()) spec.agent.objective = vdo::cost::parse_objective(f.objective);
  } catch (const vdo::ConfigError& e) {
    std::cerr << "config error: " << (f.config.empty() ? "" : f.config + ": ") << e.what() << '\n';
    return 2;
  }
  spec.seed = f.seed;
  spec.episodes = f.episodes;
  spec.output_dir = f.out;
  spec.model_dir = f.model;
  if (!f.baselines.empty()) {
    spec.baselines.clear();
    for (const auto& b : f.baselines) spec.baselines.push_back(vdo::drl::parse_baseline(b));
  }
  spec.sweep_axis = f.axis == "beta" ? vdo::cli::SweepAxis::kBeta : vdo::cli::SweepAxis::kVehicles;
  spec.sweep_values = f.values;
  spec.eval_episodes = f.eval_episodes;
  spec.grid.delta_levels = f.delta_levels;
  spec.grid.power_levels = f.power_levels;
  return vdo::cli::run(spec);
}

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vdo/config.hpp"
#include "vdo/drl/agents.hpp"
#include "vdo/drl/presets.hpp"
#include "vdo/drl/trainer.hpp"
#include "vdo/oracle.hpp"

namespace vdo::cli {

enum class RunKind { kTrain, kEval, kBaseline, kOracle, kDedupValidate, kSweep };

std::string_view to_string(RunKind kind);
RunKind parse_run_kind(std::string_view text);

enum class SweepAxis { kVehicles, kBeta };

struct ExperimentSpec {
  RunKind kind = RunKind::kBaseline;
  SimConfig sim;
  drl::AgentConfig agent;
  bool agent_given = false;  // --algo supplied or agent keys present
  std::uint64_t seed = 1;
  std::optional<int> episodes;  // evaluation/baseline episodes, or training episodes for train
  std::string output_dir;
  std::string model_dir;                        // eval: directory written by train
  std::vector<drl::BaselineKind> baselines{drl::BaselineKind::kAllBase, drl::BaselineKind::kAllLeader,
                                            drl::BaselineKind::kBalanced};
  SweepAxis sweep_axis = SweepAxis::kVehicles;
  std::vector<double> sweep_values;             // empty selects 3..7 or 0.3..0.7
  oracle::GridSpec grid;
  int eval_episodes = 100;                      // evaluation after training in sweeps
  std::vector<std::string> command_line;
};

// Flat registry over every simulation and agent key.
ConfigRegistry make_registry(SimConfig& sim, drl::AgentConfig& agent);

// Applies `key = value` entries; unknown keys and bad values raise ConfigError
// carrying the entry's line number. Returns true if any agent key was set.
bool apply_entries(const std::vector<KeyValueEntry>& entries, SimConfig& sim, drl::AgentConfig& agent);

// Every key with its resolved value.
nlohmann::ordered_json resolved_config(const SimConfig& sim, const drl::AgentConfig& agent);
std::string resolved_config_text(const SimConfig& sim, const drl::AgentConfig& agent);

nlohmann::ordered_json summary_json(const drl::EvalSummary& summary);

struct DedupValidationRow {
  std::uint64_t seed = 0;
  double planted = 0.0;
  double measured = 0.0;
  double analytical_unique_bits = 0.0;
  double byte_level_unique_bits = 0.0;
};

// For each seed, fills a store from one random chunk, synthesises a chunk of
// `chunk_bytes` with the planted redundancy, and measures it byte-for-byte.
// The D^u columns price offloading the whole chunk (delta = 1).
std::vector<DedupValidationRow> dedup_validation(const DedupParams& params, const std::vector<double>& planted,
                                                 int n_seeds, std::size_t chunk_bytes, std::uint64_t master_seed);

// Executes the run and writes its artifacts into spec.output_dir, staging
// them first so a failed run leaves no partial output. Returns the process
// exit status; errors are reported on stderr.
int run(const ExperimentSpec& spec);

// Same as run() but throws instead of reporting.
void run_or_throw(const ExperimentSpec& spec);

// Identifier of the source tree the binary was built from.
std::string build_id();

}  // namespace vdo::cli

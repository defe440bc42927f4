#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "anil/anil.hpp"
#include "anil/probes.hpp"
#include "anil/task.hpp"

namespace anil {

// The five canned experiments. Each produces a deterministic results.csv, a
// manifest.json holding the fully normalized config plus a content hash of
// the results, and a human-readable summary.txt. Convergence runs also emit
// one telemetry CSV per run under runs/ (those carry wall-clock columns and
// are not part of the replay contract).
enum class Experiment {
  kGradCheck,          // exact meta-gradient vs. central finite differences
  kContraction,        // adapted-iterate contraction bound on sampled task pairs
  kSmoothnessScaling,  // block smoothness estimates vs. closed-form bounds
  kConvergenceSweep,   // iterations/ops to a population target across depths
  kComplexityCompare,  // split adaptation vs. full-parameter adaptation cost
};

const char* to_string(Experiment e);

// Exit codes shared by run_experiment and the CLI.
inline constexpr int kExitPass = 0;
inline constexpr int kExitTrendFail = 1;    // checks evaluated and failed
inline constexpr int kExitConfigError = 2;  // invalid config or inputs
inline constexpr int kExitDivergence = 3;   // a run diverged or left the region

struct ExperimentConfig {
  Experiment experiment = Experiment::kGradCheck;
  std::string output_dir = "out";
  TaskFamilySpec family;
  OuterConfig outer;

  // grad_check / contraction
  int num_tasks = 100;                       // sampled tasks (or task pairs)
  double fd_step = 1e-5;                     // finite-difference step
  std::vector<int> check_depths = {0, 1, 2, 5, 10};
  int contraction_steps = 10;

  // smoothness_scaling
  std::vector<int> probe_depths = {1, 2, 3, 5, 7, 10};
  int probe_pool_size = 32;
  int probe_pairs = 64;
  double probe_pair_scale = 1e-2;
  double probe_alpha = 0.0;                  // 0 uses the family default

  // convergence_sweep / complexity_compare
  std::vector<int> n_sweep = {1, 3, 5, 7, 10};
  double epsilon_target = 0.0;
  int eval_pool_size = 256;
};

// Parses and fully validates an experiment config. Unknown fields, wrong
// types and invalid values are all rejected with a ConfigError naming the
// offending field path.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig parse_config_file(const std::string& path);

// Fully normalized form (every field explicit); parse_config inverts it.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// Built-in configs for the two standard families.
ExperimentConfig default_config(Experiment e, Geometry g);

struct ExperimentOutputs {
  int exit_code = kExitPass;
  std::string results_csv;   // deterministic; replay compares these bytes
  std::string summary;
  // extra (relative path, content) pairs, e.g. per-run telemetry CSVs
  std::vector<std::pair<std::string, std::string>> extra_files;
};

// Runs the experiment in memory. Deterministic for fixed config except for
// wall-clock columns in extra_files. ConfigError propagates to the caller;
// unexpected divergence is reported via exit_code.
ExperimentOutputs compute_experiment(const ExperimentConfig& cfg);

struct ExperimentResult {
  int exit_code = kExitPass;
  std::string output_dir;
  std::string summary;
};

// compute_experiment plus writing output_dir/{results.csv, manifest.json,
// summary.txt} and any extra files. ConfigError is caught and mapped to
// kExitConfigError with the message in summary.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct ReplayReport {
  bool identical = false;
  std::string detail;
};

// Re-runs the experiment pinned in a manifest and compares the regenerated
// results.csv byte-for-byte against the copy next to the manifest (and its
// recorded hash).
ReplayReport replay_from_manifest(const std::string& manifest_path);

}  // namespace anil

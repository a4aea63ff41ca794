#pragma once

// Experiment orchestration behind the comm-arena command line: configuration
// resolution, seeded multi-run campaigns, artifact writing and the gradient
// verification suite.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "comm_arena/diffnet.hpp"
#include "comm_arena/env.hpp"
#include "comm_arena/error.hpp"
#include "comm_arena/metrics.hpp"
#include "comm_arena/training.hpp"

namespace comm_arena::experiment {

// Bad command line or config file; maps to exit status 2.
class UsageError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

struct ExperimentConfig {
  training::TrainingConfig training;
  env::EnvConfig env;
  int runs = 5;
  std::uint64_t seed = 0;  // run i uses seed + i
  std::filesystem::path out = "results";
  int jobs = 1;
  int eval_episodes = 200;
  double ewma_alpha = 0.0005;
  int trajectory_episodes = 5;
  int resume_interval = 50;

  env::Mode mode() const { return training.mode; }
  std::uint64_t run_seed(int run) const { return seed + static_cast<std::uint64_t>(run); }
};

using Override = std::pair<std::string, std::string>;

// key=value lines ('#' comments, blank lines allowed). Throws UsageError.
std::vector<Override> read_config_file(const std::filesystem::path& path);

// Defaults, then file values, then overrides, in order. Unknown keys and
// malformed numbers throw UsageError naming the key.
ExperimentConfig parse_config(const std::optional<std::filesystem::path>& file,
                              const std::vector<Override>& overrides);

// All recognised keys, sorted.
std::vector<std::string> config_keys();

// Fully resolved configuration as sorted key=value lines.
std::string resolved_config_text(const ExperimentConfig& config);

// Runs every seed, writes run<i>.csv, run<i>/ checkpoints and trajectories,
// summary.json, curves.csv, curves.svg and (comm modes) confusion.csv.
// Returns 0 on success, 1 if a run failed (naming its seed on `log`).
int run_experiment(const ExperimentConfig& config, std::ostream& log);

// Re-derives summary/curve/confusion artifacts from existing run logs under
// `dir`: the directory itself and any immediate subdirectory that carries a
// resolved_config.txt. Returns the configurations found.
std::vector<metrics::ConfigurationResult> analyze(const std::filesystem::path& dir,
                                                  std::ostream& log);

// ---- Gradient verification ----------------------------------------------

struct GradcheckEntry {
  std::string name;
  diffnet::GradCheckReport report;
};

struct GradcheckSuite {
  std::vector<GradcheckEntry> entries;
  double seconds = 0.0;
  bool passed() const;
};

// Every network shape the trainer builds, checked at h = 1e-5 against
// relative tolerance 1e-4 on random parameters and inputs.
GradcheckSuite run_gradcheck_suite(std::uint64_t seed, double h = 1e-5, double tol = 1e-4);

}  // namespace comm_arena::experiment

#pragma once

// Post-hoc analysis of finished runs: curve smoothing, reward/peak summary
// across runs, and the message-versus-target confusion matrix.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "comm_arena/diffnet.hpp"
#include "comm_arena/env.hpp"
#include "comm_arena/run_log.hpp"

namespace comm_arena::training {
struct Transition;
}

namespace comm_arena::metrics {

// s0 = x0, s_t = alpha x_t + (1 - alpha) s_{t-1}.
std::vector<double> ewma(std::span<const double> series, double alpha);

// Raw per-epoch mean predator reward.
std::vector<double> predator_series(const RunLog& log);

// Max of the raw per-epoch mean predator reward.
double peak_performance(const RunLog& log);

struct SummaryStats {
  double average_reward = 0.0;
  // Mean over epochs of the cross-run population standard deviation.
  double average_std = 0.0;
  double average_peak = 0.0;
  // Population standard deviation of per-run peaks.
  double peak_std = 0.0;
  std::vector<double> run_means;
  std::vector<double> run_peaks;
};

// Needs >= 2 logs of equal, non-zero length.
SummaryStats aggregate_runs(std::span<const RunLog> logs);

// Messages above zero map to symbol 1, everything else to symbol 0.
inline int discretize_message(double message) { return message > 0.0 ? 1 : 0; }

struct ConfusionMatrix {
  // counts[teammate target][symbol]
  std::array<std::array<std::int64_t, 2>, 2> counts{};

  void add(int teammate_target, double message);
  std::int64_t total() const;
  // Best of the two symbol-to-target labelings; 0.5 for an empty matrix.
  double accuracy() const;
};

// Every predator message in the transitions, keyed by the target of the
// teammate it describes.
ConfusionMatrix confusion_from_transitions(std::span<const training::Transition> transitions);

struct CommCheckpoints {
  diffnet::DenseNet cnet;
  diffnet::DenseNet anet;
  diffnet::DenseNet prey;
};

// Loads cnet.json/anet.json/prey.json. Throws RejectedCall if the directory
// holds non-communicating checkpoints.
CommCheckpoints load_comm_checkpoints(const std::filesystem::path& dir);

// Greedy rollouts; both predators contribute every step.
ConfusionMatrix build_confusion_matrix(const CommCheckpoints& checkpoints,
                                       const env::EnvConfig& env, int episodes,
                                       std::uint64_t seed);

// ---- Artifacts ------------------------------------------------------------

struct ConfigurationResult {
  std::string name;
  std::vector<RunLog> logs;
  std::vector<std::uint64_t> seeds;
  // Per run, comm modes only.
  std::vector<ConfusionMatrix> confusion;
};

// Summary of one configuration; a single run gets zero spreads.
SummaryStats summarize(const ConfigurationResult& result);

// Index of the run with the highest peak.
std::size_t best_run(const ConfigurationResult& result);

void write_summary_json(const std::filesystem::path& path,
                        std::span<const ConfigurationResult> results);
void write_confusion_csv(const std::filesystem::path& path, const ConfigurationResult& result);
void write_curves_csv(const std::filesystem::path& path,
                      std::span<const ConfigurationResult> results, double alpha);
void write_curves_svg(const std::filesystem::path& path,
                      std::span<const ConfigurationResult> results, double alpha);

}  // namespace comm_arena::metrics

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace comm_arena {

struct EpochRecord {
  int epoch = 0;
  double mean_predator_reward = 0.0;
  double mean_prey_reward = 0.0;
  double epsilon = 0.0;
  // Mean minibatch loss; empty when the learner is absent in the mode.
  std::optional<double> dial_loss;
  std::optional<double> iql_loss_prey;
  std::optional<double> iql_loss_pred;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

// Per-epoch records, epochs contiguous from 0.
using RunLog = std::vector<EpochRecord>;

// CSV columns: epoch,mean_predator_reward,mean_prey_reward,epsilon,
// dial_loss,iql_loss_prey,iql_loss_pred. Absent losses are empty fields.
void write_run_log_csv(std::ostream& out, const RunLog& log);
void write_run_log_csv(const std::filesystem::path& path, const RunLog& log);

// Throws InvalidInput on malformed rows or non-contiguous epochs.
RunLog read_run_log_csv(std::istream& in);
RunLog read_run_log_csv(const std::filesystem::path& path);

}  // namespace comm_arena

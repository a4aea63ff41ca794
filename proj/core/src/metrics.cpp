#include "comm_arena/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "comm_arena/error.hpp"
#include "comm_arena/training.hpp"

namespace comm_arena::metrics {

namespace {

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_std(std::span<const double> v) {
  const double m = mean(v);
  double sq = 0.0;
  for (double x : v) sq += (x - m) * (x - m);
  return std::sqrt(sq / static_cast<double>(v.size()));
}

// Per-epoch mean over runs; runs may differ in length.
std::vector<double> mean_curve(const ConfigurationResult& result) {
  std::size_t longest = 0;
  for (const auto& log : result.logs) longest = std::max(longest, log.size());
  std::vector<double> curve;
  for (std::size_t e = 0; e < longest; ++e) {
    double sum = 0.0;
    int n = 0;
    for (const auto& log : result.logs) {
      if (e < log.size()) {
        sum += log[e].mean_predator_reward;
        ++n;
      }
    }
    curve.push_back(sum / n);
  }
  return curve;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

std::vector<double> ewma(std::span<const double> series, double alpha) {
  if (series.empty()) throw InvalidInput("ewma: empty series");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidInput("ewma: alpha must lie in (0, 1]");
  std::vector<double> out;
  out.reserve(series.size());
  double s = series.front();
  out.push_back(s);
  for (std::size_t t = 1; t < series.size(); ++t) {
    s += alpha * (series[t] - s);  // same recurrence; exact on constant input
    out.push_back(s);
  }
  return out;
}

std::vector<double> predator_series(const RunLog& log) {
  std::vector<double> out;
  out.reserve(log.size());
  for (const auto& r : log) out.push_back(r.mean_predator_reward);
  return out;
}

double peak_performance(const RunLog& log) {
  if (log.empty()) throw InvalidInput("peak_performance: empty log");
  const auto series = predator_series(log);
  return *std::max_element(series.begin(), series.end());
}

SummaryStats aggregate_runs(std::span<const RunLog> logs) {
  if (logs.size() < 2) throw InvalidInput("aggregate_runs: need at least 2 runs");
  const std::size_t epochs = logs.front().size();
  if (epochs == 0) throw InvalidInput("aggregate_runs: empty run log");
  for (const auto& log : logs) {
    if (log.size() != epochs) {
      throw InvalidInput("aggregate_runs: run lengths differ (" + std::to_string(log.size()) +
                         " vs " + std::to_string(epochs) + ")");
    }
  }
  SummaryStats stats;
  for (const auto& log : logs) {
    const auto series = predator_series(log);
    stats.run_means.push_back(mean(series));
    stats.run_peaks.push_back(peak_performance(log));
  }
  double std_sum = 0.0;
  std::vector<double> column(logs.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    for (std::size_t r = 0; r < logs.size(); ++r) column[r] = logs[r][e].mean_predator_reward;
    std_sum += population_std(column);
  }
  stats.average_reward = mean(stats.run_means);
  stats.average_std = std_sum / static_cast<double>(epochs);
  stats.average_peak = mean(stats.run_peaks);
  stats.peak_std = population_std(stats.run_peaks);
  return stats;
}

void ConfusionMatrix::add(int teammate_target, double message) {
  if (teammate_target < 0 || teammate_target > 1) {
    throw InvalidInput("confusion matrix: target must be 0 or 1");
  }
  ++counts[teammate_target][discretize_message(message)];
}

std::int64_t ConfusionMatrix::total() const {
  return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
}

double ConfusionMatrix::accuracy() const {
  const auto n = total();
  if (n == 0) return 0.5;
  const auto diagonal = counts[0][0] + counts[1][1];
  const auto anti = counts[0][1] + counts[1][0];
  return static_cast<double>(std::max(diagonal, anti)) / static_cast<double>(n);
}

ConfusionMatrix confusion_from_transitions(std::span<const training::Transition> transitions) {
  ConfusionMatrix cm;
  for (const auto& t : transitions) {
    for (int i = 0; i < env::kTeamSize; ++i) {
      // Predator i observes, and so describes, its teammate's target.
      cm.add(t.targets[1 - i], t.messages[i]);
    }
  }
  return cm;
}

CommCheckpoints load_comm_checkpoints(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "cnet.json") || !std::filesystem::exists(dir / "anet.json")) {
    throw RejectedCall("confusion matrix needs communicating checkpoints; " + dir.string() +
                       " has no cnet.json/anet.json");
  }
  return {diffnet::load_checkpoint(dir / "cnet.json"), diffnet::load_checkpoint(dir / "anet.json"),
          diffnet::load_checkpoint(dir / "prey.json")};
}

ConfusionMatrix build_confusion_matrix(const CommCheckpoints& checkpoints,
                                       const env::EnvConfig& env, int episodes,
                                       std::uint64_t seed) {
  if (!env::is_comm(env.mode)) {
    throw RejectedCall("build_confusion_matrix: mode " + std::string(env::to_string(env.mode)) +
                       " has no communication");
  }
  if (episodes < 1) throw InvalidInput("build_confusion_matrix: episodes must be >= 1");
  agents::validate(agents::CNet{checkpoints.cnet});
  agents::validate(agents::ANet{checkpoints.anet});
  if (checkpoints.prey.input_size() != env::observation_size(env.mode, env::prey(0))) {
    throw InvalidInput("build_confusion_matrix: prey checkpoint does not match mode");
  }
  training::TrainerState policy;
  policy.config.mode = env.mode;
  policy.env = env;
  policy.cnet = training::Learner::create(checkpoints.cnet, {});
  policy.anet = training::Learner::create(checkpoints.anet, {});
  policy.prey = training::Learner::create(checkpoints.prey, {});
  SeedStream rng(seed);
  const auto rollout = training::run_episodes(policy, episodes, 0.0, rng);
  return confusion_from_transitions(rollout.transitions);
}

SummaryStats summarize(const ConfigurationResult& result) {
  if (result.logs.empty()) throw InvalidInput("summarize: no runs");
  if (result.logs.size() >= 2) return aggregate_runs(result.logs);
  SummaryStats stats;
  const auto series = predator_series(result.logs.front());
  if (series.empty()) throw InvalidInput("summarize: empty run log");
  stats.run_means = {mean(series)};
  stats.run_peaks = {peak_performance(result.logs.front())};
  stats.average_reward = stats.run_means.front();
  stats.average_peak = stats.run_peaks.front();
  return stats;
}

std::size_t best_run(const ConfigurationResult& result) {
  std::size_t best = 0;
  double best_peak = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < result.logs.size(); ++r) {
    const double p = peak_performance(result.logs[r]);
    if (p > best_peak) {
      best_peak = p;
      best = r;
    }
  }
  return best;
}

void write_summary_json(const std::filesystem::path& path,
                        std::span<const ConfigurationResult> results) {
  nlohmann::json root = nlohmann::json::object();
  for (const auto& result : results) {
    const auto stats = summarize(result);
    nlohmann::json entry = {
        {"runs", result.logs.size()},
        {"epochs", result.logs.front().size()},
        {"seeds", result.seeds},
        {"average_reward", stats.average_reward},
        {"average_std", stats.average_std},
        {"average_peak", stats.average_peak},
        {"peak_std", stats.peak_std},
        {"run_means", stats.run_means},
        {"run_peaks", stats.run_peaks},
        {"best_run", best_run(result)},
        {"std_formula",
         "average_std = mean over epochs of the population std across runs of the "
         "per-epoch mean predator reward; peak_std = population std of per-run peaks; "
         "peaks use raw (unsmoothed) per-epoch means"},
    };
    if (!result.confusion.empty()) {
      nlohmann::json accuracies = nlohmann::json::array();
      for (const auto& cm : result.confusion) accuracies.push_back(cm.accuracy());
      entry["protocol_accuracy"] = std::move(accuracies);
    }
    root[result.name] = std::move(entry);
  }
  auto out = open_for_write(path);
  out << root.dump(2) << '\n';
}

void write_confusion_csv(const std::filesystem::path& path, const ConfigurationResult& result) {
  auto out = open_for_write(path);
  out << "run,seed,teammate_target,symbol0,symbol1,accuracy\n";
  for (std::size_t r = 0; r < result.confusion.size(); ++r) {
    const auto& cm = result.confusion[r];
    const auto seed = r < result.seeds.size() ? result.seeds[r] : 0;
    for (int target = 0; target < 2; ++target) {
      out << fmt::format("{},{},prey{},{},{},{}\n", r, seed, target, cm.counts[target][0],
                         cm.counts[target][1], cm.accuracy());
    }
  }
}

void write_curves_csv(const std::filesystem::path& path,
                      std::span<const ConfigurationResult> results, double alpha) {
  std::vector<std::vector<double>> raw, smooth;
  std::size_t longest = 0;
  for (const auto& result : results) {
    raw.push_back(mean_curve(result));
    smooth.push_back(ewma(raw.back(), alpha));
    longest = std::max(longest, raw.back().size());
  }
  auto out = open_for_write(path);
  out << "epoch";
  for (const auto& result : results) out << ',' << result.name << "_raw," << result.name << "_smoothed";
  out << '\n';
  for (std::size_t e = 0; e < longest; ++e) {
    out << e;
    for (std::size_t c = 0; c < results.size(); ++c) {
      if (e < raw[c].size()) {
        out << fmt::format(",{},{}", raw[c][e], smooth[c][e]);
      } else {
        out << ",,";
      }
    }
    out << '\n';
  }
}

void write_curves_svg(const std::filesystem::path& path,
                      std::span<const ConfigurationResult> results, double alpha) {
  constexpr double kWidth = 800, kHeight = 480, kLeft = 70, kRight = 170, kTop = 30,
                   kBottom = 50;
  static constexpr std::array<const char*, 6> kColors{"#1f77b4", "#d62728", "#2ca02c",
                                                      "#ff7f0e", "#9467bd", "#8c564b"};
  std::vector<std::vector<double>> raw, smooth;
  std::size_t longest = 1;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& result : results) {
    raw.push_back(mean_curve(result));
    smooth.push_back(ewma(raw.back(), alpha));
    longest = std::max(longest, raw.back().size());
    for (double v : raw.back()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) {
    hi = lo + 1.0;
  }
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto x_of = [&](std::size_t e) {
    return kLeft + plot_w * (longest > 1 ? static_cast<double>(e) / (longest - 1) : 0.0);
  };
  auto y_of = [&](double v) { return kTop + plot_h * (hi - v) / (hi - lo); };

  auto out = open_for_write(path);
  out << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      kWidth, kHeight);
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
      kLeft, kTop, plot_w, plot_h);
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = lo + (hi - lo) * tick / 4.0;
    out << fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.1f}</text>\n",
                       kLeft - 6, y_of(v) + 4, v);
    const auto e = static_cast<std::size_t>((longest - 1) * tick / 4);
    out << fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                       x_of(e), kTop + plot_h + 18, e);
  }
  out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">epoch</text>\n",
                     kLeft + plot_w / 2, kHeight - 10);
  out << fmt::format(
      "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">"
      "mean predator reward per episode</text>\n",
      kTop + plot_h / 2, kTop + plot_h / 2);
  for (std::size_t c = 0; c < results.size(); ++c) {
    const char* color = kColors[c % kColors.size()];
    auto polyline = [&](const std::vector<double>& series, const char* extra) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" " << extra << " points=\"";
      for (std::size_t e = 0; e < series.size(); ++e) {
        out << fmt::format("{:.2f},{:.2f} ", x_of(e), y_of(series[e]));
      }
      out << "\"/>\n";
    };
    polyline(raw[c], "stroke-opacity=\"0.3\"");
    polyline(smooth[c], "stroke-width=\"2\"");
    const double ly = kTop + 16 + 20.0 * c;
    out << fmt::format(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
        kWidth - kRight + 10, ly, kWidth - kRight + 30, ly, color);
    out << fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", kWidth - kRight + 36, ly + 4,
                       results[c].name);
  }
  out << "</svg>\n";
}

}  // namespace comm_arena::metrics

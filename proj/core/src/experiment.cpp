#include "comm_arena/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "comm_arena/agents.hpp"

namespace comm_arena::experiment {

namespace fs = std::filesystem;

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw UsageError("value '" + text + "' for key '" + key + "' is not a valid number");
  }
  return value;
}

struct KeySpec {
  std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
KeySpec number_key(T ExperimentConfig::*member) {
  return {[member](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<T>(k, v);
          },
          [member](const ExperimentConfig& c) { return fmt::format("{}", c.*member); }};
}

template <typename Owner, typename T>
KeySpec nested_key(Owner ExperimentConfig::*owner, T Owner::*member) {
  return {[owner, member](ExperimentConfig& c, const std::string& k, const std::string& v) {
            (c.*owner).*member = parse_number<T>(k, v);
          },
          [owner, member](const ExperimentConfig& c) {
            return fmt::format("{}", (c.*owner).*member);
          }};
}

const std::map<std::string, KeySpec>& key_table() {
  using training::TrainingConfig;
  using env::EnvConfig;
  static const std::map<std::string, KeySpec> table = {
      {"mode",
       {[](ExperimentConfig& c, const std::string&, const std::string& v) {
          try {
            c.training.mode = env::mode_from_string(v);
          } catch (const InvalidInput& e) {
            throw UsageError(e.what());
          }
        },
        [](const ExperimentConfig& c) { return std::string(env::to_string(c.training.mode)); }}},
      {"out",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          if (v.empty()) throw UsageError("key '" + k + "' needs a path");
          c.out = v;
        },
        [](const ExperimentConfig& c) { return c.out.string(); }}},
      {"runs", number_key(&ExperimentConfig::runs)},
      {"seed", number_key(&ExperimentConfig::seed)},
      {"jobs", number_key(&ExperimentConfig::jobs)},
      {"eval_episodes", number_key(&ExperimentConfig::eval_episodes)},
      {"ewma_alpha", number_key(&ExperimentConfig::ewma_alpha)},
      {"trajectory_episodes", number_key(&ExperimentConfig::trajectory_episodes)},
      {"resume_interval", number_key(&ExperimentConfig::resume_interval)},
      {"epochs", nested_key(&ExperimentConfig::training, &TrainingConfig::epochs)},
      {"gamma", nested_key(&ExperimentConfig::training, &TrainingConfig::gamma)},
      {"lr", nested_key(&ExperimentConfig::training, &TrainingConfig::lr)},
      {"batch_size", nested_key(&ExperimentConfig::training, &TrainingConfig::batch_size)},
      {"episodes_per_epoch",
       nested_key(&ExperimentConfig::training, &TrainingConfig::episodes_per_epoch)},
      {"epsilon_start", nested_key(&ExperimentConfig::training, &TrainingConfig::epsilon_start)},
      {"epsilon_end", nested_key(&ExperimentConfig::training, &TrainingConfig::epsilon_end)},
      {"epsilon_anneal_fraction",
       nested_key(&ExperimentConfig::training, &TrainingConfig::epsilon_anneal_fraction)},
      {"adam_beta1", nested_key(&ExperimentConfig::training, &TrainingConfig::adam_beta1)},
      {"adam_beta2", nested_key(&ExperimentConfig::training, &TrainingConfig::adam_beta2)},
      {"adam_eps", nested_key(&ExperimentConfig::training, &TrainingConfig::adam_eps)},
      {"episode_length", nested_key(&ExperimentConfig::env, &EnvConfig::episode_length)},
      {"arena_half_width", nested_key(&ExperimentConfig::env, &EnvConfig::arena_half_width)},
      {"dt", nested_key(&ExperimentConfig::env, &EnvConfig::dt)},
      {"velocity_damping", nested_key(&ExperimentConfig::env, &EnvConfig::velocity_damping)},
      {"predator_accel", nested_key(&ExperimentConfig::env, &EnvConfig::predator_accel)},
      {"prey_accel", nested_key(&ExperimentConfig::env, &EnvConfig::prey_accel)},
      {"predator_max_speed", nested_key(&ExperimentConfig::env, &EnvConfig::predator_max_speed)},
      {"prey_max_speed", nested_key(&ExperimentConfig::env, &EnvConfig::prey_max_speed)},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

void validate(ExperimentConfig& config) {
  config.env.mode = config.training.mode;
  try {
    config.training.validate();
    config.env.validate();
  } catch (const UsageError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
  if (config.runs < 1) throw UsageError("runs must be >= 1");
  if (config.jobs < 1) throw UsageError("jobs must be >= 1");
  if (config.eval_episodes < 1) throw UsageError("eval_episodes must be >= 1");
  if (config.trajectory_episodes < 0) throw UsageError("trajectory_episodes must be >= 0");
  if (config.resume_interval < 0) throw UsageError("resume_interval must be >= 0");
  if (!(config.ewma_alpha > 0.0 && config.ewma_alpha <= 1.0)) {
    throw UsageError("ewma_alpha must lie in (0, 1]");
  }
}

std::vector<env::TrajectoryRow> trajectory_rows(std::span<const training::Transition> transitions) {
  std::vector<env::TrajectoryRow> rows;
  rows.reserve(transitions.size() * env::kAgentCount);
  for (const auto& t : transitions) {
    for (int a = 0; a < env::kAgentCount; ++a) {
      const auto id = static_cast<env::AgentId>(a);
      env::TrajectoryRow row;
      row.episode = t.episode;
      row.step = t.step;
      row.agent = id;
      row.position = {t.obs[a](0), t.obs[a](1)};
      row.velocity = {t.obs[a](2), t.obs[a](3)};
      row.action = t.actions[a];
      row.reward = env::is_predator(id) ? t.predator_reward : t.prey_reward;
      row.target = env::is_predator(id) ? t.targets[a] : -1;
      rows.push_back(row);
    }
  }
  return rows;
}

struct RunOutcome {
  RunLog log;
  std::optional<metrics::ConfusionMatrix> confusion;
  std::string error;
};

RunOutcome execute_run(const ExperimentConfig& config, int run) {
  RunOutcome outcome;
  auto training_config = config.training;
  training_config.seed = config.run_seed(run);
  const fs::path run_dir = config.out / fmt::format("run{}", run);
  fs::create_directories(run_dir);

  training::RunOptions options;
  if (config.resume_interval > 0) {
    options.resume_path = run_dir / "resume.json";
    options.resume_interval = config.resume_interval;
  }
  const auto trainer = training::train_run(training_config, config.env, options);
  outcome.log = trainer.log;
  write_run_log_csv(config.out / fmt::format("run{}.csv", run), trainer.log);
  training::save_checkpoints(trainer, run_dir);

  if (config.trajectory_episodes > 0) {
    SeedStream rng(training_config.seed);
    const auto rollout = training::run_episodes(trainer, config.trajectory_episodes, 0.0, rng);
    std::ofstream out(run_dir / "trajectories.csv");
    env::write_trajectory_csv(out, trajectory_rows(rollout.transitions));
  }
  if (env::is_comm(config.mode())) {
    outcome.confusion = metrics::build_confusion_matrix(
        metrics::CommCheckpoints{trainer.cnet->online, trainer.anet->online, trainer.prey.online},
        trainer.env, config.eval_episodes, training_config.seed);
  }
  return outcome;
}

void write_artifacts(const fs::path& dir, std::span<const metrics::ConfigurationResult> results,
                     double alpha) {
  metrics::write_summary_json(dir / "summary.json", results);
  metrics::write_curves_csv(dir / "curves.csv", results, alpha);
  metrics::write_curves_svg(dir / "curves.svg", results, alpha);
}

}  // namespace

std::vector<Override> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::vector<Override> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(fmt::format("{}:{}: expected key=value", path.string(), line_no));
    }
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return entries;
}

ExperimentConfig parse_config(const std::optional<fs::path>& file,
                              const std::vector<Override>& overrides) {
  ExperimentConfig config;
  std::vector<Override> all;
  if (file) all = read_config_file(*file);
  all.insert(all.end(), overrides.begin(), overrides.end());
  const auto& table = key_table();
  for (const auto& [key, value] : all) {
    const auto it = table.find(key);
    if (it == table.end()) throw UsageError("unknown configuration key '" + key + "'");
    it->second.set(config, key, value);
  }
  validate(config);
  return config;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, spec] : key_table()) keys.push_back(key);
  return keys;
}

std::string resolved_config_text(const ExperimentConfig& config) {
  std::string text;
  for (const auto& [key, spec] : key_table()) {
    text += key + "=" + spec.get(config) + "\n";
  }
  return text;
}

int run_experiment(const ExperimentConfig& config, std::ostream& log) {
  fs::create_directories(config.out);
  {
    std::ofstream out(config.out / "resolved_config.txt");
    out << resolved_config_text(config);
  }

  std::vector<RunOutcome> outcomes(config.runs);
  std::atomic<int> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (int run = next++; run < config.runs; run = next++) {
      const auto started = std::chrono::steady_clock::now();
      try {
        outcomes[run] = execute_run(config, run);
      } catch (const std::exception& e) {
        outcomes[run].error = e.what();
      }
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      std::lock_guard lock(log_mutex);
      if (outcomes[run].error.empty()) {
        log << fmt::format("[{}] run {} (seed {}) finished in {:.1f}s, peak {:.3f}\n",
                           env::to_string(config.mode()), run, config.run_seed(run), secs,
                           metrics::peak_performance(outcomes[run].log));
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const int workers = std::min(config.jobs, config.runs);
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  }

  int status = 0;
  for (int run = 0; run < config.runs; ++run) {
    if (!outcomes[run].error.empty()) {
      log << fmt::format("error: run {} (seed {}) failed: {}\n", run, config.run_seed(run),
                         outcomes[run].error);
      status = 1;
    }
  }
  if (status != 0) return status;

  metrics::ConfigurationResult result;
  result.name = std::string(env::to_string(config.mode()));
  for (int run = 0; run < config.runs; ++run) {
    result.logs.push_back(std::move(outcomes[run].log));
    result.seeds.push_back(config.run_seed(run));
    if (outcomes[run].confusion) result.confusion.push_back(*outcomes[run].confusion);
  }
  write_artifacts(config.out, std::span(&result, 1), config.ewma_alpha);
  if (!result.confusion.empty()) metrics::write_confusion_csv(config.out / "confusion.csv", result);
  return 0;
}

std::vector<metrics::ConfigurationResult> analyze(const fs::path& dir, std::ostream& log) {
  std::vector<std::pair<fs::path, std::string>> config_dirs;
  if (fs::exists(dir / "resolved_config.txt")) config_dirs.emplace_back(dir, "");
  if (fs::is_directory(dir)) {
    std::vector<fs::path> subdirs;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_directory() && fs::exists(entry.path() / "resolved_config.txt")) {
        subdirs.push_back(entry.path());
      }
    }
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& s : subdirs) config_dirs.emplace_back(s, s.filename().string());
  }
  if (config_dirs.empty()) {
    throw UsageError("no resolved_config.txt found in " + dir.string() + " or its subdirectories");
  }

  std::vector<metrics::ConfigurationResult> results;
  for (const auto& [config_dir, label] : config_dirs) {
    const auto config = parse_config(config_dir / "resolved_config.txt", {});
    metrics::ConfigurationResult result;
    result.name = label.empty() ? std::string(env::to_string(config.mode())) : label;
    for (int run = 0; run < config.runs; ++run) {
      const auto csv = config_dir / fmt::format("run{}.csv", run);
      if (!fs::exists(csv)) throw UsageError("missing run log " + csv.string());
      result.logs.push_back(read_run_log_csv(csv));
      result.seeds.push_back(config.run_seed(run));
      if (env::is_comm(config.mode())) {
        const auto ckpt = metrics::load_comm_checkpoints(config_dir / fmt::format("run{}", run));
        result.confusion.push_back(metrics::build_confusion_matrix(
            ckpt, config.env, config.eval_episodes, config.run_seed(run)));
      }
    }
    const auto stats = metrics::summarize(result);
    log << fmt::format("{}: runs={} average_reward={:.3f} average_std={:.3f} "
                       "average_peak={:.3f} peak_std={:.3f}\n",
                       result.name, result.logs.size(), stats.average_reward, stats.average_std,
                       stats.average_peak, stats.peak_std);
    if (!result.confusion.empty()) {
      metrics::write_confusion_csv(config_dir / "confusion.csv", result);
    }
    if (config_dir != dir) {
      write_artifacts(config_dir, std::span(&result, 1), config.ewma_alpha);
    }
    results.push_back(std::move(result));
  }
  double alpha = parse_config(config_dirs.front().first / "resolved_config.txt", {}).ewma_alpha;
  write_artifacts(dir, results, alpha);
  return results;
}

bool GradcheckSuite::passed() const {
  return !entries.empty() && std::all_of(entries.begin(), entries.end(),
                                         [](const auto& e) { return e.report.passed; });
}

GradcheckSuite run_gradcheck_suite(std::uint64_t seed, double h, double tol) {
  const auto started = std::chrono::steady_clock::now();
  SeedStream rng(seed);
  auto randomize_biases = [&](diffnet::DenseNet& net) {
    for (std::size_t k = 0; k < net.layer_count(); ++k) {
      auto& b = net.mutable_layer(k).bias;
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-0.1, 0.1);
    }
  };
  auto random_input = [&](Eigen::Index n) {
    diffnet::Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.uniform(-1.0, 1.0);
    return x;
  };

  GradcheckSuite suite;
  auto check = [&](std::string name, diffnet::DenseNet net) {
    randomize_biases(net);
    const auto x = random_input(net.input_size());
    suite.entries.push_back({std::move(name), diffnet::finite_difference_check(net, x, h, tol)});
  };
  // The C-Net is checked at an input with a live and a dead message.
  {
    auto cnet = agents::make_cnet(rng).net;
    cnet.mutable_layer(0).bias(0) = 0.5;
    diffnet::Vector x = diffnet::Vector::Zero(env::kPredatorObsSize);
    x(0) = 0.1;
    suite.entries.push_back({"c-net 12->1 (active)", diffnet::finite_difference_check(cnet, x, h, tol)});
    cnet.mutable_layer(0).bias(0) = -5.0;
    suite.entries.push_back({"c-net 12->1 (silent)", diffnet::finite_difference_check(cnet, x, h, tol)});
  }
  check("c-net 12->1 (random)", agents::make_cnet(rng).net);
  check("a-net 13->256->512->5", agents::make_anet(rng).net);
  check("iql 12->256->512->5 (predator, public prey)", agents::make_iql_net(12, rng).net);
  check("iql 10->256->512->5 (prey)", agents::make_iql_net(10, rng).net);
  suite.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return suite;
}

}  // namespace comm_arena::experiment

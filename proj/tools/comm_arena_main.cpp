// comm-arena: train predator/prey teams, analyze runs, verify gradients.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "comm_arena/experiment.hpp"

namespace {

using comm_arena::experiment::Override;
using comm_arena::experiment::UsageError;

// Turns leftover "--key=value" / "--key value" tokens into overrides.
std::vector<Override> extra_overrides(const std::vector<std::string>& extras) {
  std::vector<Override> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& token = extras[i];
    if (token.rfind("--", 0) != 0) {
      throw UsageError("unexpected argument '" + token + "'");
    }
    const auto body = token.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else if (i + 1 < extras.size()) {
      out.emplace_back(body, extras[++i]);
    } else {
      throw UsageError("option '" + token + "' needs a value");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned communication in a two-team predator/prey arena"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Train seeded runs of one configuration");
  run->allow_extras();
  std::optional<std::string> mode, runs, epochs, seed, out, jobs;
  std::optional<std::string> config_file;
  run->add_option("--mode", mode, "no_comm | full_obs | private_comm | public_comm");
  run->add_option("--runs", runs, "Number of independent runs (default 5)");
  run->add_option("--epochs", epochs, "Epochs per run (default 2000)");
  run->add_option("--seed", seed, "Base seed; run i uses seed + i");
  run->add_option("--out", out, "Output directory");
  run->add_option("--jobs", jobs, "Concurrent runs");
  run->add_option("--config", config_file, "key=value configuration file");
  run->footer("Any configuration key may also be given as --key=value.");

  auto* analyze = app.add_subcommand("analyze", "Recompute summaries from existing run logs");
  std::string analyze_dir;
  analyze->add_option("--out", analyze_dir, "Results directory")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every network shape");
  std::uint64_t gradcheck_seed = 1;
  gradcheck->add_option("--seed", gradcheck_seed, "Seed for random parameters and inputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run) {
      std::vector<Override> overrides;
      auto push = [&](const char* key, const std::optional<std::string>& v) {
        if (v) overrides.emplace_back(key, *v);
      };
      push("mode", mode);
      push("runs", runs);
      push("epochs", epochs);
      push("seed", seed);
      push("out", out);
      push("jobs", jobs);
      const auto extras = extra_overrides(run->remaining());
      overrides.insert(overrides.end(), extras.begin(), extras.end());
      std::optional<std::filesystem::path> file;
      if (config_file) file = *config_file;
      const auto config = comm_arena::experiment::parse_config(file, overrides);
      return comm_arena::experiment::run_experiment(config, std::cout);
    }
    if (*analyze) {
      comm_arena::experiment::analyze(analyze_dir, std::cout);
      return 0;
    }
    if (*gradcheck) {
      const auto suite = comm_arena::experiment::run_gradcheck_suite(gradcheck_seed);
      for (const auto& entry : suite.entries) {
        std::printf("%-45s %s  max_rel_err=%.3e  checked=%zu  kinks_skipped=%zu\n",
                    entry.name.c_str(), entry.report.passed ? "PASS" : "FAIL",
                    entry.report.max_relative_error, entry.report.checked,
                    entry.report.skipped);
      }
      std::printf("gradcheck %s in %.2fs\n", suite.passed() ? "passed" : "FAILED", suite.seconds);
      return suite.passed() ? 0 : 1;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#pragma once

// Epoch-based training loop.
//
// One epoch rolls `episodes_per_epoch` episodes with the current policies,
// then consumes every gathered transition exactly once in shuffled minibatches
// (the last one may be short), then copies online networks into the target
// networks. Communicating predators train with the DIAL loss, in which the
// teammate message is recomputed from the stored teammate observation so the
// Q-loss gradient reaches the sender's C-Net. Every other learner is a plain
// Q-network regressed on one-step TD targets.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "comm_arena/agents.hpp"
#include "comm_arena/diffnet.hpp"
#include "comm_arena/env.hpp"
#include "comm_arena/random.hpp"
#include "comm_arena/run_log.hpp"

namespace comm_arena::training {

using diffnet::AdamState;
using diffnet::DenseNet;
using diffnet::GradientSet;
using diffnet::Matrix;
using diffnet::Vector;

struct TrainingConfig {
  double gamma = 0.97;
  double lr = 0.0005;
  int epochs = 2000;
  int batch_size = 200;
  int episodes_per_epoch = 50;
  env::Mode mode = env::Mode::kNoComm;
  std::uint64_t seed = 0;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  // Share of `epochs` over which epsilon decays linearly.
  double epsilon_anneal_fraction = 0.2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  agents::EpsilonSchedule epsilon_schedule() const;
  diffnet::AdamHyperparameters adam() const;
};

struct Transition {
  std::array<Vector, env::kAgentCount> obs;
  std::array<Vector, env::kAgentCount> next_obs;
  env::Messages messages{};  // sent by each predator at t (comm modes)
  env::JointAction actions{};
  std::array<int, env::kTeamSize> targets{};
  double predator_reward = 0.0;
  double prey_reward = 0.0;
  bool done = false;
  int episode = 0;
  int step = 0;
  int epoch = 0;
};

// An online network with its frozen target copy and optimizer moments.
struct Learner {
  DenseNet online;
  DenseNet target;
  AdamState optimizer;

  static Learner create(DenseNet net, const diffnet::AdamHyperparameters& hyper);
};

struct TrainerState {
  TrainingConfig config;
  env::EnvConfig env;
  // Communicating predators.
  std::optional<Learner> cnet;
  std::optional<Learner> anet;
  // Non-communicating predators.
  std::optional<Learner> predator_iql;
  Learner prey;
  int epoch = 0;
  SeedStream rng;
  RunLog log;
};

// Builds fresh networks from config.seed. env.mode is forced to config.mode.
TrainerState make_trainer(const TrainingConfig& config, env::EnvConfig env);

enum class Team { kPredators, kPrey };

struct EpisodeBatch {
  std::vector<Transition> transitions;
  std::vector<double> predator_returns;
  std::vector<double> prey_returns;
};

// Rolls `count` episodes in lockstep with the trainer's online networks.
// Per step: messages from current predator observations, A-Net consumes the
// teammate's message, public prey hear both messages, then epsilon-greedy
// actions are drawn (episode-major, agent-minor) and the worlds advance.
EpisodeBatch run_episodes(const TrainerState& trainer, int count, double epsilon,
                          SeedStream& rng, int epoch = 0);
inline EpisodeBatch run_episode(const TrainerState& trainer, double epsilon,
                                SeedStream& rng, int epoch = 0) {
  return run_episodes(trainer, 1, epsilon, rng, epoch);
}

double td_target(double reward, bool done, double next_q_max, double gamma);

struct DialGradients {
  double loss = 0.0;
  GradientSet anet;
  GradientSet cnet;
};

// Mean squared TD error over (transition, predator) pairs, and its gradients
// with respect to the online A-Net and, through the recomputed messages, the
// online C-Net. Targets are constants.
DialGradients dial_loss(const Learner& cnet, const Learner& anet,
                        std::span<const Transition> batch, double gamma);

struct IqlGradients {
  double loss = 0.0;
  GradientSet grads;
};

IqlGradients iql_loss(const Learner& learner, std::span<const Transition> batch,
                      Team team, double gamma);

// One Adam step on A-Net and C-Net. Throws RejectedCall outside comm modes.
double dial_update(TrainerState& trainer, std::span<const Transition> batch);

// One Adam step on the team's Q-network. Predators only in no_comm/full_obs.
double iql_update(TrainerState& trainer, std::span<const Transition> batch, Team team);

void sync_targets(TrainerState& trainer);

// Rolls one epoch, trains on it, syncs targets, appends and returns the
// epoch record. Throws NonFiniteError if a loss is not finite.
EpochRecord train_epoch(TrainerState& trainer);

struct RunOptions {
  // Resume file, written every `resume_interval` epochs and at the end;
  // loaded first if it already exists.
  std::optional<std::filesystem::path> resume_path;
  int resume_interval = 50;
};

// Trains until config.epochs epochs are logged.
TrainerState train_run(const TrainingConfig& config, const env::EnvConfig& env,
                       const RunOptions& options = {});

// cnet.json, anet.json, prey.json and predator_iql.json (as present).
void save_checkpoints(const TrainerState& trainer, const std::filesystem::path& dir);

// ---- Resume files -------------------------------------------------------

void save_resume(const TrainerState& trainer, const std::filesystem::path& path);
TrainerState load_resume(const std::filesystem::path& path);

}  // namespace comm_arena::training

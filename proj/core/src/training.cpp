#include "comm_arena/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "comm_arena/error.hpp"

namespace comm_arena::training {

namespace {

using env::AgentId;

// Column 2b+i holds sample (transition b, team member i).
Matrix team_observations(std::span<const Transition> batch, Team team, bool next) {
  const int offset = team == Team::kPredators ? 0 : env::kTeamSize;
  const auto& first = next ? batch.front().next_obs[offset] : batch.front().obs[offset];
  Matrix out(first.size(), static_cast<Eigen::Index>(batch.size()) * env::kTeamSize);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (int i = 0; i < env::kTeamSize; ++i) {
      const auto& obs = next ? batch[b].next_obs[offset + i] : batch[b].obs[offset + i];
      out.col(static_cast<Eigen::Index>(b) * env::kTeamSize + i) = obs;
    }
  }
  return out;
}

// Each predator receives its teammate's message: column 2b+i takes 2b+(1-i).
Matrix swap_teammates(const Matrix& messages) {
  Matrix swapped(messages.rows(), messages.cols());
  for (Eigen::Index c = 0; c < messages.cols(); c += 2) {
    swapped.col(c) = messages.col(c + 1);
    swapped.col(c + 1) = messages.col(c);
  }
  return swapped;
}

double team_reward(const Transition& t, Team team) {
  return team == Team::kPredators ? t.predator_reward : t.prey_reward;
}

int action_of(const Transition& t, Team team, int member) {
  const int offset = team == Team::kPredators ? 0 : env::kTeamSize;
  return static_cast<int>(t.actions[offset + member]);
}

struct TdResult {
  double loss = 0.0;
  Matrix output_gradient;
};

// Squared TD error on the taken actions; gradient is nonzero only there.
TdResult td_regression(const Matrix& q, const Matrix& next_q,
                       std::span<const Transition> batch, Team team, double gamma) {
  const Eigen::Index n = q.cols();
  TdResult result;
  result.output_gradient = Matrix::Zero(q.rows(), n);
  double sum = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& t = batch[b];
    for (int i = 0; i < env::kTeamSize; ++i) {
      const Eigen::Index col = static_cast<Eigen::Index>(b) * env::kTeamSize + i;
      const int a = action_of(t, team, i);
      const double y =
          td_target(team_reward(t, team), t.done, next_q.col(col).maxCoeff(), gamma);
      const double err = q(a, col) - y;
      sum += err * err;
      result.output_gradient(a, col) = 2.0 * err / static_cast<double>(n);
    }
  }
  result.loss = sum / static_cast<double>(n);
  return result;
}

void require_batch(std::span<const Transition> batch, const TrainingConfig& config) {
  if (batch.empty()) throw InvalidInput("update: empty batch");
  if (static_cast<int>(batch.size()) > config.batch_size) {
    throw InvalidInput("update: batch of " + std::to_string(batch.size()) +
                       " exceeds batch_size " + std::to_string(config.batch_size));
  }
}

void require_finite(double loss, const char* what, const TrainerState& trainer) {
  if (!std::isfinite(loss)) {
    throw NonFiniteError(std::string(what) + " loss is not finite at epoch " +
                         std::to_string(trainer.epoch) + " (seed " +
                         std::to_string(trainer.config.seed) + ")");
  }
}

}  // namespace

void TrainingConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidInput("gamma must lie in [0, 1]");
  if (!(lr > 0.0)) throw InvalidInput("lr must be positive");
  if (epochs < 1) throw InvalidInput("epochs must be >= 1");
  if (batch_size < 1) throw InvalidInput("batch_size must be >= 1");
  if (episodes_per_epoch < 1) throw InvalidInput("episodes_per_epoch must be >= 1");
  if (!(epsilon_anneal_fraction > 0.0 && epsilon_anneal_fraction <= 1.0)) {
    throw InvalidInput("epsilon_anneal_fraction must lie in (0, 1]");
  }
  epsilon_schedule().validate();
}

agents::EpsilonSchedule TrainingConfig::epsilon_schedule() const {
  const int anneal = std::max(
      1, static_cast<int>(std::lround(epsilon_anneal_fraction * static_cast<double>(epochs))));
  return {epsilon_start, epsilon_end, anneal};
}

diffnet::AdamHyperparameters TrainingConfig::adam() const {
  return {lr, adam_beta1, adam_beta2, adam_eps};
}

Learner Learner::create(DenseNet net, const diffnet::AdamHyperparameters& hyper) {
  Learner learner;
  learner.optimizer = AdamState(net, hyper);
  learner.target = diffnet::clone_parameters(net);
  learner.online = std::move(net);
  return learner;
}

TrainerState make_trainer(const TrainingConfig& config, env::EnvConfig env) {
  config.validate();
  env.mode = config.mode;
  env.validate();
  TrainerState trainer;
  trainer.config = config;
  trainer.env = env;
  trainer.rng = SeedStream(config.seed);
  const auto hyper = config.adam();
  if (env::is_comm(config.mode)) {
    trainer.cnet = Learner::create(agents::make_cnet(trainer.rng).net, hyper);
    trainer.anet = Learner::create(agents::make_anet(trainer.rng).net, hyper);
  } else {
    trainer.predator_iql = Learner::create(
        agents::make_iql_net(env::kPredatorObsSize, trainer.rng).net, hyper);
  }
  trainer.prey = Learner::create(
      agents::make_iql_net(env::observation_size(config.mode, env::prey(0)), trainer.rng).net,
      hyper);
  return trainer;
}

EpisodeBatch run_episodes(const TrainerState& trainer, int count, double epsilon,
                          SeedStream& rng, int epoch) {
  if (count < 1) throw InvalidInput("run_episodes: count must be >= 1");
  const auto& cfg = trainer.env;
  const bool comm = env::is_comm(cfg.mode);
  const bool public_prey = cfg.mode == env::Mode::kPublicComm;
  if (comm ? !(trainer.cnet && trainer.anet) : !trainer.predator_iql) {
    throw RejectedCall("run_episodes: trainer networks do not match mode");
  }
  const Eigen::Index cols = static_cast<Eigen::Index>(count) * env::kTeamSize;

  std::vector<env::WorldState> worlds;
  worlds.reserve(count);
  for (int e = 0; e < count; ++e) worlds.push_back(env::reset(cfg, rng));

  // Observations and messages of every agent for the current step.
  struct Snapshot {
    Matrix predators;
    Matrix prey;
    Matrix messages;  // [1 x cols], empty outside comm modes
  };
  auto snapshot = [&]() {
    Snapshot s;
    s.predators.resize(env::kPredatorObsSize, cols);
    for (int e = 0; e < count; ++e) {
      for (int i = 0; i < env::kTeamSize; ++i) {
        s.predators.col(e * env::kTeamSize + i) = env::observe(worlds[e], env::predator(i), cfg);
      }
    }
    if (comm) s.messages = diffnet::evaluate(trainer.cnet->online, s.predators);
    s.prey.resize(env::observation_size(cfg.mode, env::prey(0)), cols);
    for (int e = 0; e < count; ++e) {
      std::optional<env::Messages> heard;
      if (public_prey) {
        heard = env::Messages{s.messages(0, e * 2), s.messages(0, e * 2 + 1)};
      }
      for (int i = 0; i < env::kTeamSize; ++i) {
        s.prey.col(e * env::kTeamSize + i) = env::observe(worlds[e], env::prey(i), cfg, heard);
      }
    }
    return s;
  };

  EpisodeBatch out;
  out.transitions.reserve(static_cast<std::size_t>(count) * cfg.episode_length);
  out.predator_returns.assign(count, 0.0);
  out.prey_returns.assign(count, 0.0);

  Snapshot now = snapshot();
  for (int t = 0; t < cfg.episode_length; ++t) {
    const Matrix predator_q =
        comm ? diffnet::evaluate(trainer.anet->online,
                                 agents::anet_input(now.predators, swap_teammates(now.messages)))
             : diffnet::evaluate(trainer.predator_iql->online, now.predators);
    const Matrix prey_q = diffnet::evaluate(trainer.prey.online, now.prey);

    std::vector<env::JointAction> joint(count);
    for (int e = 0; e < count; ++e) {
      for (int i = 0; i < env::kTeamSize; ++i) {
        joint[e][i] = agents::select_action(predator_q.col(e * 2 + i), epsilon, rng);
      }
      for (int i = 0; i < env::kTeamSize; ++i) {
        joint[e][env::kTeamSize + i] =
            agents::select_action(prey_q.col(e * 2 + i), epsilon, rng);
      }
    }

    std::vector<env::StepResult> results;
    results.reserve(count);
    for (int e = 0; e < count; ++e) results.push_back(env::step(worlds[e], joint[e], cfg));
    for (int e = 0; e < count; ++e) worlds[e] = results[e].next_state;
    Snapshot next = snapshot();

    for (int e = 0; e < count; ++e) {
      Transition tr;
      for (int i = 0; i < env::kTeamSize; ++i) {
        tr.obs[i] = now.predators.col(e * 2 + i);
        tr.next_obs[i] = next.predators.col(e * 2 + i);
        tr.obs[env::kTeamSize + i] = now.prey.col(e * 2 + i);
        tr.next_obs[env::kTeamSize + i] = next.prey.col(e * 2 + i);
        if (comm) tr.messages[i] = now.messages(0, e * 2 + i);
      }
      tr.actions = joint[e];
      tr.targets = worlds[e].target;
      tr.predator_reward = results[e].predator_reward;
      tr.prey_reward = results[e].prey_reward;
      tr.done = results[e].done;
      tr.episode = e;
      tr.step = t;
      tr.epoch = epoch;
      out.predator_returns[e] += tr.predator_reward;
      out.prey_returns[e] += tr.prey_reward;
      out.transitions.push_back(std::move(tr));
    }
    now = std::move(next);
  }
  // Episode-major order.
  std::stable_sort(out.transitions.begin(), out.transitions.end(),
                   [](const Transition& a, const Transition& b) { return a.episode < b.episode; });
  return out;
}

double td_target(double reward, bool done, double next_q_max, double gamma) {
  return done ? reward : reward + gamma * next_q_max;
}

DialGradients dial_loss(const Learner& cnet, const Learner& anet,
                        std::span<const Transition> batch, double gamma) {
  if (batch.empty()) throw InvalidInput("dial_loss: empty batch");
  const Matrix obs = team_observations(batch, Team::kPredators, false);
  const Matrix next_obs = team_observations(batch, Team::kPredators, true);

  const auto message_trace = diffnet::forward(cnet.online, obs);
  const auto q_trace = diffnet::forward(
      anet.online, agents::anet_input(obs, swap_teammates(message_trace.output())));

  const Matrix next_messages = diffnet::evaluate(cnet.target, next_obs);
  const Matrix next_q = diffnet::evaluate(
      anet.target, agents::anet_input(next_obs, swap_teammates(next_messages)));

  const auto td = td_regression(q_trace.output(), next_q, batch, Team::kPredators, gamma);

  DialGradients out;
  out.loss = td.loss;
  out.anet = diffnet::backward(anet.online, q_trace, td.output_gradient);
  // The message slot gradient of receiver k belongs to sender partner(k).
  const Matrix received = out.anet.input_gradient.row(agents::kMessageSlot);
  out.cnet = diffnet::backward(cnet.online, message_trace, swap_teammates(received));
  return out;
}

IqlGradients iql_loss(const Learner& learner, std::span<const Transition> batch,
                      Team team, double gamma) {
  if (batch.empty()) throw InvalidInput("iql_loss: empty batch");
  const Matrix obs = team_observations(batch, team, false);
  const Matrix next_obs = team_observations(batch, team, true);
  const auto trace = diffnet::forward(learner.online, obs);
  const Matrix next_q = diffnet::evaluate(learner.target, next_obs);
  const auto td = td_regression(trace.output(), next_q, batch, team, gamma);
  return {td.loss, diffnet::backward(learner.online, trace, td.output_gradient)};
}

double dial_update(TrainerState& trainer, std::span<const Transition> batch) {
  if (!env::is_comm(trainer.config.mode) || !trainer.cnet || !trainer.anet) {
    throw RejectedCall("dial_update requires private_comm or public_comm mode, got " +
                       std::string(env::to_string(trainer.config.mode)));
  }
  require_batch(batch, trainer.config);
  auto result = dial_loss(*trainer.cnet, *trainer.anet, batch, trainer.config.gamma);
  require_finite(result.loss, "DIAL", trainer);
  diffnet::adam_step(trainer.anet->online, result.anet, trainer.anet->optimizer);
  diffnet::adam_step(trainer.cnet->online, result.cnet, trainer.cnet->optimizer);
  return result.loss;
}

double iql_update(TrainerState& trainer, std::span<const Transition> batch, Team team) {
  require_batch(batch, trainer.config);
  Learner* learner = nullptr;
  if (team == Team::kPrey) {
    learner = &trainer.prey;
  } else {
    if (!trainer.predator_iql) {
      throw RejectedCall("iql_update: predators learn by DIAL in mode " +
                         std::string(env::to_string(trainer.config.mode)));
    }
    learner = &*trainer.predator_iql;
  }
  auto result = iql_loss(*learner, batch, team, trainer.config.gamma);
  require_finite(result.loss, team == Team::kPrey ? "prey IQL" : "predator IQL", trainer);
  diffnet::adam_step(learner->online, result.grads, learner->optimizer);
  return result.loss;
}

void sync_targets(TrainerState& trainer) {
  for (auto* learner : {trainer.cnet ? &*trainer.cnet : nullptr,
                        trainer.anet ? &*trainer.anet : nullptr,
                        trainer.predator_iql ? &*trainer.predator_iql : nullptr,
                        &trainer.prey}) {
    if (learner) learner->target = diffnet::clone_parameters(learner->online);
  }
}

EpochRecord train_epoch(TrainerState& trainer) {
  const auto& cfg = trainer.config;
  const double epsilon = cfg.epsilon_schedule().value(trainer.epoch);
  auto rollout = run_episodes(trainer, cfg.episodes_per_epoch, epsilon, trainer.rng,
                              trainer.epoch);

  // Fisher-Yates over the epoch's transitions.
  auto& pool = rollout.transitions;
  for (std::size_t i = pool.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(trainer.rng.uniform_index(i));
    std::swap(pool[i - 1], pool[j]);
  }

  const bool comm = env::is_comm(cfg.mode);
  double dial_sum = 0.0, prey_sum = 0.0, pred_sum = 0.0;
  int batches = 0;
  const std::span<const Transition> all(pool);
  for (std::size_t start = 0; start < all.size(); start += cfg.batch_size) {
    const auto batch = all.subspan(
        start, std::min<std::size_t>(cfg.batch_size, all.size() - start));
    if (comm) {
      dial_sum += dial_update(trainer, batch);
    } else {
      pred_sum += iql_update(trainer, batch, Team::kPredators);
    }
    prey_sum += iql_update(trainer, batch, Team::kPrey);
    ++batches;
  }
  sync_targets(trainer);

  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  EpochRecord record;
  record.epoch = trainer.epoch;
  record.mean_predator_reward = mean(rollout.predator_returns);
  record.mean_prey_reward = mean(rollout.prey_returns);
  record.epsilon = epsilon;
  if (comm) {
    record.dial_loss = dial_sum / batches;
  } else {
    record.iql_loss_pred = pred_sum / batches;
  }
  record.iql_loss_prey = prey_sum / batches;
  trainer.log.push_back(record);
  ++trainer.epoch;
  return record;
}

TrainerState train_run(const TrainingConfig& config, const env::EnvConfig& env,
                       const RunOptions& options) {
  TrainerState trainer;
  if (options.resume_path && std::filesystem::exists(*options.resume_path)) {
    trainer = load_resume(*options.resume_path);
    if (trainer.config.seed != config.seed || trainer.config.mode != config.mode) {
      throw InvalidInput("resume file " + options.resume_path->string() +
                         " belongs to a different run");
    }
    // Allow extending a finished run.
    trainer.config.epochs = config.epochs;
  } else {
    trainer = make_trainer(config, env);
  }
  while (trainer.epoch < trainer.config.epochs) {
    train_epoch(trainer);
    if (options.resume_path && options.resume_interval > 0 &&
        trainer.epoch % options.resume_interval == 0 &&
        trainer.epoch < trainer.config.epochs) {
      save_resume(trainer, *options.resume_path);
    }
  }
  if (options.resume_path) save_resume(trainer, *options.resume_path);
  return trainer;
}

void save_checkpoints(const TrainerState& trainer, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  if (trainer.cnet) diffnet::save_checkpoint(trainer.cnet->online, dir / "cnet.json");
  if (trainer.anet) diffnet::save_checkpoint(trainer.anet->online, dir / "anet.json");
  if (trainer.predator_iql) {
    diffnet::save_checkpoint(trainer.predator_iql->online, dir / "predator_iql.json");
  }
  diffnet::save_checkpoint(trainer.prey.online, dir / "prey.json");
}

}  // namespace comm_arena::training

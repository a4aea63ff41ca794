#include "comm_arena/env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "comm_arena/error.hpp"

namespace comm_arena::env {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kNoComm:
      return "no_comm";
    case Mode::kFullObs:
      return "full_obs";
    case Mode::kPrivateComm:
      return "private_comm";
    case Mode::kPublicComm:
      return "public_comm";
  }
  return "no_comm";
}

Mode mode_from_string(std::string_view name) {
  for (Mode m : {Mode::kNoComm, Mode::kFullObs, Mode::kPrivateComm, Mode::kPublicComm}) {
    if (to_string(m) == name) return m;
  }
  throw InvalidInput("unknown mode '" + std::string(name) +
                     "' (expected no_comm, full_obs, private_comm or public_comm)");
}

Vec2 direction(Action action) {
  switch (action) {
    case Action::kNoop:
      return {0.0, 0.0};
    case Action::kPosX:
      return {1.0, 0.0};
    case Action::kNegX:
      return {-1.0, 0.0};
    case Action::kPosY:
      return {0.0, 1.0};
    case Action::kNegY:
      return {0.0, -1.0};
  }
  throw InvalidInput("invalid action " + std::to_string(static_cast<int>(action)));
}

void EnvConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidInput(std::string(name) + " must be positive");
    }
  };
  positive(arena_half_width, "arena_half_width");
  positive(dt, "dt");
  positive(predator_accel, "predator_accel");
  positive(prey_accel, "prey_accel");
  positive(predator_max_speed, "predator_max_speed");
  positive(prey_max_speed, "prey_max_speed");
  if (!(velocity_damping > 0.0 && velocity_damping <= 1.0)) {
    throw InvalidInput("velocity_damping must lie in (0, 1]");
  }
  if (episode_length < 1) throw InvalidInput("episode_length must be >= 1");
}

bool operator==(const WorldState& a, const WorldState& b) {
  return a.position == b.position && a.velocity == b.velocity &&
         a.target == b.target && a.step == b.step;
}

WorldState reset(const EnvConfig& config, SeedStream& rng) {
  WorldState state;
  const double w = config.arena_half_width;
  for (int i = 0; i < kAgentCount; ++i) {
    const double x = rng.uniform(-w, w);
    const double y = rng.uniform(-w, w);
    state.position[i] = {x, y};
    state.velocity[i] = Vec2::Zero();
  }
  for (int i = 0; i < kTeamSize; ++i) {
    state.target[i] = static_cast<int>(rng.uniform_index(2));
  }
  state.step = 0;
  return state;
}

Rewards compute_rewards(const WorldState& state) {
  double total = 0.0;
  for (int i = 0; i < kTeamSize; ++i) {
    const auto& hunter = state.position[i];
    const auto& quarry = state.position[kTeamSize + state.target[i]];
    total += (hunter - quarry).norm();
  }
  return {-total, total};
}

StepResult step(const WorldState& state, const JointAction& actions,
                const EnvConfig& config) {
  if (state.step >= config.episode_length) {
    throw RejectedCall("step: episode already finished at step " +
                       std::to_string(state.step));
  }
  StepResult result;
  WorldState& next = result.next_state;
  next = state;
  const double w = config.arena_half_width;
  for (int i = 0; i < kAgentCount; ++i) {
    const bool hunter = is_predator(static_cast<AgentId>(i));
    const double accel = hunter ? config.predator_accel : config.prey_accel;
    const double max_speed = hunter ? config.predator_max_speed : config.prey_max_speed;

    Vec2 v = state.velocity[i] * config.velocity_damping +
             direction(actions[i]) * (accel * config.dt);
    const double speed = v.norm();
    if (speed > max_speed) v *= max_speed / speed;
    Vec2 p = state.position[i] + v * config.dt;
    p = p.cwiseMax(-w).cwiseMin(w);
    next.velocity[i] = v;
    next.position[i] = p;
  }
  next.step = state.step + 1;
  const auto rewards = compute_rewards(next);
  result.predator_reward = rewards.predator;
  result.prey_reward = rewards.prey;
  result.done = next.step == config.episode_length;
  return result;
}

Eigen::Index observation_size(Mode mode, AgentId agent) {
  if (is_predator(agent)) return kPredatorObsSize;
  return mode == Mode::kPublicComm ? kPreyObsSize + kMessageCount : kPreyObsSize;
}

Eigen::VectorXd observe(const WorldState& state, AgentId agent,
                        const EnvConfig& config,
                        const std::optional<Messages>& messages) {
  const bool hears = config.mode == Mode::kPublicComm && !is_predator(agent);
  if (messages && !hears) {
    throw RejectedCall(std::string("observe: messages supplied to ") +
                       (is_predator(agent) ? "a predator" : "a prey") + " in mode " +
                       std::string(to_string(config.mode)));
  }
  const int self = static_cast<int>(agent);
  Eigen::VectorXd obs(observation_size(config.mode, agent));
  const Vec2& own = state.position[self];
  Eigen::Index at = 0;
  auto put = [&](const Vec2& v) {
    obs(at++) = v.x();
    obs(at++) = v.y();
  };
  put(own);
  put(state.velocity[self]);
  if (is_predator(agent)) {
    const int mate = 1 - self;
    put(state.position[mate] - own);
    put(state.position[2] - own);
    put(state.position[3] - own);
    const int shown =
        config.mode == Mode::kFullObs ? state.target[self] : state.target[mate];
    obs(at++) = shown == 0 ? 1.0 : 0.0;
    obs(at++) = shown == 1 ? 1.0 : 0.0;
  } else {
    const int other = self == 2 ? 3 : 2;
    put(state.position[other] - own);
    put(state.position[0] - own);
    put(state.position[1] - own);
    if (hears) {
      const Messages m = messages.value_or(Messages{0.0, 0.0});
      obs(at++) = m[0];
      obs(at++) = m[1];
    }
  }
  return obs;
}

void write_trajectory_csv(std::ostream& out, std::span<const TrajectoryRow> rows) {
  out << "episode,step,agent,px,py,vx,vy,action,reward,target\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.episode, r.step,
                       static_cast<int>(r.agent), r.position.x(), r.position.y(),
                       r.velocity.x(), r.velocity.y(), static_cast<int>(r.action),
                       r.reward, r.target);
  }
}

}  // namespace comm_arena::env

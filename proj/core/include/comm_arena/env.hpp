#pragma once

// Two predators versus two prey on a bounded continuous plane.
//
// Each predator is assigned a secret target prey at reset; only its teammate
// observes the assignment (except in full-observability mode). Predators are
// rewarded with the negated sum of their distances to their targets, prey
// receive the exact negation.

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "comm_arena/random.hpp"

namespace comm_arena::env {

using Vec2 = Eigen::Vector2d;

enum class Mode { kNoComm, kFullObs, kPrivateComm, kPublicComm };

std::string_view to_string(Mode mode);
// Throws InvalidInput on an unknown name.
Mode mode_from_string(std::string_view name);
inline bool is_comm(Mode mode) {
  return mode == Mode::kPrivateComm || mode == Mode::kPublicComm;
}

enum class AgentId : int { kPredator0 = 0, kPredator1 = 1, kPrey0 = 2, kPrey1 = 3 };
inline constexpr int kAgentCount = 4;
inline constexpr int kTeamSize = 2;

inline bool is_predator(AgentId id) { return static_cast<int>(id) < kTeamSize; }
inline AgentId predator(int i) { return static_cast<AgentId>(i); }
inline AgentId prey(int i) { return static_cast<AgentId>(kTeamSize + i); }

enum class Action : int { kNoop = 0, kPosX = 1, kNegX = 2, kPosY = 3, kNegY = 4 };
inline constexpr int kActionCount = 5;

Vec2 direction(Action action);

inline constexpr Eigen::Index kPredatorObsSize = 12;
inline constexpr Eigen::Index kPreyObsSize = 10;
inline constexpr Eigen::Index kMessageCount = 2;

struct EnvConfig {
  double arena_half_width = 1.0;
  double dt = 0.1;
  double velocity_damping = 0.75;
  double predator_accel = 3.0;
  double prey_accel = 4.0;
  double predator_max_speed = 1.0;
  double prey_max_speed = 1.3;
  int episode_length = 30;
  Mode mode = Mode::kNoComm;

  // Throws InvalidInput if a constant is out of range.
  void validate() const;
};

struct WorldState {
  std::array<Vec2, kAgentCount> position;
  std::array<Vec2, kAgentCount> velocity;
  std::array<int, kTeamSize> target{};  // prey index per predator
  int step = 0;

  friend bool operator==(const WorldState& a, const WorldState& b);
};

struct StepResult {
  WorldState next_state;
  double predator_reward = 0.0;
  double prey_reward = 0.0;
  bool done = false;
};

using JointAction = std::array<Action, kAgentCount>;
using Messages = std::array<double, kMessageCount>;

WorldState reset(const EnvConfig& config, SeedStream& rng);

// Throws RejectedCall if the episode is already finished.
StepResult step(const WorldState& state, const JointAction& actions,
                const EnvConfig& config);

struct Rewards {
  double predator = 0.0;
  double prey = 0.0;
};
Rewards compute_rewards(const WorldState& state);

// Observation length for an agent under a mode.
Eigen::Index observation_size(Mode mode, AgentId agent);

// Mode-specific observation (layouts documented in the README).
// `messages` may only be supplied to prey in public_comm; there, an absent
// value means no message has been sent yet and is encoded as zeros. Supplying
// messages anywhere else throws RejectedCall.
Eigen::VectorXd observe(const WorldState& state, AgentId agent,
                        const EnvConfig& config,
                        const std::optional<Messages>& messages = std::nullopt);

// ---- Trajectory export --------------------------------------------------

struct TrajectoryRow {
  int episode = 0;
  int step = 0;
  AgentId agent = AgentId::kPredator0;
  Vec2 position;
  Vec2 velocity;
  Action action = Action::kNoop;
  double reward = 0.0;
  int target = -1;  // predators only
};

void write_trajectory_csv(std::ostream& out, std::span<const TrajectoryRow> rows);

}  // namespace comm_arena::env

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "comm_arena/env.hpp"
#include "comm_arena/error.hpp"

namespace comm_arena::env {
namespace {

constexpr Mode kModes[] = {Mode::kNoComm, Mode::kFullObs, Mode::kPrivateComm, Mode::kPublicComm};

EnvConfig config_for(Mode mode) {
  EnvConfig c;
  c.mode = mode;
  return c;
}

JointAction random_actions(SeedStream& rng) {
  JointAction a;
  for (auto& x : a) x = static_cast<Action>(rng.uniform_index(kActionCount));
  return a;
}

// Uniformly random (not necessarily reachable) state inside the arena.
WorldState random_state(SeedStream& rng, double w = 1.0) {
  WorldState s;
  for (int i = 0; i < kAgentCount; ++i) {
    s.position[i] = {rng.uniform(-w, w), rng.uniform(-w, w)};
    s.velocity[i] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  }
  for (auto& t : s.target) t = static_cast<int>(rng.uniform_index(2));
  return s;
}

TEST(Mode, RoundTripsNames) {
  for (Mode m : kModes) EXPECT_EQ(mode_from_string(to_string(m)), m);
  EXPECT_THROW(mode_from_string("banana"), InvalidInput);
}

TEST(EnvConfigTest, ValidatesConstants) {
  EnvConfig c;
  EXPECT_NO_THROW(c.validate());
  c.velocity_damping = 1.0;
  EXPECT_NO_THROW(c.validate());
  c.velocity_damping = 0.0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = EnvConfig{};
  c.dt = -0.1;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = EnvConfig{};
  c.episode_length = 0;
  EXPECT_THROW(c.validate(), InvalidInput);
}

TEST(Reset, SameSeedIsBitIdentical) {
  SeedStream a(42), b(42);
  EXPECT_EQ(reset(EnvConfig{}, a), reset(EnvConfig{}, b));
}

TEST(Reset, InsideArenaAtRest) {
  SeedStream rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto s = reset(EnvConfig{}, rng);
    EXPECT_EQ(s.step, 0);
    for (int a = 0; a < kAgentCount; ++a) {
      EXPECT_LE(s.position[a].cwiseAbs().maxCoeff(), 1.0);
      EXPECT_TRUE(s.velocity[a].isZero(0.0));
    }
  }
}

TEST(Reset, TargetFrequencyWithinBinomialBound) {
  SeedStream rng(2);
  int zeros = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = reset(EnvConfig{}, rng);
    for (int t : s.target) ASSERT_TRUE(t == 0 || t == 1);
    zeros += s.target[0] == 0;
  }
  const double freq = zeros / 1000.0;
  EXPECT_GE(freq, 0.44);
  EXPECT_LE(freq, 0.56);
}

TEST(Step, NoopAtRestIsStatic) {
  SeedStream rng(3);
  const auto s = reset(EnvConfig{}, rng);
  JointAction noop;
  noop.fill(Action::kNoop);
  const auto r = step(s, noop, EnvConfig{});
  EXPECT_EQ(r.next_state.position, s.position);
  EXPECT_EQ(r.next_state.step, 1);
  EXPECT_FALSE(r.done);
}

TEST(Step, PredatorAcceleratesFromRest) {
  WorldState s;
  for (auto& p : s.position) p = Vec2::Zero();
  for (auto& v : s.velocity) v = Vec2::Zero();
  JointAction a;
  a.fill(Action::kNoop);
  a[0] = Action::kPosX;
  const auto r = step(s, a, EnvConfig{});
  EXPECT_NEAR(r.next_state.velocity[0].x(), 0.3, 1e-15);
  EXPECT_DOUBLE_EQ(r.next_state.velocity[0].y(), 0.0);
  EXPECT_NEAR(r.next_state.position[0].x(), 0.03, 1e-15);
  EXPECT_DOUBLE_EQ(r.next_state.position[0].y(), 0.0);
}

TEST(Step, DirectionsMatchActionTable) {
  EXPECT_EQ(direction(Action::kNoop), Vec2(0, 0));
  EXPECT_EQ(direction(Action::kPosX), Vec2(1, 0));
  EXPECT_EQ(direction(Action::kNegX), Vec2(-1, 0));
  EXPECT_EQ(direction(Action::kPosY), Vec2(0, 1));
  EXPECT_EQ(direction(Action::kNegY), Vec2(0, -1));
}

TEST(Step, DoneAtEpisodeLengthThenRejected) {
  SeedStream rng(4);
  const EnvConfig config;
  auto s = reset(config, rng);
  for (int t = 1; t <= 30; ++t) {
    const auto r = step(s, random_actions(rng), config);
    EXPECT_EQ(r.done, t == 30);
    EXPECT_EQ(r.done, r.next_state.step == config.episode_length);
    s = r.next_state;
  }
  EXPECT_THROW(step(s, random_actions(rng), config), RejectedCall);
}

TEST(Step, ClampsSpeedAndPosition) {
  EnvConfig config;
  WorldState s;
  for (int i = 0; i < kAgentCount; ++i) {
    s.position[i] = {0.99, -0.99};
    s.velocity[i] = {5.0, -5.0};
  }
  JointAction a{Action::kPosX, Action::kNegY, Action::kPosX, Action::kNegY};
  const auto r = step(s, a, config);
  for (int i = 0; i < kAgentCount; ++i) {
    const double cap = is_predator(static_cast<AgentId>(i)) ? 1.0 : 1.3;
    EXPECT_LE(r.next_state.velocity[i].norm(), cap + 1e-12);
    EXPECT_DOUBLE_EQ(r.next_state.position[i].x(), 1.0);
    EXPECT_DOUBLE_EQ(r.next_state.position[i].y(), -1.0);
  }
}

TEST(Rewards, EuclideanDistance) {
  WorldState s;
  for (auto& v : s.velocity) v = Vec2::Zero();
  s.position[0] = {0, 0};
  s.position[2] = {3, 4};
  s.position[1] = {-1, 2};
  s.position[3] = {-1, 2};
  s.target = {0, 1};
  const auto r = compute_rewards(s);
  EXPECT_DOUBLE_EQ(r.predator, -5.0);
  EXPECT_DOUBLE_EQ(r.prey, 5.0);

  s.position[0] = s.position[2];
  const auto zero = compute_rewards(s);
  EXPECT_EQ(zero.predator, 0.0);
  EXPECT_EQ(zero.prey, 0.0);
}

TEST(Rewards, SharedTargetCountsTwice) {
  WorldState s;
  s.position = {Vec2(0, 0), Vec2(0, 1), Vec2(1, 0), Vec2(-1, -1)};
  s.target = {0, 0};
  EXPECT_DOUBLE_EQ(compute_rewards(s).predator, -(1.0 + std::sqrt(2.0)));
}

// Zero-sum and per-step bound over 10,000 random states.
TEST(Rewards, PropertyZeroSumAndBounded) {
  SeedStream rng(5);
  const double bound = 2.0 * 2.0 * std::sqrt(2.0);
  for (int i = 0; i < 10000; ++i) {
    const auto r = compute_rewards(random_state(rng));
    ASSERT_EQ(r.predator + r.prey, 0.0);
    ASSERT_LE(r.predator, 0.0);
    ASSERT_GE(r.predator, -bound);
  }
}

// Reachable trajectories keep every state invariant.
TEST(Step, PropertyRolloutInvariants) {
  SeedStream rng(6);
  for (int episode = 0; episode < 200; ++episode) {
    const EnvConfig config = config_for(kModes[episode % 4]);
    auto s = reset(config, rng);
    double total = 0.0;
    for (int t = 0; t < config.episode_length; ++t) {
      const auto r = step(s, random_actions(rng), config);
      ASSERT_EQ(r.predator_reward + r.prey_reward, 0.0);
      ASSERT_GE(r.predator_reward, -5.657);
      for (int a = 0; a < kAgentCount; ++a) {
        ASSERT_LE(r.next_state.position[a].cwiseAbs().maxCoeff(), 1.0);
        const double cap = is_predator(static_cast<AgentId>(a)) ? 1.0 : 1.3;
        ASSERT_LE(r.next_state.velocity[a].norm(), cap + 1e-12);
      }
      ASSERT_EQ(r.next_state.target, s.target);
      total += r.predator_reward;
      s = r.next_state;
    }
    ASSERT_GE(total, -169.7);
    ASSERT_LE(total, 0.0);
  }
}

TEST(Step, PropertyDeterministicReplay) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto play = [seed] {
      SeedStream rng(seed);
      const EnvConfig config;
      auto s = reset(config, rng);
      std::vector<WorldState> states{s};
      while (s.step < config.episode_length) {
        s = step(s, random_actions(rng), config).next_state;
        states.push_back(s);
      }
      return states;
    };
    ASSERT_EQ(play(), play());
  }
}

TEST(Rewards, TableScaleFitsEpisodeBound) {
  const double episode_bound = -30.0 * 2.0 * 2.0 * std::sqrt(2.0);
  EXPECT_NEAR(episode_bound, -169.7, 0.01);
  for (double v : {-50.93, -129.20}) {
    EXPECT_GE(v, episode_bound);
    EXPECT_LE(v, 0.0);
  }
}

TEST(Observe, Lengths) {
  for (Mode m : kModes) {
    const auto c = config_for(m);
    SeedStream rng(7);
    const auto s = reset(c, rng);
    for (int a = 0; a < kAgentCount; ++a) {
      const auto id = static_cast<AgentId>(a);
      EXPECT_EQ(observe(s, id, c).size(), observation_size(m, id));
    }
  }
  EXPECT_EQ(observation_size(Mode::kPrivateComm, AgentId::kPrey0),
            observation_size(Mode::kNoComm, AgentId::kPrey0));
  EXPECT_EQ(observation_size(Mode::kPublicComm, AgentId::kPrey1),
            observation_size(Mode::kPrivateComm, AgentId::kPrey1) + 2);
  EXPECT_EQ(observation_size(Mode::kNoComm, AgentId::kPredator0), 12);
}

WorldState layout_state() {
  WorldState s;
  s.position = {Vec2(0.1, 0.2), Vec2(-0.3, 0.4), Vec2(0.5, -0.6), Vec2(-0.7, -0.8)};
  s.velocity = {Vec2(0.01, 0.02), Vec2(0.03, 0.04), Vec2(0.05, 0.06), Vec2(0.07, 0.08)};
  s.target = {0, 1};
  return s;
}

TEST(Observe, PredatorLayoutShowsTeammateTarget) {
  const auto s = layout_state();
  const auto o = observe(s, AgentId::kPredator0, config_for(Mode::kPrivateComm));
  Eigen::VectorXd expected(12);
  expected << 0.1, 0.2, 0.01, 0.02, -0.4, 0.2, 0.4, -0.8, -0.8, -1.0, 0.0, 1.0;
  EXPECT_TRUE(o.isApprox(expected, 1e-15)) << o.transpose();

  const auto o1 = observe(s, AgentId::kPredator1, config_for(Mode::kNoComm));
  EXPECT_EQ(o1(10), 1.0);  // predator 0 targets prey 0
  EXPECT_EQ(o1(11), 0.0);
}

TEST(Observe, FullObsShowsOwnTarget) {
  const auto s = layout_state();
  const auto c = config_for(Mode::kFullObs);
  const auto o = observe(s, AgentId::kPredator1, c);
  EXPECT_EQ(o(10), 0.0);
  EXPECT_EQ(o(11), 1.0);
  const auto o0 = observe(s, AgentId::kPredator0, c);
  EXPECT_EQ(o0(10), 1.0);
  EXPECT_EQ(o0(11), 0.0);
}

TEST(Observe, PreyLayoutAndMessages) {
  const auto s = layout_state();
  const auto o = observe(s, AgentId::kPrey1, config_for(Mode::kNoComm));
  Eigen::VectorXd expected(10);
  expected << -0.7, -0.8, 0.07, 0.08, 1.2, 0.2, 0.8, 1.0, 0.4, 1.2;
  EXPECT_TRUE(o.isApprox(expected, 1e-15)) << o.transpose();

  const auto pub = config_for(Mode::kPublicComm);
  const auto heard = observe(s, AgentId::kPrey0, pub, Messages{0.25, 1.5});
  EXPECT_EQ(heard(10), 0.25);
  EXPECT_EQ(heard(11), 1.5);
  const auto silent = observe(s, AgentId::kPrey0, pub);
  EXPECT_EQ(silent(10), 0.0);
  EXPECT_EQ(silent(11), 0.0);
  EXPECT_TRUE(silent.head(10).isApprox(heard.head(10), 0.0));
}

TEST(Observe, RejectsUnexpectedMessages) {
  const auto s = layout_state();
  for (Mode m : kModes) {
    EXPECT_THROW(observe(s, AgentId::kPredator0, config_for(m), Messages{1, 1}), RejectedCall);
    if (m != Mode::kPublicComm) {
      EXPECT_THROW(observe(s, AgentId::kPrey0, config_for(m), Messages{1, 1}), RejectedCall);
    }
  }
}

TEST(Trajectory, CsvHeaderAndRow) {
  TrajectoryRow row;
  row.episode = 1;
  row.step = 2;
  row.agent = AgentId::kPrey0;
  row.position = {0.5, -0.25};
  row.velocity = {0.0, 1.0};
  row.action = Action::kNegY;
  row.reward = 1.5;
  std::ostringstream out;
  write_trajectory_csv(out, std::span<const TrajectoryRow>(&row, 1));
  EXPECT_EQ(out.str(),
            "episode,step,agent,px,py,vx,vy,action,reward,target\n"
            "1,2,2,0.5,-0.25,0,1,4,1.5,-1\n");
}

}  // namespace
}  // namespace comm_arena::env

#include <array>
#include <cmath>

#include <gtest/gtest.h>

#include "comm_arena/agents.hpp"
#include "comm_arena/error.hpp"

namespace comm_arena::agents {
namespace {

using env::Action;

Vector random_obs(Eigen::Index n, SeedStream& rng) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
  return v;
}

Vector q_of(std::initializer_list<double> values) {
  Vector q(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) q(i++) = v;
  return q;
}

TEST(Shapes, NetworksMatchArchitecture) {
  SeedStream rng(1);
  const auto cnet = make_cnet(rng);
  EXPECT_EQ(cnet.net.layer_count(), 1u);
  EXPECT_EQ(cnet.net.input_size(), 12);
  EXPECT_EQ(cnet.net.output_size(), 1);
  EXPECT_NO_THROW(validate(cnet));

  const auto anet = make_anet(rng);
  ASSERT_EQ(anet.net.layer_count(), 3u);
  EXPECT_EQ(anet.net.layer(0).in(), 13);
  EXPECT_EQ(anet.net.layer(0).out(), 256);
  EXPECT_EQ(anet.net.layer(1).out(), 512);
  EXPECT_EQ(anet.net.layer(2).out(), 5);
  EXPECT_EQ(anet.net.layer(2).activation, diffnet::Activation::kIdentity);
  EXPECT_NO_THROW(validate(anet));

  const auto prey = make_iql_net(12, rng);
  EXPECT_EQ(prey.net.layer(0).out(), 256);
  EXPECT_EQ(prey.net.layer(1).out(), 512);
  EXPECT_EQ(prey.net.output_size(), 5);

  EXPECT_THROW(validate(CNet{make_iql_net(12, rng).net}), InvalidInput);
  EXPECT_THROW(validate(ANet{make_iql_net(10, rng).net}), InvalidInput);
}

TEST(Message, ConstantMapAndClamp) {
  SeedStream rng(2);
  auto cnet = make_cnet(rng);
  cnet.net.mutable_layer(0).weights.setZero();
  cnet.net.mutable_layer(0).bias(0) = 0.5;
  for (int i = 0; i < 10; ++i) EXPECT_EQ(compute_message(cnet, random_obs(12, rng)), 0.5);
  cnet.net.mutable_layer(0).bias(0) = -0.5;
  EXPECT_EQ(compute_message(cnet, random_obs(12, rng)), 0.0);
}

TEST(Message, RejectsWrongLength) {
  SeedStream rng(3);
  const auto cnet = make_cnet(rng);
  EXPECT_THROW(compute_message(cnet, random_obs(10, rng)), InvalidInput);
}

TEST(Message, OneHotPerturbationIsLinear) {
  SeedStream rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    auto cnet = make_cnet(rng);
    cnet.net.mutable_layer(0).bias(0) = 5.0;  // keeps the pre-activation positive
    const Vector obs = random_obs(12, rng);
    for (Eigen::Index slot : {10, 11}) {
      Vector bumped = obs;
      bumped(slot) += 1.0;
      EXPECT_NEAR(compute_message(cnet, bumped) - compute_message(cnet, obs),
                  cnet.net.layer(0).weights(0, slot), 1e-12);
    }
  }
}

TEST(Message, PropertyNonNegative) {
  SeedStream rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    auto cnet = make_cnet(rng);
    cnet.net.mutable_layer(0).bias(0) = rng.uniform(-1.0, 1.0);
    ASSERT_GE(compute_message(cnet, random_obs(12, rng)), 0.0);
  }
}

TEST(QValues, DeadLastLayerGivesBias) {
  SeedStream rng(6);
  auto anet = make_anet(rng);
  auto& last = anet.net.mutable_layer(2);
  last.weights.setZero();
  last.bias = q_of({1, -2, 3, -4, 5});
  for (int i = 0; i < 5; ++i) {
    EXPECT_TRUE(compute_q(anet, random_obs(12, rng), rng.uniform()).isApprox(last.bias, 0.0));
  }
}

TEST(QValues, MessageSlotCarriesGradient) {
  SeedStream rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto anet = make_anet(rng);
    const Vector obs = random_obs(12, rng);
    const double m = rng.uniform();
    Vector input(13);
    input << obs, m;
    const Vector g = random_obs(5, rng);
    const auto grads = diffnet::backward(anet.net, diffnet::forward(anet.net, input), g);
    const double analytic = grads.input_gradient(kMessageSlot, 0);
    const double h = 1e-6;
    const double numeric =
        (g.dot(compute_q(anet, obs, m + h)) - g.dot(compute_q(anet, obs, m - h))) / (2 * h);
    EXPECT_NE(analytic, 0.0);
    EXPECT_NEAR(analytic, numeric, 1e-6 * std::max(1.0, std::abs(numeric)));
  }
}

TEST(QValues, MessageChangesQ) {
  SeedStream rng(8);
  const auto anet = make_anet(rng);
  const Vector obs = random_obs(12, rng);
  EXPECT_FALSE(compute_q(anet, obs, 0.0).isApprox(compute_q(anet, obs, 2.0), 1e-9));
}

TEST(QValues, RejectsLengthMismatch) {
  SeedStream rng(9);
  const auto anet = make_anet(rng);
  EXPECT_THROW(compute_q(anet, random_obs(13, rng), 0.0), InvalidInput);
  const auto prey = make_iql_net(10, rng);
  EXPECT_THROW(compute_q(prey, random_obs(12, rng)), InvalidInput);
  EXPECT_THROW(anet_input(Matrix::Zero(12, 3), Matrix::Zero(1, 2)), InvalidInput);
}

TEST(QValues, AnetInputStacksMessageLast) {
  Matrix obs = Matrix::Constant(12, 2, 1.0);
  Matrix msg(1, 2);
  msg << 7.0, 8.0;
  const Matrix in = anet_input(obs, msg);
  EXPECT_EQ(in.rows(), 13);
  EXPECT_EQ(in(kMessageSlot, 0), 7.0);
  EXPECT_EQ(in(kMessageSlot, 1), 8.0);
}

// Swapping the predators' observations swaps their messages exactly.
TEST(Sharing, PropertySwapSymmetry) {
  SeedStream rng(10);
  const auto cnet = make_cnet(rng);
  const auto anet = make_anet(rng);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector o0 = random_obs(12, rng);
    const Vector o1 = random_obs(12, rng);
    Matrix batch(12, 2);
    batch << o0, o1;
    Matrix swapped(12, 2);
    swapped << o1, o0;
    const Matrix m = diffnet::evaluate(cnet.net, batch);
    const Matrix ms = diffnet::evaluate(cnet.net, swapped);
    ASSERT_EQ(m(0, 0), ms(0, 1));
    ASSERT_EQ(m(0, 1), ms(0, 0));
    // Each predator hears its teammate.
    const Vector q0 = compute_q(anet, o0, m(0, 1));
    const Vector q0s = compute_q(anet, o0, ms(0, 0));
    ASSERT_TRUE((q0.array() == q0s.array()).all());
  }
}

TEST(Epsilon, LinearThenFlat) {
  const EpsilonSchedule s{1.0, 0.05, 10};
  EXPECT_DOUBLE_EQ(s.value(0), 1.0);
  EXPECT_DOUBLE_EQ(s.value(5), 0.525);
  EXPECT_DOUBLE_EQ(s.value(10), 0.05);
  EXPECT_DOUBLE_EQ(s.value(1000), 0.05);
  for (int e = 1; e < 20; ++e) EXPECT_LE(s.value(e), s.value(e - 1));
  EXPECT_THROW((EpsilonSchedule{0.1, 0.2, 10}.validate()), InvalidInput);
  EXPECT_THROW((EpsilonSchedule{1.0, -0.1, 10}.validate()), InvalidInput);
  EXPECT_THROW((EpsilonSchedule{1.0, 0.1, 0}.validate()), InvalidInput);
}

TEST(Select, GreedyArgmax) {
  SeedStream rng(11);
  EXPECT_EQ(select_action(q_of({1, 3, 2, 0, -1}), 0.0, rng), Action::kPosX);
  EXPECT_EQ(select_action(q_of({2, 2, 0, 0, 0}), 0.0, rng), Action::kNoop);
  EXPECT_EQ(greedy_action(q_of({0, 0, 0, 0, 9})), Action::kNegY);
}

TEST(Select, RejectsNaNAndBadEpsilon) {
  SeedStream rng(12);
  const Vector bad = q_of({0, std::nan(""), 0, 0, 0});
  try {
    select_action(bad, 0.0, rng);
    FAIL() << "expected InvalidInput";
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("NaN"), std::string::npos);
  }
  EXPECT_THROW(select_action(q_of({0, 0, 0, 0, 0}), 1.5, rng), InvalidInput);
  EXPECT_THROW(select_action(q_of({0, 0, 0}), 0.0, rng), InvalidInput);
}

TEST(Select, UniformExplorationFrequencies) {
  SeedStream rng(13);
  std::array<int, 5> counts{};
  const Vector q = q_of({0, 10, 0, 0, 0});
  for (int i = 0; i < 10000; ++i) ++counts[static_cast<int>(select_action(q, 1.0, rng))];
  for (int c : counts) {
    EXPECT_GE(c / 10000.0, 0.18);
    EXPECT_LE(c / 10000.0, 0.22);
  }
}

TEST(Select, PropertyGreedyIsPure) {
  SeedStream rng(14);
  for (int trial = 0; trial < 500; ++trial) {
    const Vector q = random_obs(5, rng);
    SeedStream a(trial), b(trial + 1000);
    ASSERT_EQ(select_action(q, 0.0, a), select_action(q, 0.0, b));
    Eigen::Index best;
    q.maxCoeff(&best);
    ASSERT_EQ(static_cast<Eigen::Index>(select_action(q, 0.0, a)), best);
  }
}

TEST(Select, DrawCountIsFixed) {
  // Greedy selection still consumes exactly one draw.
  SeedStream a(15), b(15);
  select_action(q_of({1, 0, 0, 0, 0}), 0.0, a);
  b.uniform();
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace comm_arena::agents

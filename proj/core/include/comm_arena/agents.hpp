#pragma once

// Policy containers for both teams.
//
// Communicating predators split their policy in two: a C-Net with no hidden
// layers maps an observation to a single non-negative message, and an A-Net
// maps observation + teammate message to Q-values. Prey (and predators in the
// non-communicating modes) use a plain Q-network. One parameter set is shared
// by both members of a team.

#include <array>

#include "comm_arena/diffnet.hpp"
#include "comm_arena/env.hpp"
#include "comm_arena/random.hpp"

namespace comm_arena::agents {

using diffnet::DenseNet;
using diffnet::Matrix;
using diffnet::Vector;

inline constexpr Eigen::Index kHiddenWidth1 = 256;
inline constexpr Eigen::Index kHiddenWidth2 = 512;
inline constexpr Eigen::Index kMessageSize = 1;

struct CNet {
  DenseNet net;
};

struct ANet {
  DenseNet net;
};

struct IQLNet {
  DenseNet net;
};

CNet make_cnet(SeedStream& rng);
ANet make_anet(SeedStream& rng);
IQLNet make_iql_net(Eigen::Index observation_size, SeedStream& rng);

// Shape checks; throw InvalidInput naming the offending dimension.
void validate(const CNet& cnet);
void validate(const ANet& anet);

// ReLU(W obs + b). Throws InvalidInput unless obs has predator length.
double compute_message(const CNet& cnet, const Vector& obs);

// Q-values for concat(obs, message).
Vector compute_q(const ANet& anet, const Vector& obs, double message);
Vector compute_q(const IQLNet& net, const Vector& obs);

// Stacks [obs; message] column-wise. obs is [12 x n], messages [1 x n].
Matrix anet_input(const Eigen::Ref<const Matrix>& obs,
                  const Eigen::Ref<const Matrix>& messages);

// Index of the message component inside the A-Net input.
inline constexpr Eigen::Index kMessageSlot = env::kPredatorObsSize;

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  int anneal_epochs = 1;

  // Linear from start to end over [0, anneal_epochs], then flat.
  double value(int epoch) const;
  void validate() const;
};

// Lowest-index argmax. Throws InvalidInput on NaN.
env::Action greedy_action(const Eigen::Ref<const Vector>& q);

// With probability epsilon a uniform action, otherwise greedy_action(q).
// Always consumes exactly one uniform draw, plus one more on exploration.
env::Action select_action(const Eigen::Ref<const Vector>& q, double epsilon,
                          SeedStream& rng);

}  // namespace comm_arena::agents

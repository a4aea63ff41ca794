#include "comm_arena/agents.hpp"

#include <cmath>
#include <string>

#include "comm_arena/error.hpp"

namespace comm_arena::agents {

using diffnet::Activation;

CNet make_cnet(SeedStream& rng) {
  const std::array<Eigen::Index, 2> widths{env::kPredatorObsSize, kMessageSize};
  return {DenseNet::create(widths, Activation::kReLU, Activation::kReLU, rng)};
}

ANet make_anet(SeedStream& rng) {
  const std::array<Eigen::Index, 4> widths{env::kPredatorObsSize + kMessageSize,
                                           kHiddenWidth1, kHiddenWidth2,
                                           env::kActionCount};
  return {DenseNet::create(widths, Activation::kReLU, Activation::kIdentity, rng)};
}

IQLNet make_iql_net(Eigen::Index observation_size, SeedStream& rng) {
  const std::array<Eigen::Index, 4> widths{observation_size, kHiddenWidth1,
                                           kHiddenWidth2, env::kActionCount};
  return {DenseNet::create(widths, Activation::kReLU, Activation::kIdentity, rng)};
}

void validate(const CNet& cnet) {
  const auto& net = cnet.net;
  if (net.layer_count() != 1 || net.input_size() != env::kPredatorObsSize ||
      net.output_size() != kMessageSize ||
      net.layer(0).activation != Activation::kReLU) {
    throw InvalidInput("C-Net must be a single ReLU layer 12 -> 1");
  }
}

void validate(const ANet& anet) {
  const auto& net = anet.net;
  if (net.input_size() != env::kPredatorObsSize + kMessageSize ||
      net.output_size() != env::kActionCount) {
    throw InvalidInput("A-Net must map 13 inputs to 5 Q-values");
  }
}

double compute_message(const CNet& cnet, const Vector& obs) {
  if (obs.size() != env::kPredatorObsSize) {
    throw InvalidInput("compute_message: observation has length " +
                       std::to_string(obs.size()) + ", expected 12");
  }
  return diffnet::evaluate(cnet.net, obs)(0);
}

Matrix anet_input(const Eigen::Ref<const Matrix>& obs,
                  const Eigen::Ref<const Matrix>& messages) {
  if (obs.rows() != env::kPredatorObsSize || messages.rows() != kMessageSize ||
      obs.cols() != messages.cols()) {
    throw InvalidInput("anet_input: expected [12 x n] observations and [1 x n] messages");
  }
  Matrix input(obs.rows() + messages.rows(), obs.cols());
  input << obs, messages;
  return input;
}

Vector compute_q(const ANet& anet, const Vector& obs, double message) {
  if (obs.size() != env::kPredatorObsSize) {
    throw InvalidInput("compute_q: observation has length " +
                       std::to_string(obs.size()) + ", expected 12");
  }
  Vector input(obs.size() + 1);
  input << obs, message;
  return diffnet::evaluate(anet.net, input);
}

Vector compute_q(const IQLNet& net, const Vector& obs) {
  return diffnet::evaluate(net.net, obs);
}

double EpsilonSchedule::value(int epoch) const {
  if (epoch >= anneal_epochs) return end;
  if (epoch <= 0) return start;
  const double frac = static_cast<double>(epoch) / anneal_epochs;
  return start + (end - start) * frac;
}

void EpsilonSchedule::validate() const {
  if (!(start >= end && end >= 0.0 && start <= 1.0)) {
    throw InvalidInput("epsilon schedule needs 1 >= start >= end >= 0");
  }
  if (anneal_epochs < 1) throw InvalidInput("epsilon anneal_epochs must be >= 1");
}

env::Action greedy_action(const Eigen::Ref<const Vector>& q) {
  if (q.size() != env::kActionCount) {
    throw InvalidInput("select_action: expected 5 Q-values, got " +
                       std::to_string(q.size()));
  }
  Eigen::Index best = 0;
  for (Eigen::Index a = 0; a < q.size(); ++a) {
    if (std::isnan(q(a))) {
      throw InvalidInput("select_action: Q-value for action " + std::to_string(a) +
                         " is NaN");
    }
    if (q(a) > q(best)) best = a;
  }
  return static_cast<env::Action>(best);
}

env::Action select_action(const Eigen::Ref<const Vector>& q, double epsilon,
                          SeedStream& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw InvalidInput("select_action: epsilon must lie in [0, 1]");
  }
  const env::Action greedy = greedy_action(q);
  if (rng.uniform() < epsilon) {
    return static_cast<env::Action>(rng.uniform_index(env::kActionCount));
  }
  return greedy;
}

}  // namespace comm_arena::agents

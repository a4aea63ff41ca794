#pragma once

// Minimal dense feed-forward network engine: batched forward evaluation,
// exact reverse-mode gradients (parameters and inputs), Adam, and a
// finite-difference verifier.
//
// Batches are column-major: an input matrix of shape [in x batch] holds one
// sample per column. Parameter gradients are summed over the batch; input
// gradients keep one column per sample so callers can route them onward
// (the communication channel needs per-sample message gradients).

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "comm_arena/random.hpp"

namespace comm_arena::diffnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kReLU, kIdentity };

std::string_view to_string(Activation activation);
Activation activation_from_string(std::string_view name);

struct DenseLayer {
  Matrix weights;  // [out x in]
  Vector bias;     // [out]
  Activation activation = Activation::kIdentity;

  Eigen::Index in() const { return weights.cols(); }
  Eigen::Index out() const { return weights.rows(); }
};

class DenseNet {
 public:
  DenseNet() = default;

  // Throws InvalidInput if layer dimensions do not chain or a parameter is
  // not finite.
  explicit DenseNet(std::vector<DenseLayer> layers);

  // widths = {in, hidden..., out}. Weights uniform in +-1/sqrt(fan_in),
  // biases zero. Hidden layers use `hidden`, the last layer `output`.
  static DenseNet create(std::span<const Eigen::Index> widths,
                         Activation hidden, Activation output,
                         SeedStream& rng);

  Eigen::Index input_size() const;
  Eigen::Index output_size() const;
  std::size_t layer_count() const { return layers_.size(); }
  std::size_t parameter_count() const;
  bool empty() const { return layers_.empty(); }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }

  // Values may be edited in place; shapes must be left alone.
  DenseLayer& mutable_layer(std::size_t i) { return layers_.at(i); }

  bool all_finite() const;

  friend bool operator==(const DenseNet& a, const DenseNet& b);

 private:
  std::vector<DenseLayer> layers_;
};

struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre_activations;
  std::vector<Matrix> post_activations;

  const Matrix& output() const { return post_activations.back(); }
  Eigen::Index batch_size() const { return input.cols(); }
};

struct LayerGradient {
  Matrix weights;
  Vector bias;
};

struct GradientSet {
  std::vector<LayerGradient> layers;
  Matrix input_gradient;  // [in x batch]

  static GradientSet zeros_like(const DenseNet& net);

  GradientSet& operator+=(const GradientSet& other);
  bool all_finite() const;
};

ForwardTrace forward(const DenseNet& net, const Matrix& inputs);
ForwardTrace forward(const DenseNet& net, const Vector& input);

// Output only; skips storing the trace.
Matrix evaluate(const DenseNet& net, const Matrix& inputs);
Vector evaluate(const DenseNet& net, const Vector& input);

// Gradients of sum over samples of (output . output_gradient). The ReLU
// subgradient at a pre-activation of exactly zero is zero.
GradientSet backward(const DenseNet& net, const ForwardTrace& trace,
                     const Eigen::Ref<const Matrix>& output_gradient);

struct AdamHyperparameters {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(const DenseNet& net, AdamHyperparameters hyper = {});

  const AdamHyperparameters& hyperparameters() const { return hyper_; }
  std::size_t step_count() const { return step_count_; }
  const std::vector<LayerGradient>& first_moment() const { return first_; }
  const std::vector<LayerGradient>& second_moment() const { return second_; }

  // For resume files.
  static AdamState restore(AdamHyperparameters hyper, std::size_t step_count,
                           std::vector<LayerGradient> first,
                           std::vector<LayerGradient> second);

  friend void adam_step(DenseNet& net, const GradientSet& grads,
                        AdamState& state);

 private:
  AdamHyperparameters hyper_;
  std::size_t step_count_ = 0;
  std::vector<LayerGradient> first_;
  std::vector<LayerGradient> second_;
};

// Bias-corrected Adam update in place. Throws NonFiniteError (leaving net and
// state untouched) if any gradient component is NaN or infinite.
void adam_step(DenseNet& net, const GradientSet& grads, AdamState& state);

inline DenseNet clone_parameters(const DenseNet& source) { return source; }

// ---- Checkpoints ---------------------------------------------------------
//
// {"0": {"weights": [row-major], "bias": [...], "activation": "relu"}, ...}
// Doubles are written with round-trip precision.

std::string to_checkpoint_json(const DenseNet& net);
DenseNet from_checkpoint_json(std::string_view text);
void save_checkpoint(const DenseNet& net, const std::filesystem::path& path);
DenseNet load_checkpoint(const std::filesystem::path& path);

// ---- Finite-difference verification --------------------------------------

struct GradCheckReport {
  bool passed = false;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  // Components whose central difference straddled a ReLU kink.
  std::size_t skipped = 0;
  std::string worst_component;
};

// Relative error |a - n| / max(|a|, |n|, kRelativeErrorFloor).
inline constexpr double kRelativeErrorFloor = 1e-6;

// Compares backward() against central differences of L = output . g, with g
// a fixed pseudo-random direction, for every parameter and input component.
GradCheckReport finite_difference_check(const DenseNet& net,
                                        const Vector& input, double h,
                                        double tol);

// Same comparison against a caller-supplied analytic gradient for the scalar
// L = output . output_gradient.
GradCheckReport compare_with_finite_differences(const DenseNet& net,
                                                const Vector& input,
                                                const Vector& output_gradient,
                                                const GradientSet& analytic,
                                                double h, double tol);

}  // namespace comm_arena::diffnet

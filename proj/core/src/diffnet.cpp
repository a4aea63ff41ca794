#include "comm_arena/diffnet.hpp"

#include <cmath>
#include <string>

#include "comm_arena/error.hpp"

namespace comm_arena::diffnet {

namespace {

void apply_activation(Activation activation, Matrix& values) {
  if (activation == Activation::kReLU) values = values.cwiseMax(0.0);
}

// d(post)/d(pre) applied to an incoming gradient, in place.
void apply_activation_derivative(Activation activation, const Matrix& pre,
                                 Matrix& grad) {
  if (activation == Activation::kReLU) {
    grad = (pre.array() > 0.0).select(grad, 0.0);
  }
}

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::kReLU:
      return "relu";
    case Activation::kIdentity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::kReLU;
  if (name == "identity") return Activation::kIdentity;
  throw InvalidInput("unknown activation '" + std::string(name) + "'");
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    if (layer.bias.size() != layer.out()) {
      throw InvalidInput("layer " + std::to_string(i) + ": bias length " +
                         std::to_string(layer.bias.size()) +
                         " does not match weight rows " +
                         std::to_string(layer.out()));
    }
    if (layer.out() == 0 || layer.in() == 0) {
      throw InvalidInput("layer " + std::to_string(i) + ": empty layer");
    }
    if (i > 0 && layers_[i - 1].out() != layer.in()) {
      throw InvalidInput("layer " + std::to_string(i) + ": input width " +
                         std::to_string(layer.in()) +
                         " does not chain with previous output " +
                         std::to_string(layers_[i - 1].out()));
    }
  }
  if (!all_finite()) throw InvalidInput("DenseNet: non-finite parameter");
}

DenseNet DenseNet::create(std::span<const Eigen::Index> widths,
                          Activation hidden, Activation output,
                          SeedStream& rng) {
  if (widths.size() < 2) throw InvalidInput("DenseNet::create: need >= 2 widths");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const Eigen::Index in = widths[i];
    const Eigen::Index out = widths[i + 1];
    if (in <= 0 || out <= 0) throw InvalidInput("DenseNet::create: zero width");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    DenseLayer layer;
    layer.weights.resize(out, in);
    // Row-major fill order so the draw sequence matches the checkpoint layout.
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) {
        layer.weights(r, c) = rng.uniform(-bound, bound);
      }
    }
    layer.bias = Vector::Zero(out);
    layer.activation = (i + 2 == widths.size()) ? output : hidden;
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

Eigen::Index DenseNet::input_size() const {
  return layers_.empty() ? 0 : layers_.front().in();
}

Eigen::Index DenseNet::output_size() const {
  return layers_.empty() ? 0 : layers_.back().out();
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  }
  return n;
}

bool DenseNet::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

bool operator==(const DenseNet& a, const DenseNet& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    const auto& x = a.layers_[i];
    const auto& y = b.layers_[i];
    if (x.activation != y.activation) return false;
    if (x.weights.rows() != y.weights.rows() ||
        x.weights.cols() != y.weights.cols()) {
      return false;
    }
    if (x.weights != y.weights || x.bias != y.bias) return false;
  }
  return true;
}

GradientSet GradientSet::zeros_like(const DenseNet& net) {
  GradientSet grads;
  grads.layers.reserve(net.layer_count());
  for (const auto& layer : net.layers()) {
    grads.layers.push_back(
        {Matrix::Zero(layer.out(), layer.in()), Vector::Zero(layer.out())});
  }
  grads.input_gradient = Matrix::Zero(net.input_size(), 1);
  return grads;
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  if (other.layers.size() != layers.size()) {
    throw InvalidInput("GradientSet: layer count mismatch");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weights += other.layers[i].weights;
    layers[i].bias += other.layers[i].bias;
  }
  if (input_gradient.cols() == other.input_gradient.cols()) {
    input_gradient += other.input_gradient;
  } else {
    Matrix stacked(input_gradient.rows(),
                   input_gradient.cols() + other.input_gradient.cols());
    stacked << input_gradient, other.input_gradient;
    input_gradient = std::move(stacked);
  }
  return *this;
}

bool GradientSet::all_finite() const {
  for (const auto& layer : layers) {
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
  }
  return input_gradient.allFinite();
}

ForwardTrace forward(const DenseNet& net, const Matrix& inputs) {
  if (net.empty()) throw InvalidInput("forward: empty network");
  if (inputs.rows() != net.input_size()) {
    throw InvalidInput("forward: input has " + std::to_string(inputs.rows()) +
                       " rows, network expects " +
                       std::to_string(net.input_size()));
  }
  ForwardTrace trace;
  trace.input = inputs;
  trace.pre_activations.reserve(net.layer_count());
  trace.post_activations.reserve(net.layer_count());
  const Matrix* current = &trace.input;
  for (const auto& layer : net.layers()) {
    Matrix pre(layer.out(), current->cols());
    pre.noalias() = layer.weights * *current;
    pre.colwise() += layer.bias;
    Matrix post = pre;
    apply_activation(layer.activation, post);
    trace.pre_activations.push_back(std::move(pre));
    trace.post_activations.push_back(std::move(post));
    current = &trace.post_activations.back();
  }
  return trace;
}

ForwardTrace forward(const DenseNet& net, const Vector& input) {
  return forward(net, Matrix(input));
}

Matrix evaluate(const DenseNet& net, const Matrix& inputs) {
  if (net.empty()) throw InvalidInput("evaluate: empty network");
  if (inputs.rows() != net.input_size()) {
    throw InvalidInput("evaluate: input has " + std::to_string(inputs.rows()) +
                       " rows, network expects " +
                       std::to_string(net.input_size()));
  }
  Matrix current = inputs;
  for (const auto& layer : net.layers()) {
    Matrix next(layer.out(), current.cols());
    next.noalias() = layer.weights * current;
    next.colwise() += layer.bias;
    apply_activation(layer.activation, next);
    current = std::move(next);
  }
  return current;
}

Vector evaluate(const DenseNet& net, const Vector& input) {
  return evaluate(net, Matrix(input)).col(0);
}

GradientSet backward(const DenseNet& net, const ForwardTrace& trace,
                     const Eigen::Ref<const Matrix>& output_gradient) {
  if (trace.pre_activations.size() != net.layer_count()) {
    throw InvalidInput("backward: trace has " +
                       std::to_string(trace.pre_activations.size()) +
                       " layers, network has " +
                       std::to_string(net.layer_count()));
  }
  if (output_gradient.rows() != net.output_size() ||
      output_gradient.cols() != trace.batch_size()) {
    throw InvalidInput("backward: output gradient " +
                       shape(output_gradient) + " does not match output " +
                       shape(trace.output()));
  }
  GradientSet grads;
  grads.layers.resize(net.layer_count());
  Matrix delta = output_gradient;
  for (std::size_t k = net.layer_count(); k-- > 0;) {
    const auto& layer = net.layer(k);
    apply_activation_derivative(layer.activation, trace.pre_activations[k], delta);
    const Matrix& layer_input = (k == 0) ? trace.input : trace.post_activations[k - 1];
    grads.layers[k].weights.noalias() = delta * layer_input.transpose();
    grads.layers[k].bias = delta.rowwise().sum();
    Matrix upstream(layer.in(), delta.cols());
    upstream.noalias() = layer.weights.transpose() * delta;
    delta = std::move(upstream);
  }
  grads.input_gradient = std::move(delta);
  return grads;
}

AdamState::AdamState(const DenseNet& net, AdamHyperparameters hyper)
    : hyper_(hyper) {
  const auto zeros = GradientSet::zeros_like(net);
  first_ = zeros.layers;
  second_ = zeros.layers;
}

AdamState AdamState::restore(AdamHyperparameters hyper, std::size_t step_count,
                             std::vector<LayerGradient> first,
                             std::vector<LayerGradient> second) {
  if (first.size() != second.size()) {
    throw InvalidInput("AdamState::restore: moment layer counts differ");
  }
  AdamState state;
  state.hyper_ = hyper;
  state.step_count_ = step_count;
  state.first_ = std::move(first);
  state.second_ = std::move(second);
  return state;
}

void adam_step(DenseNet& net, const GradientSet& grads, AdamState& state) {
  if (grads.layers.size() != net.layer_count() ||
      state.first_.size() != net.layer_count()) {
    throw InvalidInput("adam_step: gradient/state shapes do not mirror net");
  }
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    const auto& layer = net.layer(k);
    const auto& g = grads.layers[k];
    if (g.weights.rows() != layer.out() || g.weights.cols() != layer.in() ||
        g.bias.size() != layer.out() ||
        state.first_[k].weights.rows() != layer.out() ||
        state.first_[k].weights.cols() != layer.in()) {
      throw InvalidInput("adam_step: layer " + std::to_string(k) +
                         " shape mismatch");
    }
    if (!g.weights.allFinite() || !g.bias.allFinite()) {
      throw NonFiniteError("adam_step: non-finite gradient in layer " +
                           std::to_string(k));
    }
  }

  const auto& h = state.hyper_;
  ++state.step_count_;
  const double t = static_cast<double>(state.step_count_);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = h.beta1 * m + (1.0 - h.beta1) * grad;
    v = h.beta2 * v + (1.0 - h.beta2) * grad.cwiseProduct(grad);
    param.array() -= h.lr * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + h.eps);
  };
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    auto& layer = net.mutable_layer(k);
    update(layer.weights, grads.layers[k].weights, state.first_[k].weights,
           state.second_[k].weights);
    update(layer.bias, grads.layers[k].bias, state.first_[k].bias,
           state.second_[k].bias);
  }
}

}  // namespace comm_arena::diffnet

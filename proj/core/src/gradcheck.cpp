// Central-difference verification of backward().
//
// Each probe re-evaluates the network forward at perturbed parameters. A
// parameter of layer k only moves one pre-activation unit of that layer, so
// the probe patches that unit, pushes the single changed post-activation into
// layer k+1 through one weight column, and runs the remaining layers in full.
// No quantity from backward() is used to form the numerical estimate.

#include <algorithm>
#include <cmath>
#include <string>

#include "comm_arena/diffnet.hpp"
#include "comm_arena/error.hpp"

namespace comm_arena::diffnet {

namespace {

double activate(Activation activation, double x) {
  return activation == Activation::kReLU ? std::max(0.0, x) : x;
}

bool active(double pre) { return pre > 0.0; }

struct Probe {
  double loss = 0.0;
  bool crossed_kink = false;
};

class Prober {
 public:
  Prober(const DenseNet& net, const Vector& input, const Vector& direction)
      : net_(net), direction_(direction), base_(forward(net, input)) {}

  // Loss with pre-activation `unit` of layer `k` shifted by `delta`.
  Probe shift_unit(std::size_t k, Eigen::Index unit, double delta) const {
    const auto& layer = net_.layer(k);
    const double old_pre = base_.pre_activations[k](unit, 0);
    const double new_pre = old_pre + delta;
    Probe probe;
    if (layer.activation == Activation::kReLU &&
        active(old_pre) != active(new_pre)) {
      probe.crossed_kink = true;
    }
    const double change =
        activate(layer.activation, new_pre) - activate(layer.activation, old_pre);
    if (k + 1 == net_.layer_count()) {
      Vector out = base_.output().col(0);
      out(unit) += change;
      probe.loss = direction_.dot(out);
      return probe;
    }
    const auto& next = net_.layer(k + 1);
    Vector pre = base_.pre_activations[k + 1].col(0) + next.weights.col(unit) * change;
    return finish(k + 1, std::move(pre), probe);
  }

  Probe shift_input(Eigen::Index component, double delta) const {
    Vector x = base_.input.col(0);
    x(component) += delta;
    const auto& first = net_.layer(0);
    Vector pre = first.weights * x + first.bias;
    return finish(0, std::move(pre), Probe{});
  }

  const ForwardTrace& base() const { return base_; }

 private:
  // Completes the forward pass given the full pre-activation of layer k.
  Probe finish(std::size_t k, Vector pre, Probe probe) const {
    for (;;) {
      const auto& layer = net_.layer(k);
      if (layer.activation == Activation::kReLU) {
        const auto& base_pre = base_.pre_activations[k];
        for (Eigen::Index u = 0; u < pre.size(); ++u) {
          if (active(pre(u)) != active(base_pre(u, 0))) probe.crossed_kink = true;
        }
      }
      Vector post = pre.unaryExpr([&](double v) { return activate(layer.activation, v); });
      if (k + 1 == net_.layer_count()) {
        probe.loss = direction_.dot(post);
        return probe;
      }
      const auto& next = net_.layer(k + 1);
      pre = next.weights * post + next.bias;
      ++k;
    }
  }

  const DenseNet& net_;
  const Vector& direction_;
  ForwardTrace base_;
};

class Comparator {
 public:
  Comparator(double h, double tol) : h_(h), tol_(tol) {}

  template <typename NameFn>
  void compare(double analytic, const Probe& plus, const Probe& minus,
               NameFn&& name) {
    if (plus.crossed_kink || minus.crossed_kink) {
      ++report_.skipped;
      return;
    }
    const double numeric = (plus.loss - minus.loss) / (2.0 * h_);
    const double scale =
        std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
    const double err = std::abs(analytic - numeric) / scale;
    ++report_.checked;
    if (err > report_.max_relative_error || report_.worst_component.empty()) {
      report_.max_relative_error = std::max(err, report_.max_relative_error);
      report_.worst_component = name();
    }
  }

  GradCheckReport finish() {
    report_.passed = report_.max_relative_error <= tol_;
    return report_;
  }

 private:
  double h_;
  double tol_;
  GradCheckReport report_;
};

}  // namespace

GradCheckReport compare_with_finite_differences(const DenseNet& net,
                                                const Vector& input,
                                                const Vector& output_gradient,
                                                const GradientSet& analytic,
                                                double h, double tol) {
  if (!(h > 0.0) || !(tol > 0.0)) {
    throw InvalidInput("finite-difference check needs h > 0 and tol > 0");
  }
  if (output_gradient.size() != net.output_size()) {
    throw InvalidInput("finite-difference check: output gradient length mismatch");
  }
  if (analytic.layers.size() != net.layer_count()) {
    throw InvalidInput("finite-difference check: gradient layer count mismatch");
  }
  Prober prober(net, input, output_gradient);
  Comparator cmp(h, tol);

  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    const auto& layer = net.layer(k);
    const auto& grad = analytic.layers[k];
    const Vector& layer_input =
        (k == 0) ? Vector(prober.base().input.col(0))
                 : Vector(prober.base().post_activations[k - 1].col(0));
    for (Eigen::Index i = 0; i < layer.out(); ++i) {
      for (Eigen::Index j = 0; j < layer.in(); ++j) {
        // W(i,j) += h moves pre(i) by h * x(j).
        const double step = h * layer_input(j);
        cmp.compare(grad.weights(i, j), prober.shift_unit(k, i, step),
                    prober.shift_unit(k, i, -step),
                    [&] {
                      return "layer " + std::to_string(k) + " weight (" +
                             std::to_string(i) + "," + std::to_string(j) + ")";
                    });
      }
      cmp.compare(grad.bias(i), prober.shift_unit(k, i, h),
                  prober.shift_unit(k, i, -h),
                  [&] {
                    return "layer " + std::to_string(k) + " bias " +
                           std::to_string(i);
                  });
    }
  }
  for (Eigen::Index j = 0; j < net.input_size(); ++j) {
    cmp.compare(analytic.input_gradient(j, 0), prober.shift_input(j, h),
                prober.shift_input(j, -h),
                [&] { return "input " + std::to_string(j); });
  }
  return cmp.finish();
}

GradCheckReport finite_difference_check(const DenseNet& net,
                                        const Vector& input, double h,
                                        double tol) {
  SeedStream rng(0x5eedf00dULL);
  Vector direction(net.output_size());
  for (Eigen::Index i = 0; i < direction.size(); ++i) {
    direction(i) = rng.uniform(-1.0, 1.0);
  }
  const auto trace = forward(net, input);
  const auto grads = backward(net, trace, direction);
  return compare_with_finite_differences(net, input, direction, grads, h, tol);
}

}  // namespace comm_arena::diffnet

// Copyright 2026 The fmcts Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal differentiable kernel: dense layers, fixed MLPs, losses, the
// straight-through Gumbel-Sigmoid and AdamW. Everything is templated on the
// scalar so the float32 training path and the float64 gradient oracle share
// one implementation.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fmcts/errors.hpp"

namespace fmcts::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
void check_finite(const Matrix<T>& m, const std::string& what) {
  if (!m.allFinite()) fail(ErrorCode::kNumericFault, "non-finite values in " + what);
}

// Weights are stored as [in x out] so a batch forward is X * W + b.
template <typename T>
struct ParamTensor {
  std::string name;
  std::vector<std::size_t> shape;
  Matrix<T> data;
  Matrix<T> grad;

  ParamTensor() = default;
  ParamTensor(std::string n, std::vector<std::size_t> s, Eigen::Index rows,
              Eigen::Index cols)
      : name(std::move(n)), shape(std::move(s)),
        data(Matrix<T>::Zero(rows, cols)), grad(Matrix<T>::Zero(rows, cols)) {}

  std::size_t size() const { return static_cast<std::size_t>(data.size()); }
  void zero_grad() { grad.setZero(); }
};

enum class Activation { kNone, kRelu, kTanh, kSigmoid };

template <typename T>
Matrix<T> activate(const Matrix<T>& x, Activation a) {
  switch (a) {
    case Activation::kNone: return x;
    case Activation::kRelu: return x.cwiseMax(T(0));
    case Activation::kTanh: return x.array().tanh().matrix();
    case Activation::kSigmoid:
      return (T(1) / (T(1) + (-x.array()).exp())).matrix();
  }
  return x;
}

// Gradient through an activation, given its input `x`, output `y` and the
// upstream gradient.
template <typename T>
Matrix<T> activate_backward(const Matrix<T>& x, const Matrix<T>& y,
                            const Matrix<T>& dy, Activation a) {
  switch (a) {
    case Activation::kNone: return dy;
    case Activation::kRelu:
      return (x.array() > T(0)).select(dy.array(), T(0)).matrix();
    case Activation::kTanh:
      return (dy.array() * (T(1) - y.array().square())).matrix();
    case Activation::kSigmoid:
      return (dy.array() * y.array() * (T(1) - y.array())).matrix();
  }
  return dy;
}

template <typename T>
Matrix<T> relu(const Matrix<T>& x) { return activate(x, Activation::kRelu); }
template <typename T>
Matrix<T> sigmoid(const Matrix<T>& x) { return activate(x, Activation::kSigmoid); }

// Row-wise softmax stabilized by max subtraction.
template <typename T>
Matrix<T> softmax(const Matrix<T>& logits) {
  Matrix<T> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const T mx = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

// Jacobian-vector product of the row-wise softmax.
template <typename T>
Matrix<T> softmax_backward(const Matrix<T>& probs, const Matrix<T>& dprobs) {
  Matrix<T> out(probs.rows(), probs.cols());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const T dot = probs.row(r).dot(dprobs.row(r));
    out.row(r) = (probs.row(r).array() * (dprobs.row(r).array() - dot)).matrix();
  }
  return out;
}

template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(const std::string& name, std::size_t in, std::size_t out)
      : weight_(name + ".weight", {in, out}, static_cast<Eigen::Index>(in),
                static_cast<Eigen::Index>(out)),
        bias_(name + ".bias", {out}, 1, static_cast<Eigen::Index>(out)) {}

  // Uniform(-s, s) with s = scale / sqrt(fan_in); biases start at zero.
  void initialize(std::mt19937_64& rng, double scale = 1.0) {
    const double bound = scale / std::sqrt(static_cast<double>(weight_.data.rows()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < weight_.data.size(); ++i) {
      weight_.data.data()[i] = static_cast<T>(dist(rng));
    }
    bias_.data.setZero();
  }

  std::size_t in_features() const { return static_cast<std::size_t>(weight_.data.rows()); }
  std::size_t out_features() const { return static_cast<std::size_t>(weight_.data.cols()); }

  Matrix<T> forward(const Matrix<T>& x) const {
    if (static_cast<std::size_t>(x.cols()) != in_features()) {
      fail(ErrorCode::kInvalidArgument,
           weight_.name + ": input width " + std::to_string(x.cols()) +
               " != " + std::to_string(in_features()));
    }
    Matrix<T> y = x * weight_.data;
    y.rowwise() += bias_.data.row(0);
    return y;
  }

  // Accumulates parameter gradients and returns the input gradient.
  Matrix<T> backward(const Matrix<T>& x, const Matrix<T>& dy) {
    if (dy.cols() != weight_.data.cols() || dy.rows() != x.rows()) {
      fail(ErrorCode::kInvalidArgument, weight_.name + ": gradient shape mismatch");
    }
    weight_.grad.noalias() += x.transpose() * dy;
    bias_.grad.row(0) += dy.colwise().sum();
    return dy * weight_.data.transpose();
  }

  ParamTensor<T>& weight() { return weight_; }
  ParamTensor<T>& bias() { return bias_; }
  const ParamTensor<T>& weight() const { return weight_; }
  const ParamTensor<T>& bias() const { return bias_; }

 private:
  ParamTensor<T> weight_;
  ParamTensor<T> bias_;
};

// Fully connected network: ReLU between layers, `output` on the last one.
template <typename T>
class Mlp {
 public:
  struct Tape {
    std::vector<Matrix<T>> inputs;  // input of each layer
    std::vector<Matrix<T>> pre;     // pre-activation of each layer
    Matrix<T> output;
  };

  Mlp() = default;
  Mlp(const std::string& name, const std::vector<std::size_t>& widths,
      Activation output)
      : name_(name), output_(output) {
    require(widths.size() >= 2, name + ": an MLP needs at least two widths");
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      layers_.emplace_back(name + "." + std::to_string(l), widths[l], widths[l + 1]);
    }
  }

  void initialize(std::mt19937_64& rng, double output_scale = 1.0) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      layers_[l].initialize(rng, l + 1 == layers_.size() ? output_scale : 1.0);
    }
  }

  const std::string& name() const { return name_; }
  std::size_t in_features() const { return layers_.front().in_features(); }
  std::size_t out_features() const { return layers_.back().out_features(); }
  Activation output_activation() const { return output_; }

  Matrix<T> forward(const Matrix<T>& x, Tape* tape = nullptr) const {
    Matrix<T> h = x;
    if (tape) {
      tape->inputs.clear();
      tape->pre.clear();
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix<T> pre = layers_[l].forward(h);
      const bool last = l + 1 == layers_.size();
      Matrix<T> post = activate(pre, last ? output_ : Activation::kRelu);
      if (tape) {
        tape->inputs.push_back(std::move(h));
        tape->pre.push_back(std::move(pre));
      }
      h = std::move(post);
    }
    if (tape) tape->output = h;
    return h;
  }

  Matrix<T> backward(const Tape& tape, const Matrix<T>& d_out) {
    Matrix<T> d = d_out;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const bool last = l + 1 == layers_.size();
      const Matrix<T>& y = last ? tape.output : tape.inputs[l + 1];
      d = activate_backward(tape.pre[l], y, d, last ? output_ : Activation::kRelu);
      d = layers_[l].backward(tape.inputs[l], d);
    }
    return d;
  }

  std::vector<ParamTensor<T>*> params() {
    std::vector<ParamTensor<T>*> out;
    for (auto& layer : layers_) {
      out.push_back(&layer.weight());
      out.push_back(&layer.bias());
    }
    return out;
  }
  std::vector<const ParamTensor<T>*> params() const {
    std::vector<const ParamTensor<T>*> out;
    for (const auto& layer : layers_) {
      out.push_back(&layer.weight());
      out.push_back(&layer.bias());
    }
    return out;
  }

  template <typename U>
  Mlp<U> cast() const {
    std::vector<std::size_t> widths{in_features()};
    for (const auto& layer : layers_) widths.push_back(layer.out_features());
    Mlp<U> out(name_, widths, output_);
    auto src = params();
    auto dst = out.params();
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i]->data = src[i]->data.template cast<U>();
    }
    return out;
  }

 private:
  std::string name_;
  std::vector<Dense<T>> layers_;
  Activation output_ = Activation::kNone;
};

template <typename T>
struct LossValue {
  T value{};
  Matrix<T> grad;
};

// Sum over all entries of (pred - target)^2, i.e. the squared L2 norm.
template <typename T>
LossValue<T> squared_error(const Matrix<T>& pred, const Matrix<T>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    fail(ErrorCode::kInvalidArgument, "squared_error: shape mismatch");
  }
  const Matrix<T> diff = pred - target;
  return {diff.squaredNorm(), T(2) * diff};
}

// Mean over entries of (pred - target)^2.
template <typename T>
LossValue<T> mse(const Matrix<T>& pred, const Matrix<T>& target) {
  auto l = squared_error(pred, target);
  const T n = static_cast<T>(std::max<Eigen::Index>(pred.size(), 1));
  l.value /= n;
  l.grad /= n;
  return l;
}

// Sum over rows of -sum(target * log_softmax(logits)).
template <typename T>
LossValue<T> cross_entropy(const Matrix<T>& logits, const Matrix<T>& target) {
  if (logits.rows() != target.rows() || logits.cols() != target.cols()) {
    fail(ErrorCode::kInvalidArgument, "cross_entropy: shape mismatch");
  }
  LossValue<T> out{T(0), Matrix<T>(logits.rows(), logits.cols())};
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const T total = target.row(r).sum();
    if ((target.row(r).array() < T(0)).any() || std::abs(total - T(1)) > T(1e-3)) {
      fail(ErrorCode::kInvalidDistribution, "cross_entropy: target row is not a distribution");
    }
    const T mx = logits.row(r).maxCoeff();
    const T lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.value -= (target.row(r).array() * (logits.row(r).array() - lse)).sum();
    out.grad.row(r) =
        (logits.row(r).array() - lse).exp().matrix() - target.row(r);
  }
  return out;
}

template <typename T>
LossValue<T> l1(const Matrix<T>& values) {
  return {values.cwiseAbs().sum(),
          values.unaryExpr([](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); })};
}

inline constexpr double kProbabilityClamp = 1e-6;

struct GumbelSample {
  int hard = 0;
  double relaxed = 0.0;
  double grad_dp = 0.0;  // d relaxed / d p, the straight-through gradient
};

// relaxed = sigmoid((logit(p) + logit(u)) / beta); the forward pass emits
// hard = [relaxed > 0.5] while gradients use d relaxed / dp.
GumbelSample gumbel_sigmoid_st(double p, double u, double beta);

template <typename T>
T global_grad_norm(std::span<ParamTensor<T>* const> params) {
  T sq = T(0);
  for (const auto* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

// Scales all gradients so their joint L2 norm is at most max_norm. Returns the
// norm before clipping.
template <typename T>
T clip_global_norm(std::span<ParamTensor<T>* const> params, T max_norm) {
  const T norm = global_grad_norm(params);
  if (!std::isfinite(static_cast<double>(norm))) {
    fail(ErrorCode::kNumericFault, "non-finite gradient norm");
  }
  if (norm > max_norm && norm > T(0)) {
    const T scale = max_norm / norm;
    for (auto* p : params) p->grad *= scale;
  }
  return norm;
}

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
  double max_grad_norm = 100.0;
};

// Adam with decoupled weight decay: w <- w - lr*wd*w, then the bias-corrected
// moment update. Gradients are clipped to max_grad_norm first.
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<ParamTensor<T>*> params, AdamWConfig config)
      : params_(std::move(params)), config_(config) {
    for (const auto* p : params_) {
      first_.push_back(Matrix<T>::Zero(p->data.rows(), p->data.cols()));
      second_.push_back(Matrix<T>::Zero(p->data.rows(), p->data.cols()));
    }
  }

  // Returns the pre-clip gradient norm.
  T step() {
    const T norm = clip_global_norm<T>(params_, static_cast<T>(config_.max_grad_norm));
    ++steps_;
    const T lr = static_cast<T>(config_.learning_rate);
    const T b1 = static_cast<T>(config_.beta1);
    const T b2 = static_cast<T>(config_.beta2);
    const T c1 = T(1) - static_cast<T>(std::pow(config_.beta1, static_cast<double>(steps_)));
    const T c2 = T(1) - static_cast<T>(std::pow(config_.beta2, static_cast<double>(steps_)));
    const T eps = static_cast<T>(config_.epsilon);
    const T decay = T(1) - lr * static_cast<T>(config_.weight_decay);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      first_[i] = b1 * first_[i] + (T(1) - b1) * p.grad;
      second_[i] = b2 * second_[i] + (T(1) - b2) * p.grad.cwiseProduct(p.grad);
      p.data *= decay;
      p.data.array() -= lr * (first_[i].array() / c1) /
                        ((second_[i].array() / c2).sqrt() + eps);
      check_finite(p.data, p.name);
    }
    return norm;
  }

  std::uint64_t steps() const { return steps_; }
  const AdamWConfig& config() const { return config_; }

 private:
  std::vector<ParamTensor<T>*> params_;
  AdamWConfig config_;
  std::vector<Matrix<T>> first_;
  std::vector<Matrix<T>> second_;
  std::uint64_t steps_ = 0;
};

struct GradientCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  std::string worst_param;
  bool passed = true;
};

// Relative error |a - n| / max(|a|, |n|, floor); the floor keeps entries whose
// true gradient is ~0 from dominating the report.
inline double gradient_relative_error(double analytic, double numeric,
                                      double floor = 1e-3) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Compares the gradients already accumulated in `params` against central
// differences of `loss`. At most `max_per_tensor` entries per tensor are
// probed, spread evenly.
template <typename T>
GradientCheckReport finite_difference_check(
    const std::function<T()>& loss, const std::vector<ParamTensor<T>*>& params,
    double tolerance, double h = 1e-5, std::size_t max_per_tensor = 0) {
  GradientCheckReport report;
  for (auto* p : params) {
    const auto n = static_cast<std::size_t>(p->data.size());
    const std::size_t probes = max_per_tensor == 0 ? n : std::min(n, max_per_tensor);
    for (std::size_t k = 0; k < probes; ++k) {
      const std::size_t idx = probes == n ? k : k * n / probes;
      T& w = p->data.data()[idx];
      const T saved = w;
      w = saved + static_cast<T>(h);
      const double up = static_cast<double>(loss());
      w = saved - static_cast<T>(h);
      const double down = static_cast<double>(loss());
      w = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = static_cast<double>(p->grad.data()[idx]);
      const double abs_err = std::abs(analytic - numeric);
      const double rel_err = gradient_relative_error(analytic, numeric);
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel_err > report.max_rel_error) {
        report.max_rel_error = rel_err;
        report.worst_param = p->name + "[" + std::to_string(idx) + "]";
      }
      ++report.checked;
    }
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace fmcts::nn

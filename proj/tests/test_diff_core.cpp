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

#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "fmcts/checkpoint.hpp"
#include "fmcts/errors.hpp"
#include "fmcts/models.hpp"
#include "fmcts/nn.hpp"

using namespace fmcts;
using nn::Matrix;

namespace {

Matrix<double> random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Scalar objective L = sum(W .* f(x)) for a fixed random W, so dL/df = W.
double objective(const nn::Mlp<double>& mlp, const Matrix<double>& x, const Matrix<double>& w) {
  return mlp.forward(x).cwiseProduct(w).sum();
}

}  // namespace

TEST_CASE("Mlp backward matches central finite differences") {
  std::mt19937_64 rng(3);
  for (auto act : {nn::Activation::kNone, nn::Activation::kTanh, nn::Activation::kSigmoid}) {
    nn::Mlp<double> mlp("m", {5, 7, 6, 3}, act);
    mlp.initialize(rng);
    const Matrix<double> x = random_matrix(4, 5, rng);
    const Matrix<double> w = random_matrix(4, 3, rng);
    typename nn::Mlp<double>::Tape tape;
    mlp.forward(x, &tape);
    for (auto* p : mlp.params()) p->zero_grad();
    const Matrix<double> dx = mlp.backward(tape, w);

    const double h = 1e-6;
    for (auto* p : mlp.params()) {
      for (Eigen::Index i = 0; i < p->data.size(); ++i) {
        const double orig = p->data.data()[i];
        p->data.data()[i] = orig + h;
        const double up = objective(mlp, x, w);
        p->data.data()[i] = orig - h;
        const double down = objective(mlp, x, w);
        p->data.data()[i] = orig;
        CHECK(p->grad.data()[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5));
      }
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Matrix<double> xp = x, xm = x;
      xp.data()[i] += h;
      xm.data()[i] -= h;
      const double fd = (objective(mlp, xp, w) - objective(mlp, xm, w)) / (2 * h);
      CHECK(dx.data()[i] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("loss gradients match finite differences") {
  std::mt19937_64 rng(5);
  const Matrix<double> logits = random_matrix(3, 4, rng);
  Matrix<double> target = nn::softmax<double>(random_matrix(3, 4, rng));
  const Matrix<double> pred = random_matrix(3, 4, rng);
  const double h = 1e-6;

  const auto ce = nn::cross_entropy(logits, target);
  const auto se = nn::squared_error(pred, target);
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    Matrix<double> a = logits, b = logits;
    a.data()[i] += h;
    b.data()[i] -= h;
    const double fd = (nn::cross_entropy(a, target).value - nn::cross_entropy(b, target).value) / (2 * h);
    CHECK(ce.grad.data()[i] == doctest::Approx(fd).epsilon(1e-6));
    Matrix<double> c = pred, d = pred;
    c.data()[i] += h;
    d.data()[i] -= h;
    const double fd2 = (nn::squared_error(c, target).value - nn::squared_error(d, target).value) / (2 * h);
    CHECK(se.grad.data()[i] == doctest::Approx(fd2).epsilon(1e-6));
  }
}

TEST_CASE("cross entropy of a uniform prediction is log of the width") {
  const Matrix<double> logits = Matrix<double>::Zero(1, 343);
  Matrix<double> target = Matrix<double>::Zero(1, 343);
  target(0, 17) = 1.0;
  CHECK(nn::cross_entropy(logits, target).value == doctest::Approx(std::log(343.0)));
  target(0, 17) = 0.5;
  CHECK_THROWS_AS(nn::cross_entropy(logits, target), Error);
}

TEST_CASE("softmax_backward matches finite differences") {
  std::mt19937_64 rng(9);
  const Matrix<double> x = random_matrix(2, 5, rng);
  const Matrix<double> w = random_matrix(2, 5, rng);
  const Matrix<double> g = nn::softmax_backward<double>(nn::softmax<double>(x), w);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix<double> a = x, b = x;
    a.data()[i] += h;
    b.data()[i] -= h;
    const double fd = (nn::softmax<double>(a).cwiseProduct(w).sum() -
                       nn::softmax<double>(b).cwiseProduct(w).sum()) / (2 * h);
    CHECK(g.data()[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("straight-through Gumbel-Sigmoid values") {
  // u = 0.5 makes the noise term vanish: relaxed = sigmoid(logit(p) / beta).
  auto s = nn::gumbel_sigmoid_st(0.5, 0.5, 1.0);
  CHECK(s.relaxed == doctest::Approx(0.5));
  CHECK(s.hard == 0);  // strict threshold
  CHECK(s.grad_dp == doctest::Approx(1.0));

  s = nn::gumbel_sigmoid_st(0.8, 0.5, 1.0);
  CHECK(s.relaxed == doctest::Approx(0.8));
  CHECK(s.hard == 1);
  CHECK(s.grad_dp == doctest::Approx(1.0));

  // beta = 2: relaxed = sigmoid(log(4) / 2) = 2/3;
  // d/dp = r(1-r) / (beta p (1-p)) = (2/9) / (2 * 0.16).
  s = nn::gumbel_sigmoid_st(0.8, 0.5, 2.0);
  CHECK(s.relaxed == doctest::Approx(2.0 / 3.0));
  CHECK(s.grad_dp == doctest::Approx((2.0 / 9.0) / 0.32));

  // Noise shifts the logit: p = 0.5, u = 0.8 gives sigmoid(log 4) = 0.8.
  s = nn::gumbel_sigmoid_st(0.5, 0.8, 1.0);
  CHECK(s.relaxed == doctest::Approx(0.8));
  CHECK(s.hard == 1);

  // Saturated probabilities are clamped, so everything stays finite.
  for (double p : {0.0, 1.0}) {
    s = nn::gumbel_sigmoid_st(p, 0.5, 1.0);
    CHECK(std::isfinite(s.relaxed));
    CHECK(std::isfinite(s.grad_dp));
    CHECK(s.hard == (p > 0.5 ? 1 : 0));
  }
}

TEST_CASE("Gumbel-Sigmoid gradient matches the derivative of the relaxation") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unif(0.02, 0.98);
  for (int i = 0; i < 200; ++i) {
    const double p = unif(rng), u = unif(rng), beta = 0.25 + unif(rng) * 2.0;
    const double h = 1e-7;
    const double fd = (nn::gumbel_sigmoid_st(p + h, u, beta).relaxed -
                       nn::gumbel_sigmoid_st(p - h, u, beta).relaxed) / (2 * h);
    CHECK(nn::gumbel_sigmoid_st(p, u, beta).grad_dp == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("Gumbel-Sigmoid hard samples are Bernoulli(p) at beta 1") {
  std::mt19937_64 rng(2);
  for (double p : {0.1, 0.5, 0.9}) {
    int ones = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) ones += nn::gumbel_sigmoid_st(p, open_uniform(rng), 1.0).hard;
    // Binomial standard error is at most 0.0016; allow 4 sigma.
    CHECK(std::abs(static_cast<double>(ones) / n - p) < 0.0064);
  }
}

TEST_CASE("AdamW follows the decoupled-decay update") {
  nn::ParamTensor<double> w("w", {2}, 1, 2);
  w.data << 1.0, -2.0;
  nn::AdamWConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.01;
  nn::AdamW<double> opt({&w}, cfg);
  // With a constant gradient the bias-corrected moments equal g and g^2, so
  // each step moves by lr * g / (|g| + eps) after decaying by (1 - lr * wd).
  double w0 = 1.0, w1 = -2.0;
  for (int step = 0; step < 3; ++step) {
    w.grad << 0.5, -4.0;
    opt.step();
    w0 = w0 * (1 - 0.1 * 0.01) - 0.1 * 0.5 / (0.5 + 1e-8);
    w1 = w1 * (1 - 0.1 * 0.01) + 0.1 * 4.0 / (4.0 + 1e-8);
    CHECK(w.data(0, 0) == doctest::Approx(w0).epsilon(1e-12));
    CHECK(w.data(0, 1) == doctest::Approx(w1).epsilon(1e-12));
  }
  CHECK(opt.steps() == 3);
}

TEST_CASE("global norm clipping") {
  nn::ParamTensor<double> a("a", {2}, 1, 2), b("b", {1}, 1, 1);
  a.grad << 120.0, 0.0;
  b.grad << 160.0;  // joint norm 200
  std::vector<nn::ParamTensor<double>*> ps{&a, &b};
  CHECK(nn::clip_global_norm<double>(ps, 100.0) == doctest::Approx(200.0));
  CHECK(a.grad(0, 0) == doctest::Approx(60.0));
  CHECK(b.grad(0, 0) == doctest::Approx(80.0));
  CHECK(nn::clip_global_norm<double>(ps, 100.0) == doctest::Approx(100.0));
  CHECK(a.grad(0, 0) == doctest::Approx(60.0));
  b.grad(0, 0) = std::nan("");
  CHECK_THROWS_AS(nn::clip_global_norm<double>(ps, 100.0), Error);
}

TEST_CASE("value transform and its inverse") {
  CHECK(value_transform(0.0) == 0.0);
  CHECK(value_transform(3.0) == doctest::Approx(1.003));
  CHECK(value_transform(-8.0) == doctest::Approx(-2.008));
  for (double x : {-1000.0, -7.5, -0.1, 0.0, 0.3, 42.0, 1800.0, 1e5}) {
    CHECK(inverse_value_transform(value_transform(x)) == doctest::Approx(x).epsilon(1e-9));
  }
}

TEST_CASE("checkpoint round trip") {
  Checkpoint ckpt;
  ckpt.metadata = {{"steps", 7}, {"note", "x"}};
  ckpt.tensors.push_back({"a.weight", {2, 3}, {1, 2, 3, 4, 5, 6}});
  ckpt.tensors.push_back({"a.bias", {3}, {-1.5f, 0.0f, 1e-30f}});
  const auto path = std::filesystem::temp_directory_path() / "fmcts_test_ckpt.bin";
  write_checkpoint(path, ckpt);
  const auto back = read_checkpoint(path);
  CHECK(back.metadata == ckpt.metadata);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.tensor("a.weight").shape == std::vector<std::size_t>{2, 3});
  CHECK(back.tensor("a.bias").data == ckpt.tensors[1].data);
  CHECK_THROWS_AS(back.tensor("missing"), Error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_checkpoint(path), Error);
}

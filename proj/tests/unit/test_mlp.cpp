#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "../support/fd.hpp"
#include "common/error.hpp"
#include "nn/mlp.hpp"

using namespace eidc;
using namespace eidc::nn;

namespace {

// Plain nested-loop forward pass used as the reference.
std::vector<double> reference_forward(const MlpParams& p, std::vector<double> x) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= p.input_scale[static_cast<Eigen::Index>(i)];
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const auto& w = p.weights[l];
    std::vector<double> y(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double acc = p.biases[l][r];
      for (Eigen::Index c = 0; c < w.cols(); ++c) acc += w(r, c) * x[static_cast<std::size_t>(c)];
      const bool last = l + 1 == p.weights.size();
      y[static_cast<std::size_t>(r)] = last ? acc : acc * 0.5 * (1.0 + std::erf(acc / std::sqrt(2.0)));
    }
    x = std::move(y);
  }
  for (double& v : x) v *= p.output_scale;
  return x;
}

}  // namespace

TEST_CASE("gelu values") {
  CHECK(gelu(0.0) == 0.0);
  CHECK(std::abs(gelu(10.0) - 10.0) < 1e-9);
  CHECK(std::abs(gelu(-10.0)) < 1e-9);
  CHECK(gelu(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
  for (double x : {-2.0, -0.3, 0.0, 0.7, 3.1}) {
    const double h = 1e-6;
    const double fd = (gelu(x + h) - gelu(x - h)) / (2 * h);
    CHECK(std::abs(gelu_derivative(x) - fd) < 1e-8);
  }
}

TEST_CASE("forward trivial nets") {
  const std::vector<int> widths{3, 5, 2};
  MlpParams z = MlpParams::zeros(widths);
  Vector in(3);
  in << 1.0, -2.0, 0.5;
  CHECK(forward(z, in).isZero(0.0));

  const std::vector<int> one{3, 3};
  MlpParams id = MlpParams::zeros(one);
  id.weights[0].setIdentity();
  CHECK(forward(id, in) == in);
}

TEST_CASE("forward matches nested-loop reference") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<int> widths{6, 9, 4};
    MlpParams p = MlpParams::create(widths, 100 + trial);
    for (auto& b : p.biases)
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 0.3 * n01(rng);
    for (Eigen::Index i = 0; i < p.input_scale.size(); ++i) p.input_scale[i] = 0.5 + std::abs(n01(rng));
    p.output_scale = 1.7;
    std::vector<double> x(6);
    for (double& v : x) v = n01(rng);
    const Vector got = forward(p, Vector(Eigen::Map<Vector>(x.data(), 6)));
    const std::vector<double> want = reference_forward(p, x);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got[static_cast<Eigen::Index>(i)] - want[i]) < 1e-12);
  }
}

TEST_CASE("forward rejects input width mismatch") {
  const std::vector<int> widths{3, 4, 2};
  MlpParams p = MlpParams::create(widths, 1);
  CHECK_THROWS_AS(forward(p, Vector(Vector::Zero(4))), ConfigError);
}

TEST_CASE("forward is bit-deterministic") {
  const std::vector<int> widths{5, 16, 16, 3};
  MlpParams p = MlpParams::create(widths, 3);
  Matrix x = Matrix::Random(8, 5);
  const Matrix a = forward(p, x);
  const Matrix b = forward(p, x);
  CHECK(a == b);
}

TEST_CASE("linear layer weight gradient rows equal the input") {
  const std::vector<int> widths{3, 2};
  MlpParams p = MlpParams::create(widths, 5);
  Matrix x(1, 3);
  x << 0.3, -1.2, 2.0;
  for (int i = 0; i < 2; ++i) {
    MlpTape tape;
    forward(p, x, &tape);
    MlpGradient g = MlpGradient::zeros_like(p);
    Matrix seed = Matrix::Zero(1, 2);
    seed(0, i) = 1.0;
    backward(tape, seed, g);
    CHECK(g.weights[0].row(i) == x.row(0));
    CHECK(g.weights[0].row(1 - i).isZero(0.0));
    CHECK(g.biases[0][i] == 1.0);
  }
}

TEST_CASE("two-layer chain on a 2x2 case matches hand derivation") {
  // y = w2 . gelu(W1 x + b1) + b2 with scalar output.
  const std::vector<int> widths{2, 2, 1};
  MlpParams p = MlpParams::zeros(widths);
  p.weights[0] << 0.5, -1.0, 2.0, 0.25;
  p.biases[0] << 0.1, -0.2;
  p.weights[1] << 1.5, -0.5;
  Matrix x(1, 2);
  x << 0.4, 0.8;
  MlpTape tape;
  forward(p, x, &tape);
  MlpGradient g = MlpGradient::zeros_like(p);
  const Matrix dx = backward(tape, Matrix::Ones(1, 1), g);

  const double a0 = 0.5 * 0.4 - 1.0 * 0.8 + 0.1;
  const double a1 = 2.0 * 0.4 + 0.25 * 0.8 - 0.2;
  const double s0 = gelu_derivative(a0), s1 = gelu_derivative(a1);
  CHECK(g.weights[1](0, 0) == doctest::Approx(gelu(a0)).epsilon(1e-14));
  CHECK(g.weights[1](0, 1) == doctest::Approx(gelu(a1)).epsilon(1e-14));
  CHECK(g.weights[0](0, 0) == doctest::Approx(1.5 * s0 * 0.4).epsilon(1e-14));
  CHECK(g.weights[0](1, 1) == doctest::Approx(-0.5 * s1 * 0.8).epsilon(1e-14));
  CHECK(dx(0, 0) == doctest::Approx(1.5 * s0 * 0.5 - 0.5 * s1 * 2.0).epsilon(1e-14));
  CHECK(dx(0, 1) == doctest::Approx(1.5 * s0 * -1.0 - 0.5 * s1 * 0.25).epsilon(1e-14));
}

TEST_CASE("backward on a consumed or empty tape is a usage error") {
  const std::vector<int> widths{2, 3, 1};
  MlpParams p = MlpParams::create(widths, 9);
  MlpTape empty;
  MlpGradient g = MlpGradient::zeros_like(p);
  CHECK_THROWS_AS(backward(empty, Matrix::Ones(1, 1), g), UsageError);
  MlpTape tape;
  forward(p, Matrix::Ones(1, 2), &tape);
  backward(tape, Matrix::Ones(1, 1), g);
  CHECK_THROWS_AS(backward(tape, Matrix::Ones(1, 1), g), UsageError);
}

TEST_CASE("gradients of 100 random nets match central differences") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> width(1, 16);
  std::uniform_int_distribution<int> depth(1, 3);
  std::normal_distribution<double> n01;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> widths{width(rng)};
    const int layers = depth(rng);
    for (int l = 0; l < layers; ++l) widths.push_back(width(rng));
    MlpParams p = MlpParams::create(widths, 1000 + trial);
    for (auto& b : p.biases)
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 0.2 * n01(rng);
    Matrix x(2, widths.front());
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n01(rng);
    Matrix seed(2, widths.back());
    for (Eigen::Index i = 0; i < seed.size(); ++i) seed.data()[i] = n01(rng);

    auto loss = [&] { return (forward(p, x).array() * seed.array()).sum(); };
    MlpTape tape;
    forward(p, x, &tape);
    MlpGradient g = MlpGradient::zeros_like(p);
    const Matrix dx = backward(tape, seed, g);

    std::vector<double> flat = p.flatten();
    const std::vector<double> analytic = g.flatten();
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const double numeric = test::central_diff(flat, i, [&] {
        p.assign_flat(flat);
        return loss();
      });
      worst = std::max(worst, test::grad_rel_error(analytic[i], numeric));
    }
    p.assign_flat(flat);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double numeric = test::central_diff(std::span<double>(x.data(), static_cast<std::size_t>(x.size())),
                                                static_cast<std::size_t>(i), loss);
      worst = std::max(worst, test::grad_rel_error(dx.data()[i], numeric));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("flatten and assign_flat round trip") {
  const std::vector<int> widths{4, 6, 3};
  MlpParams p = MlpParams::create(widths, 11);
  MlpParams q = MlpParams::zeros(widths);
  q.assign_flat(p.flatten());
  CHECK(q.weights == p.weights);
  CHECK(q.biases == p.biases);
  CHECK(p.parameter_count() == 4 * 6 + 6 + 6 * 3 + 3);
}

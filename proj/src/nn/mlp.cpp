#include "nn/mlp.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "common/error.hpp"

#if defined(EIDC_HAVE_MVEC) && defined(__AVX2__)
#include <immintrin.h>
extern "C" __m256d _ZGVdN4v_erfc(__m256d);
extern "C" __m256d _ZGVdN4v_exp(__m256d);
#define EIDC_VECTOR_GELU 1
#endif

namespace eidc::nn {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Writes gelu(a) into `out` and gelu'(a) into `slope` in one pass.
void gelu_with_slope(const Matrix& pre, Matrix& out, Matrix& slope) {
  out.resize(pre.rows(), pre.cols());
  slope.resize(pre.rows(), pre.cols());
  const double* a = pre.data();
  double* h = out.data();
  double* d = slope.data();
  const Eigen::Index n = pre.size();
  Eigen::Index i = 0;
#ifdef EIDC_VECTOR_GELU
  const __m256d neg_inv_sqrt2 = _mm256_set1_pd(-kInvSqrt2);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d neg_half = _mm256_set1_pd(-0.5);
  const __m256d inv_sqrt2pi = _mm256_set1_pd(kInvSqrt2Pi);
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(a + i);
    const __m256d cdf = _mm256_mul_pd(half, _ZGVdN4v_erfc(_mm256_mul_pd(x, neg_inv_sqrt2)));
    const __m256d pdf = _mm256_mul_pd(inv_sqrt2pi, _ZGVdN4v_exp(_mm256_mul_pd(neg_half, _mm256_mul_pd(x, x))));
    _mm256_storeu_pd(h + i, _mm256_mul_pd(x, cdf));
    _mm256_storeu_pd(d + i, _mm256_add_pd(cdf, _mm256_mul_pd(x, pdf)));
  }
#endif
  for (; i < n; ++i) {
    const double x = a[i];
    const double cdf = 0.5 * std::erfc(-x * kInvSqrt2);
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    h[i] = x * cdf;
    d[i] = cdf + x * pdf;
  }
}

void gelu_in_place(Matrix& m) {
  double* a = m.data();
  const Eigen::Index n = m.size();
  Eigen::Index i = 0;
#ifdef EIDC_VECTOR_GELU
  const __m256d neg_inv_sqrt2 = _mm256_set1_pd(-kInvSqrt2);
  const __m256d half = _mm256_set1_pd(0.5);
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(a + i);
    const __m256d cdf = _mm256_mul_pd(half, _ZGVdN4v_erfc(_mm256_mul_pd(x, neg_inv_sqrt2)));
    _mm256_storeu_pd(a + i, _mm256_mul_pd(x, cdf));
  }
#endif
  for (; i < n; ++i) a[i] = gelu(a[i]);
}

Matrix scaled_input(const MlpParams& params, const Matrix& input) {
  if (input.cols() != params.input_width()) {
    throw ConfigError("mlp input width " + std::to_string(input.cols()) + " does not match network input " +
                      std::to_string(params.input_width()));
  }
  if (params.input_scale.size() == 0) return input;
  return input * params.input_scale.asDiagonal();
}

Matrix run(const MlpParams& params, const Matrix& input, std::vector<Matrix>* inputs,
           std::vector<Matrix>* slopes, std::size_t layers, bool output_linear) {
  Matrix x = scaled_input(params, input);
  Matrix pre;
  Matrix slope;
  for (std::size_t l = 0; l < layers; ++l) {
    pre.noalias() = x * params.weights[l].transpose();
    pre.rowwise() += params.biases[l].transpose();
    const bool linear = output_linear && l + 1 == layers;
    if (inputs != nullptr) {
      inputs->push_back(std::move(x));
      if (linear) {
        x = std::move(pre);
        pre = Matrix();
      } else {
        gelu_with_slope(pre, x, slope);
        slopes->push_back(std::move(slope));
        slope = Matrix();
      }
    } else {
      if (!linear) gelu_in_place(pre);
      std::swap(x, pre);
    }
  }
  if (output_linear && params.output_scale != 1.0) x *= params.output_scale;
  return x;
}

}  // namespace

double gelu(double x) { return x * 0.5 * std::erfc(-x * kInvSqrt2); }

double gelu_derivative(double x) {
  return 0.5 * std::erfc(-x * kInvSqrt2) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

MlpParams MlpParams::create(std::span<const int> widths, std::uint64_t seed) {
  MlpParams p = zeros(widths);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(widths[l] + widths[l + 1]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix& w = p.weights[l];
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  }
  return p;
}

MlpParams MlpParams::zeros(std::span<const int> widths) {
  if (widths.size() < 2) throw ConfigError("an mlp needs at least an input and an output width");
  MlpParams p;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (widths[l] <= 0 || widths[l + 1] <= 0) throw ConfigError("mlp layer widths must be positive");
    p.weights.push_back(Matrix::Zero(widths[l + 1], widths[l]));
    p.biases.push_back(Vector::Zero(widths[l + 1]));
  }
  p.input_scale = Vector::Ones(widths.front());
  return p;
}

std::vector<int> MlpParams::widths() const {
  std::vector<int> w;
  if (weights.empty()) return w;
  w.push_back(static_cast<int>(weights.front().cols()));
  for (const auto& m : weights) w.push_back(static_cast<int>(m.rows()));
  return w;
}

int MlpParams::input_width() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }

int MlpParams::output_width() const { return weights.empty() ? 0 : static_cast<int>(weights.back().rows()); }

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

void MlpParams::validate() const {
  if (weights.empty() || weights.size() != biases.size()) throw ConfigError("mlp has no layers or mismatched biases");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (biases[l].size() != weights[l].rows()) throw ConfigError("mlp bias length does not match layer output");
    if (l > 0 && weights[l].cols() != weights[l - 1].rows()) {
      throw ConfigError("mlp layer " + std::to_string(l) + " input does not match previous output");
    }
  }
  if (input_scale.size() != 0 && input_scale.size() != input_width()) {
    throw ConfigError("mlp input scale length does not match input width");
  }
  if (!all_finite()) throw ConfigError("mlp parameters contain non-finite entries");
}

bool MlpParams::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return input_scale.allFinite() && std::isfinite(output_scale);
}

std::vector<double> MlpParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.insert(flat.end(), weights[l].data(), weights[l].data() + weights[l].size());
    flat.insert(flat.end(), biases[l].data(), biases[l].data() + biases[l].size());
  }
  return flat;
}

void MlpParams::assign_flat(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw ConfigError("flat parameter vector has the wrong length");
  std::size_t at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    std::copy_n(flat.data() + at, weights[l].size(), weights[l].data());
    at += weights[l].size();
    std::copy_n(flat.data() + at, biases[l].size(), biases[l].data());
    at += biases[l].size();
  }
}

MlpGradient MlpGradient::zeros_like(const MlpParams& params) {
  MlpGradient g;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    g.weights.push_back(Matrix::Zero(params.weights[l].rows(), params.weights[l].cols()));
    g.biases.push_back(Vector::Zero(params.biases[l].size()));
  }
  return g;
}

void MlpGradient::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

MlpGradient& MlpGradient::operator+=(const MlpGradient& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

MlpGradient& MlpGradient::operator*=(double factor) {
  for (auto& w : weights) w *= factor;
  for (auto& b : biases) b *= factor;
  return *this;
}

std::vector<double> MlpGradient::flatten() const {
  std::vector<double> flat;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.insert(flat.end(), weights[l].data(), weights[l].data() + weights[l].size());
    flat.insert(flat.end(), biases[l].data(), biases[l].data() + biases[l].size());
  }
  return flat;
}

bool MlpGradient::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

Eigen::Index MlpTape::batch_size() const { return layer_inputs_.empty() ? 0 : layer_inputs_.front().rows(); }

Matrix forward(const MlpParams& params, const Matrix& input, MlpTape* tape) {
  if (tape != nullptr) {
    *tape = MlpTape();
    tape->params_ = &params;
    tape->layers_run_ = params.num_layers();
    tape->includes_output_layer_ = true;
  }
  if (tape == nullptr) return run(params, input, nullptr, nullptr, params.num_layers(), true);
  return run(params, input, &tape->layer_inputs_, &tape->activation_slopes_, params.num_layers(), true);
}

Matrix forward_hidden(const MlpParams& params, const Matrix& input, MlpTape* tape) {
  if (params.num_layers() < 2) throw ConfigError("forward_hidden needs at least one hidden layer");
  if (tape != nullptr) {
    *tape = MlpTape();
    tape->params_ = &params;
    tape->layers_run_ = params.num_layers() - 1;
    tape->includes_output_layer_ = false;
  }
  const std::size_t layers = params.num_layers() - 1;
  if (tape == nullptr) return run(params, input, nullptr, nullptr, layers, false);
  return run(params, input, &tape->layer_inputs_, &tape->activation_slopes_, layers, false);
}

Matrix backward(MlpTape& tape, const Matrix& output_adjoint, MlpGradient& grads) {
  if (!tape.recorded()) throw UsageError("backward called on a tape with no recorded forward pass");
  if (tape.consumed_) throw UsageError("backward called twice on the same tape");
  const MlpParams& params = *tape.params_;
  if (grads.weights.size() != params.num_layers()) throw UsageError("gradient buffer does not match the taped network");
  const std::size_t layers = tape.layers_run_;
  const int top_width = static_cast<int>(params.weights[layers - 1].rows());
  if (output_adjoint.rows() != tape.batch_size() || output_adjoint.cols() != top_width) {
    throw UsageError("output adjoint shape does not match the taped forward pass");
  }
  tape.consumed_ = true;

  Matrix g = output_adjoint;
  if (tape.includes_output_layer_ && params.output_scale != 1.0) g *= params.output_scale;
  std::size_t slope_index = tape.activation_slopes_.size();
  for (std::size_t l = layers; l-- > 0;) {
    const bool linear = tape.includes_output_layer_ && l + 1 == layers;
    if (!linear) g.array() *= tape.activation_slopes_[--slope_index].array();
    grads.weights[l].noalias() += g.transpose() * tape.layer_inputs_[l];
    grads.biases[l] += g.colwise().sum().transpose();
    Matrix next(g.rows(), params.weights[l].cols());
    next.noalias() = g * params.weights[l];
    g = std::move(next);
  }
  if (params.input_scale.size() != 0) g = g * params.input_scale.asDiagonal();
  return g;
}

Vector forward(const MlpParams& params, const Vector& input) {
  Matrix row = input.transpose();
  Matrix out = forward(params, row, nullptr);
  return out.row(0).transpose();
}

}  // namespace eidc::nn

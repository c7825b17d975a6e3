#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace eidc::nn {

// Batches are row-major: one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// x * Phi(x) with the exact erf form of the normal CDF.
double gelu(double x);
double gelu_derivative(double x);

// Dense perceptron: GELU on every hidden layer, linear output layer.
//
// `input_scale` and `output_scale` are fixed affine conditioning factors
// (not trained): the first layer sees input .* input_scale and the network
// returns output_scale * (last layer).
struct MlpParams {
  std::vector<Matrix> weights;  // layer l is (out x in)
  std::vector<Vector> biases;
  Vector input_scale;
  double output_scale = 1.0;

  // Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases.
  static MlpParams create(std::span<const int> widths, std::uint64_t seed);
  static MlpParams zeros(std::span<const int> widths);

  std::vector<int> widths() const;
  int input_width() const;
  int output_width() const;
  std::size_t num_layers() const { return weights.size(); }
  std::size_t parameter_count() const;

  // Throws ConfigError when layer shapes do not compose or entries are not finite.
  void validate() const;
  bool all_finite() const;

  // Layer order, each layer weights row-major then biases.
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> flat);
};

// Parameter-shaped gradient accumulator.
struct MlpGradient {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static MlpGradient zeros_like(const MlpParams& params);
  void set_zero();
  MlpGradient& operator+=(const MlpGradient& other);
  MlpGradient& operator*=(double factor);
  std::vector<double> flatten() const;
  bool all_finite() const;
};

// Primal values of one forward computation, replayable exactly once.
class MlpTape {
 public:
  MlpTape() = default;

  bool recorded() const { return params_ != nullptr; }
  bool consumed() const { return consumed_; }
  Eigen::Index batch_size() const;

 private:
  friend Matrix forward(const MlpParams&, const Matrix&, MlpTape*);
  friend Matrix forward_hidden(const MlpParams&, const Matrix&, MlpTape*);
  friend Matrix backward(MlpTape&, const Matrix&, MlpGradient&);

  const MlpParams* params_ = nullptr;
  std::vector<Matrix> layer_inputs_;
  std::vector<Matrix> activation_slopes_;
  std::size_t layers_run_ = 0;
  bool includes_output_layer_ = false;
  bool consumed_ = false;
};

// Full network. Throws ConfigError on input width mismatch.
Matrix forward(const MlpParams& params, const Matrix& input, MlpTape* tape = nullptr);

// Every layer except the linear output layer; returns the last hidden activation.
Matrix forward_hidden(const MlpParams& params, const Matrix& input, MlpTape* tape = nullptr);

// Accumulates parameter gradients into `grads` and returns the input adjoint.
// `output_adjoint` is taken w.r.t. whatever the recorded forward returned.
// Throws UsageError on an unrecorded or already consumed tape.
Matrix backward(MlpTape& tape, const Matrix& output_adjoint, MlpGradient& grads);

Vector forward(const MlpParams& params, const Vector& input);

}  // namespace eidc::nn

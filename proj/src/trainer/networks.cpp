#include "trainer/networks.hpp"

#include <numbers>
#include <vector>

#include "common/error.hpp"

namespace eidc::trainer {
namespace {

std::vector<int> widths(int in, int hidden, int layers, int out) {
  std::vector<int> w{in};
  for (int l = 0; l < layers; ++l) w.push_back(hidden);
  w.push_back(out);
  return w;
}

void scale_else(nn::Vector& v, Eigen::Index base) {
  const double inv_pi = 1.0 / std::numbers::pi;
  const double s[kElseDim] = {
      0.02, 0.02, 0.1, 0.5, inv_pi, 1.0, 0.2, 0.5,  // ego
      0.2,                                          // phase
      0.5, 0.2, 1.0,                                // tracking errors
      0.02, 0.02, inv_pi, 0.1, 0.02, 0.02, inv_pi, 0.1, 0.02, 0.02, inv_pi, 0.1};
  for (int i = 0; i < kElseDim; ++i) v[base + i] = s[i];
}

}  // namespace

const char* representation_name(Representation r) { return r == Representation::kDynamic ? "dp" : "fp"; }

Representation parse_representation(const std::string& name) {
  if (name == "dp") return Representation::kDynamic;
  if (name == "fp") return Representation::kFixed;
  throw ConfigError("unknown representation '" + name + "' (expected dp or fp)");
}

nn::Vector encoder_input_scale() {
  nn::Vector v(kFeatureDim);
  v << 1.0 / 30.0, 1.0 / 30.0, 0.1, 1.0 / std::numbers::pi, 0.2, 0.5, 0.5;
  return v;
}

nn::Vector state_input_scale(Representation r, int set_dim) {
  if (r == Representation::kDynamic) {
    nn::Vector v = nn::Vector::Ones(set_dim + kElseDim);
    scale_else(v, set_dim);
    return v;
  }
  nn::Vector v(kFpStateDim);
  const nn::Vector f = encoder_input_scale();
  for (int s = 0; s < kFpSlots; ++s) v.segment(s * kFeatureDim, kFeatureDim) = f;
  scale_else(v, kFpSlots * kFeatureDim);
  return v;
}

Networks Networks::create(const NetworkShape& shape, std::uint64_t seed) {
  if (shape.hidden <= 0 || shape.hidden_layers <= 0) throw ConfigError("network widths must be positive");
  Networks n;
  n.representation = shape.representation;
  int state = kFpStateDim;
  if (shape.representation == Representation::kDynamic) {
    n.encoder = nn::MlpParams::create(widths(kFeatureDim, shape.hidden, shape.hidden_layers, shape.set_dim), seed);
    n.encoder.input_scale = encoder_input_scale();
    n.encoder.output_scale = 0.1;
    check_encoder_shape(n.encoder);
    state = shape.set_dim + kElseDim;
  }
  n.policy = nn::MlpParams::create(widths(state, shape.hidden, shape.hidden_layers, 2), seed + 1);
  n.policy.input_scale = state_input_scale(shape.representation, shape.set_dim);
  n.value = nn::MlpParams::create(widths(state, shape.hidden, shape.hidden_layers, 1), seed + 2);
  n.value.input_scale = n.policy.input_scale;
  n.value.output_scale = shape.value_scale;
  return n;
}

int Networks::state_dim() const {
  return representation == Representation::kDynamic ? encoder.output_width() + kElseDim : kFpStateDim;
}

void Networks::validate() const {
  if (representation == Representation::kDynamic) {
    encoder.validate();
    check_encoder_shape(encoder);
  }
  policy.validate();
  value.validate();
  if (policy.input_width() != state_dim() || value.input_width() != state_dim()) {
    throw ConfigError("policy/value input width does not match the state width " + std::to_string(state_dim()));
  }
  if (policy.output_width() != 2) throw ConfigError("policy must output 2 values");
  if (value.output_width() != 1) throw ConfigError("value network must output 1 value");
}

NetworkGradients NetworkGradients::zeros_like(const Networks& nets) {
  NetworkGradients g;
  if (nets.representation == Representation::kDynamic) g.encoder = nn::MlpGradient::zeros_like(nets.encoder);
  g.policy = nn::MlpGradient::zeros_like(nets.policy);
  g.value = nn::MlpGradient::zeros_like(nets.value);
  return g;
}

NetworkGradients& NetworkGradients::operator+=(const NetworkGradients& other) {
  encoder += other.encoder;
  policy += other.policy;
  value += other.value;
  return *this;
}

}  // namespace eidc::trainer

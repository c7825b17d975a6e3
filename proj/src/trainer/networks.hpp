#pragma once

#include <cstdint>
#include <string>

#include "encoding/encoder.hpp"
#include "nn/mlp.hpp"

namespace eidc::trainer {

enum class Representation { kDynamic, kFixed };

const char* representation_name(Representation r);
Representation parse_representation(const std::string& name);

struct NetworkShape {
  int hidden = 256;
  int hidden_layers = 2;
  int set_dim = kSetDim;
  Representation representation = Representation::kDynamic;
  double value_scale = 100.0;
};

struct Networks {
  nn::MlpParams encoder;  // empty for the fixed representation
  nn::MlpParams policy;
  nn::MlpParams value;
  Representation representation = Representation::kDynamic;

  static Networks create(const NetworkShape& shape, std::uint64_t seed);

  int set_dim() const { return representation == Representation::kDynamic ? encoder.output_width() : 0; }
  int state_dim() const;
  // Throws ConfigError when the three networks do not fit together.
  void validate() const;
};

struct NetworkGradients {
  nn::MlpGradient encoder;
  nn::MlpGradient policy;
  nn::MlpGradient value;

  static NetworkGradients zeros_like(const Networks& nets);
  NetworkGradients& operator+=(const NetworkGradients& other);
};

// Fixed per-feature conditioning for network inputs.
nn::Vector encoder_input_scale();
nn::Vector state_input_scale(Representation r, int set_dim);

}  // namespace eidc::trainer

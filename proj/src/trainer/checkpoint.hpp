#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "trainer/networks.hpp"

namespace eidc::trainer {

inline constexpr int kCheckpointFormat = 1;

struct Checkpoint {
  Networks nets;
  std::int64_t iteration = 0;
  std::uint64_t seed = 0;
  double rho = 1.0;
};

// Directory layout: manifest.txt plus encoder.bin (dp only), policy.bin and
// value.bin. Files are written atomically.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);

// Throws ConfigError on a malformed manifest or a blob whose size does not
// match the manifest widths; IoError when files are missing.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

std::string manifest_text(const Checkpoint& ckpt);

}  // namespace eidc::trainer

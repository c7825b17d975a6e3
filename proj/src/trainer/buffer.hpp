#pragma once

#include <cstddef>
#include <mutex>
#include <random>
#include <vector>

#include "encoding/observation.hpp"
#include "nn/mlp.hpp"
#include "vehicle/bicycle.hpp"
#include "world/path.hpp"

namespace eidc::trainer {

struct Experience {
  Observation obs;
  double light_clock = 0.0;
  vehicle::Action u_prev;
  world::Task task = world::Task::kRight;
  nn::Vector state;  // only kept when states are stored instead of recomputed
};

// Fixed-capacity FIFO ring with uniform sampling. Thread-safe.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void add(Experience e);
  std::vector<Experience> sample(std::size_t n, std::mt19937_64& rng) const;
  std::vector<std::size_t> sample_indices(std::size_t n, std::mt19937_64& rng) const;
  Experience at(std::size_t index) const;

  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::size_t total_added() const;

 private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::vector<Experience> items_;
  std::size_t next_ = 0;
  std::size_t added_ = 0;
};

}  // namespace eidc::trainer

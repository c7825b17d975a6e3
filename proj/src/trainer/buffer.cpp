#include "trainer/buffer.hpp"

#include "common/error.hpp"

namespace eidc::trainer {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::add(Experience e) {
  std::lock_guard lock(mutex_);
  if (items_.size() < capacity_) {
    items_.push_back(std::move(e));
  } else {
    items_[next_] = std::move(e);
  }
  next_ = (next_ + 1) % capacity_;
  ++added_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, std::mt19937_64& rng) const {
  std::lock_guard lock(mutex_);
  if (items_.empty()) throw UsageError("sampling from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = pick(rng);
  return out;
}

std::vector<Experience> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  const std::vector<std::size_t> idx = sample_indices(n, rng);
  std::lock_guard lock(mutex_);
  std::vector<Experience> out;
  out.reserve(n);
  for (std::size_t i : idx) out.push_back(items_[i]);
  return out;
}

Experience ReplayBuffer::at(std::size_t index) const {
  std::lock_guard lock(mutex_);
  if (index >= items_.size()) throw UsageError("replay buffer index out of range");
  return items_[index];
}

std::size_t ReplayBuffer::size() const {
  std::lock_guard lock(mutex_);
  return items_.size();
}

std::size_t ReplayBuffer::total_added() const {
  std::lock_guard lock(mutex_);
  return added_;
}

}  // namespace eidc::trainer

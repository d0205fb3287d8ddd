#include "vdo/drl/replay_buffer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vdo::drl {

ReplayBuffer::ReplayBuffer(int state_dim, int action_dim, Eigen::Index capacity)
    : state_dim_(state_dim), action_dim_(action_dim), capacity_(capacity) {
  if (state_dim <= 0 || action_dim <= 0 || capacity <= 0) {
    throw std::invalid_argument("ReplayBuffer: dimensions and capacity must be positive");
  }
}

void ReplayBuffer::reserve(Eigen::Index n) {
  if (n <= state_.cols()) return;
  const Eigen::Index cols = std::min(capacity_, std::max(n, 2 * state_.cols()));
  state_.conservativeResize(state_dim_, cols);
  action_.conservativeResize(action_dim_, cols);
  next_state_.conservativeResize(state_dim_, cols);
  reward_.conservativeResize(cols);
  done_.conservativeResize(cols);
}

void ReplayBuffer::push(const Eigen::Ref<const Eigen::VectorXd>& state,
                        const Eigen::Ref<const Eigen::VectorXd>& action, double reward,
                        const Eigen::Ref<const Eigen::VectorXd>& next_state, bool done) {
  if (state.size() != state_dim_ || next_state.size() != state_dim_ || action.size() != action_dim_) {
    throw std::invalid_argument("ReplayBuffer::push: dimension mismatch");
  }
  if (!std::isfinite(reward)) throw std::invalid_argument("ReplayBuffer::push: non-finite reward");
  reserve(next_ + 1);
  state_.col(next_) = state;
  action_.col(next_) = action;
  next_state_.col(next_) = next_state;
  reward_[next_] = reward;
  done_[next_] = done ? 1.0 : 0.0;
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

void ReplayBuffer::gather(const std::vector<Eigen::Index>& indices, Batch& b) const {
  const auto n = static_cast<Eigen::Index>(indices.size());
  b.state.resize(state_dim_, n);
  b.action.resize(action_dim_, n);
  b.next_state.resize(state_dim_, n);
  b.reward.resize(n);
  b.done.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index i = indices[static_cast<std::size_t>(k)];
    if (i < 0 || i >= size_) throw std::out_of_range("ReplayBuffer::gather: index not stored");
    b.state.col(k) = state_.col(i);
    b.action.col(k) = action_.col(i);
    b.next_state.col(k) = next_state_.col(i);
    b.reward[k] = reward_[i];
    b.done[k] = done_[i];
  }
}

Batch ReplayBuffer::sample(Eigen::Index batch_size, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("ReplayBuffer::sample: buffer is empty");
  std::vector<Eigen::Index> indices(static_cast<std::size_t>(batch_size));
  for (auto& i : indices) i = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(size_)));
  Batch b;
  gather(indices, b);
  return b;
}

}  // namespace vdo::drl

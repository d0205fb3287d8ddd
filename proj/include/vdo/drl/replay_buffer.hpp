#pragma once

#include <Eigen/Dense>

#include "vdo/rng.hpp"

namespace vdo::drl {

// A sampled minibatch; columns are transitions.
struct Batch {
  Eigen::MatrixXd state;
  Eigen::MatrixXd action;
  Eigen::RowVectorXd reward;
  Eigen::MatrixXd next_state;
  Eigen::RowVectorXd done;  // 1 for terminal transitions

  Eigen::Index size() const { return reward.size(); }
};

// Fixed-capacity ring of transitions with uniform sampling (with replacement).
// Storage grows geometrically up to the capacity, then the oldest entry is
// overwritten first.
class ReplayBuffer {
 public:
  ReplayBuffer(int state_dim, int action_dim, Eigen::Index capacity);

  void push(const Eigen::Ref<const Eigen::VectorXd>& state, const Eigen::Ref<const Eigen::VectorXd>& action,
            double reward, const Eigen::Ref<const Eigen::VectorXd>& next_state, bool done);

  Eigen::Index size() const { return size_; }
  Eigen::Index capacity() const { return capacity_; }
  // Storage slot the next push writes to.
  Eigen::Index cursor() const { return next_; }

  Batch sample(Eigen::Index batch_size, Rng& rng) const;
  // Fills `batch` from the given storage indices.
  void gather(const std::vector<Eigen::Index>& indices, Batch& batch) const;
  // Reward stored at a storage index, for inspection.
  double reward_at(Eigen::Index index) const { return reward_[index]; }

 private:
  void reserve(Eigen::Index n);

  int state_dim_;
  int action_dim_;
  Eigen::Index capacity_;
  Eigen::Index size_ = 0;
  Eigen::Index next_ = 0;
  Eigen::MatrixXd state_, action_, next_state_;
  Eigen::RowVectorXd reward_, done_;
};

}  // namespace vdo::drl

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "vdo/rng.hpp"

namespace vdo::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class HeadKind : std::uint8_t { kLinear = 0, kSquashed = 1, kGaussian = 2 };

// Output head. kSquashed maps each raw output z to lo + (hi - lo)(tanh z + 1)/2.
// kGaussian splits the raw output into a mean block and a log-std block of
// equal size, the latter clamped to [log_std_min, log_std_max].
struct Head {
  HeadKind kind = HeadKind::kLinear;
  double lo = 0.0;
  double hi = 1.0;
  double log_std_min = -20.0;
  double log_std_max = 2.0;
};

// Intermediates of one batched forward pass; columns are samples.
struct Cache {
  std::vector<Matrix> a;        // a[0] input, a[l+1] hidden activations
  std::vector<Matrix> z;        // pre-normalisation linear outputs
  std::vector<Matrix> zhat;     // normalised pre-activations
  std::vector<RowVector> inv_std;
  Matrix raw;                   // output-layer linear result
  Matrix out;                   // after the head
  const void* owner = nullptr;
  std::uint64_t version = 0;
};

// Dense multilayer perceptron: hidden layers are linear, optional layer
// normalisation (learned scale and shift), then ReLU. All parameters live in
// one contiguous vector so optimiser and target updates are vector operations.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> sizes, Head head, bool layer_norm = true);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; unit scale,
  // zero shift. A positive `final_scale` narrows the output layer to
  // Uniform(-final_scale, final_scale).
  void init(Rng& rng, double final_scale = 0.0);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int n_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  const std::vector<int>& sizes() const { return sizes_; }
  const Head& head() const { return head_; }
  bool layer_norm() const { return layer_norm_; }
  Eigen::Index n_params() const { return params_.size(); }

  const Vector& params() const { return params_; }
  // Mutable access invalidates outstanding caches.
  Vector& mutable_params() {
    ++version_;
    return params_;
  }
  void set_params(const Vector& p);

  Eigen::Map<Matrix> weight(int layer);
  Eigen::Map<const Matrix> weight(int layer) const;
  Eigen::Map<Vector> bias(int layer);
  Eigen::Map<const Vector> bias(int layer) const;

  // Runs a batch (input_dim x batch) and returns the head output, which is
  // also stored in cache.out.
  const Matrix& forward(const Matrix& input, Cache& cache) const;
  Matrix forward(const Matrix& input) const;

  // Reverse-mode pass for d(loss)/d(out) given per column. Writes parameter
  // gradients (summed over the batch) into `grad`; if `d_input` is non-null it
  // receives d(loss)/d(input). Throws std::logic_error on a stale cache.
  void backward(const Cache& cache, const Matrix& d_out, Vector& grad, Matrix* d_input = nullptr) const;
  // Input gradient only; skips the parameter-gradient products.
  void backward_input(const Cache& cache, const Matrix& d_out, Matrix& d_input) const;

  // Row-major serialisation order: per layer W (row-major), b, then scale and
  // shift for normalised layers.
  std::vector<double> params_row_major() const;
  void set_params_row_major(const std::vector<double>& values);

 private:
  struct Slice {
    Eigen::Index w = 0, b = 0, gamma = -1, beta = -1;
    int in = 0, out = 0;
  };

  bool hidden(int layer) const { return layer + 1 < n_layers(); }
  Matrix head_forward(const Matrix& raw) const;
  Matrix head_backward(const Cache& cache, const Matrix& d_out) const;
  void backward_impl(const Cache& cache, const Matrix& d_out, Vector* grad, Matrix* d_input) const;

  std::vector<int> sizes_;
  Head head_;
  bool layer_norm_ = true;
  std::vector<Slice> slices_;
  Vector params_;
  std::uint64_t version_ = 1;
};

struct AdamState {
  Vector m;
  Vector v;
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(Eigen::Index n, double learning_rate)
      : m(Vector::Zero(n)), v(Vector::Zero(n)), lr(learning_rate) {}
};

struct StepResult {
  bool applied = false;    // false when the gradient had a non-finite entry
  double grad_norm = 0.0;  // before clipping
};

// Global-norm clipping to max_grad_norm (<= 0 disables), then a bias-corrected
// Adam update. Non-finite gradients leave params and state untouched.
StepResult adam_step(Vector& params, const Vector& grad, AdamState& state, double max_grad_norm);
StepResult adam_step(Mlp& net, const Vector& grad, AdamState& state, double max_grad_norm);

// target <- tau * online + (1 - tau) * target.
void soft_update(Mlp& target, const Mlp& online, double tau);

// Reparameterised sample from a tanh-squashed Gaussian mapped onto [0, 1].
struct SquashedSample {
  Matrix mean;     // dim x batch
  Matrix log_std;  // after clamping
  Matrix eps;      // standard normal noise used
  Matrix u;        // pre-squash sample
  Matrix action;   // (tanh u + 1) / 2
  RowVector log_prob;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> clamped;
};

// `head_out` is the raw gaussian-head output (2*dim x batch) before clamping.
SquashedSample squashed_sample(const Matrix& head_out, const Head& head, const Matrix& eps);
SquashedSample squashed_sample(const Matrix& head_out, const Head& head, Rng& rng);
// Deterministic action (tanh(mean) + 1) / 2.
Matrix squashed_mean_action(const Matrix& head_out);
// Gradient w.r.t. the raw head output from gradients on action and log_prob,
// holding eps fixed.
Matrix squashed_backward(const SquashedSample& s, const Matrix& d_action, const RowVector& d_log_prob);

// Versioned binary checkpoint of named networks with optional optimiser state.
struct CheckpointEntry {
  std::string name;
  Mlp* net = nullptr;
  AdamState* adam = nullptr;
};

struct CheckpointScalar {
  std::string name;
  double* value = nullptr;
};

void save_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries,
                     const std::vector<CheckpointScalar>& scalars = {});
// Restores into networks and scalars of matching name (networks must also match
// in shape); throws std::runtime_error on any mismatch, a missing entry or a
// malformed file.
void load_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries,
                     const std::vector<CheckpointScalar>& scalars = {});

}  // namespace vdo::nn

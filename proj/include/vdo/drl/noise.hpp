#pragma once

#include <Eigen/Dense>

#include "vdo/rng.hpp"

namespace vdo::drl {

// x' = x + theta * (0 - x) + sigma * N(0, I).
Eigen::MatrixXd ou_noise_step(const Eigen::MatrixXd& prev, double theta, double sigma, Rng& rng);

// Discrete Ornstein-Uhlenbeck process whose samples are multiplied by `scale`
// when applied to actions.
class OuNoise {
 public:
  OuNoise(double theta, double sigma, double scale) : theta_(theta), sigma_(sigma), scale_(scale) {}

  // Advances the process (resized and zeroed on a shape change) and returns
  // scale * x.
  Eigen::MatrixXd sample(Eigen::Index rows, Eigen::Index cols, Rng& rng);
  void reset() { x_.setZero(); }
  const Eigen::MatrixXd& state() const { return x_; }

 private:
  double theta_, sigma_, scale_;
  Eigen::MatrixXd x_;
};

}  // namespace vdo::drl

#include "vdo/drl/noise.hpp"

namespace vdo::drl {

Eigen::MatrixXd ou_noise_step(const Eigen::MatrixXd& prev, double theta, double sigma, Rng& rng) {
  Eigen::MatrixXd next = (1.0 - theta) * prev;
  for (Eigen::Index j = 0; j < next.cols(); ++j) {
    for (Eigen::Index i = 0; i < next.rows(); ++i) next(i, j) += sigma * standard_normal(rng);
  }
  return next;
}

Eigen::MatrixXd OuNoise::sample(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  if (x_.rows() != rows || x_.cols() != cols) x_ = Eigen::MatrixXd::Zero(rows, cols);
  x_ = ou_noise_step(x_, theta_, sigma_, rng);
  return scale_ * x_;
}

}  // namespace vdo::drl

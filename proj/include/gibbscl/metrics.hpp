#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "gibbscl/model.hpp"

namespace gibbscl {

/// Diagnostics of an approximate posterior covariance against the truth.
struct VarianceRatioMetrics {
  double scalar_ratio = std::numeric_limits<double>::quiet_NaN();  ///< K_cl / K (d = 1 only)
  double frobenius_ratio = 0.0;        ///< ||K_cl K^-1||_F / sqrt(d)
  double relative_squared_error = 0.0; ///< ||I - K_cl K^-1||_F^2
};

inline VarianceRatioMetrics variance_ratio_metrics(const Mat& k_cl, const Mat& k_true) {
  const auto d = k_true.rows();
  if (k_cl.rows() != d || k_cl.cols() != d || k_true.cols() != d)
    throw std::invalid_argument("variance_ratio_metrics: dimension mismatch");
  Eigen::FullPivLU<Mat> lu(k_true);
  if (!lu.isInvertible()) throw std::invalid_argument("variance_ratio_metrics: singular true covariance");
  const Mat ratio = k_cl * lu.inverse();
  VarianceRatioMetrics m;
  if (d == 1) m.scalar_ratio = ratio(0, 0);
  m.frobenius_ratio = ratio.norm() / std::sqrt(static_cast<double>(d));
  m.relative_squared_error = (Mat::Identity(d, d) - ratio).squaredNorm();
  return m;
}

}  // namespace gibbscl

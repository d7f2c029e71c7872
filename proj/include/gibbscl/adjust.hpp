#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "gibbscl/model.hpp"

namespace gibbscl {

struct MagnitudeWeight {
  int option = 0;  ///< 0 = scalar rule, 1..5 = matrix summaries
  double value = 1.0;
};

/// Scalar-parameter tempering weight: the ratio of the full-likelihood
/// statistic variance at the posterior mode to the summed block-conditional
/// variances at the composite mode.
inline MagnitudeWeight scalar_magnitude_weight(double var_full, double var_cl_sum) {
  if (!(var_cl_sum > 0.0)) throw std::invalid_argument("scalar_magnitude_weight: degenerate block variance");
  if (!(var_full > 0.0)) throw std::invalid_argument("scalar_magnitude_weight: degenerate full variance");
  return {0, var_full / var_cl_sum};
}

/// Matrix-parameter tempering weight, options 1..5:
///   1: determinant ratio to the power 1/d
///   2: (1/d) tr[K (sum K_CL)^-1]
///   3: mean of per-component variance ratios
///   4: trace ratio
///   5: sqrt of the ratio of tr[K^2] to tr[(sum K_CL)^2]
inline MagnitudeWeight matrix_magnitude_weight(const Mat& k_full, const Mat& k_cl_sum, int option) {
  const auto d = k_full.rows();
  if (k_full.cols() != d || k_cl_sum.rows() != d || k_cl_sum.cols() != d)
    throw std::invalid_argument("matrix_magnitude_weight: dimension mismatch");
  double w = 0.0;
  switch (option) {
    case 1: {
      const double det_cl = k_cl_sum.determinant();
      if (std::abs(det_cl) < 1e-300) throw std::invalid_argument("matrix_magnitude_weight: singular block covariance");
      w = std::pow(k_full.determinant() / det_cl, 1.0 / static_cast<double>(d));
      break;
    }
    case 2: {
      Eigen::FullPivLU<Mat> lu(k_cl_sum);
      if (!lu.isInvertible()) throw std::invalid_argument("matrix_magnitude_weight: singular block covariance");
      w = (k_full * lu.inverse()).trace() / static_cast<double>(d);
      break;
    }
    case 3: {
      w = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        if (!(k_cl_sum(j, j) > 0.0))
          throw std::invalid_argument("matrix_magnitude_weight: degenerate block variance");
        w += k_full(j, j) / k_cl_sum(j, j);
      }
      w /= static_cast<double>(d);
      break;
    }
    case 4: {
      if (!(k_cl_sum.trace() > 0.0)) throw std::invalid_argument("matrix_magnitude_weight: degenerate block covariance");
      w = k_full.trace() / k_cl_sum.trace();
      break;
    }
    case 5: {
      const double denom = (k_cl_sum * k_cl_sum).trace();
      if (!(denom > 0.0)) throw std::invalid_argument("matrix_magnitude_weight: degenerate block covariance");
      w = std::sqrt((k_full * k_full).trace() / denom);
      break;
    }
    default:
      throw std::invalid_argument("matrix_magnitude_weight: option must be in 1..5");
  }
  if (!(w > 0.0) || !std::isfinite(w))
    throw std::runtime_error("matrix_magnitude_weight: nonpositive weight, covariance estimates look broken");
  return {option, w};
}

struct CurvatureMatrix {
  Mat w;            ///< triangular reparameterization matrix
  double residual;  ///< relative Frobenius residual of the defining identity
};

/// Solve W^T H_cl W = H_full for triangular W given two negative definite
/// Hessians, via Cholesky factors of the negated matrices. The solution is
/// upper triangular; any W satisfying the identity deforms the geometry the
/// same way.
inline CurvatureMatrix curvature_matrix(const Mat& h_full, const Mat& h_cl) {
  const auto d = h_full.rows();
  if (h_full.cols() != d || h_cl.rows() != d || h_cl.cols() != d)
    throw std::invalid_argument("curvature_matrix: dimension mismatch");
  const Eigen::LLT<Mat> llt_full{Mat(-h_full)};
  const Eigen::LLT<Mat> llt_cl{Mat(-h_cl)};
  if (llt_full.info() != Eigen::Success || llt_cl.info() != Eigen::Success)
    throw std::invalid_argument(
        "curvature_matrix: Hessian not negative definite; increase covariance draw counts");
  const Mat l_full = llt_full.matrixL();
  const Mat l_cl = llt_cl.matrixL();
  // W = L_cl^{-T} L_full^T  =>  W^T (L_cl L_cl^T) W = L_full L_full^T
  const Mat w = l_cl.transpose().triangularView<Eigen::Upper>().solve(Mat(l_full.transpose()));
  CurvatureMatrix out{w, 0.0};
  out.residual = (w.transpose() * h_cl * w - h_full).norm() / h_full.norm();
  if (out.residual > 1e-6)
    throw std::runtime_error("curvature_matrix: identity residual " + std::to_string(out.residual));
  return out;
}

using LogDensityFn = std::function<double(const Vec&)>;

/// Shift the composite posterior so its mode moves from theta*_CL to theta*.
inline double mean_adjusted_log_posterior(const Vec& theta, const Vec& theta_star,
                                          const Vec& theta_star_cl,
                                          const LogDensityFn& cl_log_posterior) {
  return cl_log_posterior(theta - theta_star + theta_star_cl);
}

/// Reparameterize the composite posterior by W around its own mode; the
/// maximum stays at theta*_CL while the curvature becomes W^T H_cl W.
inline double curvature_adjusted_log_posterior(const Vec& theta, const Vec& theta_star_cl,
                                               const Mat& w, const LogDensityFn& cl_log_posterior) {
  return cl_log_posterior(theta_star_cl + w * (theta - theta_star_cl));
}

}  // namespace gibbscl

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gibbscl/grid.hpp"
#include "gibbscl/lattice.hpp"
#include "gibbscl/model.hpp"
#include "gibbscl/partition.hpp"
#include "gibbscl/prior.hpp"
#include "gibbscl/rng.hpp"

namespace gibbscl {

struct EvidenceEstimate {
  double log_evidence = 0.0;
  double effective_sample_size = 0.0;
  double relative_se = 0.0;  ///< standard error of the evidence, relative
  int n_points = 0;
};

/// Importance-sampling estimate of the evidence p(y): draws from a Gaussian
/// proposal and averages f(y|theta) p(theta) / g(theta) in log space.
/// `log_joint` must return log f(y|theta) + log p(theta) (-inf outside the
/// prior support). Throws when the effective sample size signals a proposal
/// mismatch; pass min_ess = 0 to disable.
inline EvidenceEstimate evidence_importance_sampling(const LogTargetFn& log_joint,
                                                     const Vec& proposal_mean,
                                                     const Mat& proposal_cov, int n_points,
                                                     RngStream& rng, double min_ess = 50.0) {
  const int d = static_cast<int>(proposal_mean.size());
  if (n_points < 2) throw std::invalid_argument("evidence_importance_sampling: need >= 2 points");
  const Eigen::LLT<Mat> llt(proposal_cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("evidence_importance_sampling: proposal covariance not positive definite");
  const Mat l = llt.matrixL();
  const double log_norm =
      -0.5 * d * std::log(2.0 * M_PI) - Mat(l).diagonal().array().log().sum();

  std::vector<double> log_w(static_cast<std::size_t>(n_points));
  Vec z(d), theta(d);
  for (int j = 0; j < n_points; ++j) {
    for (int k = 0; k < d; ++k) z[k] = rng.normal();
    theta = proposal_mean + l * z;
    const double log_g = log_norm - 0.5 * z.squaredNorm();
    log_w[static_cast<std::size_t>(j)] = log_joint(theta) - log_g;
  }

  const double lse1 = log_sum_exp(log_w);
  std::vector<double> doubled(log_w);
  for (double& v : doubled) v *= 2.0;
  const double lse2 = log_sum_exp(doubled);

  EvidenceEstimate est;
  est.n_points = n_points;
  est.log_evidence = lse1 - std::log(static_cast<double>(n_points));
  est.effective_sample_size = std::exp(2.0 * lse1 - lse2);
  est.relative_se =
      std::sqrt(std::max(0.0, (n_points / est.effective_sample_size - 1.0) / n_points));
  if (est.effective_sample_size < min_ess)
    throw std::runtime_error("evidence_importance_sampling: effective sample size " +
                             std::to_string(est.effective_sample_size) +
                             " below " + std::to_string(min_ess) + "; proposal mismatch");
  return est;
}

/// Model-level convenience: evidence p(y) of a lattice under its exact
/// likelihood and a prior. `log_z` defaults to the exact recursion.
inline EvidenceEstimate evidence_importance_sampling(const Lattice& y, const ModelSpec& model,
                                                     const Prior& prior, const Vec& proposal_mean,
                                                     const Mat& proposal_cov, int n_points,
                                                     RngStream& rng, const LogTargetFn& log_z = {},
                                                     double min_ess = 50.0) {
  const Vec s_obs = sufficient_statistics(y, model);
  const int rows = y.rows(), cols = y.cols();
  auto log_joint = [&](const Vec& theta) {
    const double lp = prior.log_density(theta);
    if (lp == kNegInf) return kNegInf;
    const double lz = log_z ? log_z(theta) : log_partition_recursive(theta, model, rows, cols);
    return theta.dot(s_obs) - lz + lp;
  };
  return evidence_importance_sampling(log_joint, proposal_mean, proposal_cov, n_points, rng, min_ess);
}

}  // namespace gibbscl


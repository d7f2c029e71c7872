#pragma once

#include <stdexcept>

#include "gibbscl/lattice.hpp"
#include "gibbscl/model.hpp"
#include "gibbscl/moments.hpp"
#include "gibbscl/prior.hpp"

namespace gibbscl {

// Moment identities of the log-posterior: its gradient is the residual of
// the sufficient statistics against their model mean, its Hessian the
// negative statistic covariance, plus the prior terms.

inline Vec grad_log_posterior(const Vec& theta, const Vec& observed_stats,
                              const MomentEstimates& moments, const Prior& prior) {
  if (observed_stats.size() != moments.mean.size() || theta.size() != observed_stats.size())
    throw std::invalid_argument("grad_log_posterior: dimension mismatch");
  return observed_stats - moments.mean + prior.gradient(theta);
}

inline Mat hessian_log_posterior(const Vec& theta, const MomentEstimates& moments,
                                 const Prior& prior) {
  if (theta.size() != moments.cov.rows()) throw std::invalid_argument("hessian_log_posterior: dimension mismatch");
  return -moments.cov + prior.hessian(theta);
}

/// Gradient of the composite-likelihood log-posterior: per-block statistic
/// residuals summed over blocks, plus the prior gradient.
inline Vec grad_log_cl_posterior(const Vec& theta, const BlockSet& blocks,
                                 const std::vector<Vec>& observed_block_stats,
                                 const std::vector<MomentEstimates>& block_moments,
                                 const Prior& prior) {
  if (observed_block_stats.size() != block_moments.size() || observed_block_stats.empty())
    throw std::invalid_argument("grad_log_cl_posterior: block count mismatch");
  Vec g = prior.gradient(theta);
  std::vector<std::size_t> order(block_moments.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return block_key(blocks.blocks[a]) < block_key(blocks.blocks[b]);
  });
  for (std::size_t i : order) {
    if (observed_block_stats[i].size() != theta.size())
      throw std::invalid_argument("grad_log_cl_posterior: dimension mismatch");
    g += observed_block_stats[i] - block_moments[i].mean;
  }
  return g;
}

inline Mat hessian_log_cl_posterior(const Vec& theta, const BlockSet& blocks,
                                    const std::vector<MomentEstimates>& block_moments,
                                    const Prior& prior) {
  Mat h = prior.hessian(theta);
  std::vector<std::size_t> order(block_moments.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return block_key(blocks.blocks[a]) < block_key(blocks.blocks[b]);
  });
  for (std::size_t i : order) h -= block_moments[i].cov;
  return h;
}

}  // namespace gibbscl

#pragma once

#include <cmath>
#include <stdexcept>

#include "gibbscl/grid.hpp"
#include "gibbscl/model.hpp"
#include "gibbscl/rng.hpp"

namespace gibbscl {

struct Chain {
  Mat samples;  ///< post-burn-in states, one row per iteration
  double acceptance_rate = 0.0;
  int burn_in = 0;
  int iterations = 0;
};

/// Random-walk Metropolis with independent Gaussian proposal components.
inline Chain rwm_sample(const LogTargetFn& log_target, const Vec& init, int iterations, int burn_in,
                        const Vec& proposal_sd, RngStream& rng) {
  if (iterations <= burn_in || burn_in < 0) throw std::invalid_argument("rwm_sample: bad iteration counts");
  if (proposal_sd.size() != init.size() || (proposal_sd.array() <= 0.0).any())
    throw std::invalid_argument("rwm_sample: proposal scale must be positive");
  const int d = static_cast<int>(init.size());
  Vec x = init;
  double lt = log_target(x);
  if (!std::isfinite(lt)) throw std::invalid_argument("rwm_sample: initial point has zero density");

  Chain chain;
  chain.burn_in = burn_in;
  chain.iterations = iterations;
  chain.samples.resize(iterations - burn_in, d);
  long accepted = 0;
  Vec prop(d);
  for (int it = 0; it < iterations; ++it) {
    for (int j = 0; j < d; ++j) prop[j] = x[j] + proposal_sd[j] * rng.normal();
    const double lt_prop = log_target(prop);
    if (std::log(rng.uniform_open01()) < lt_prop - lt) {
      x = prop;
      lt = lt_prop;
      ++accepted;
    }
    if (it >= burn_in) chain.samples.row(it - burn_in) = x.transpose();
  }
  chain.acceptance_rate = static_cast<double>(accepted) / iterations;
  if (accepted == 0) throw std::runtime_error("rwm_sample: no proposal accepted; proposal scale is off");
  return chain;
}

inline Vec chain_mean(const Chain& chain) {
  if (chain.samples.rows() == 0) throw std::invalid_argument("chain_mean: empty chain");
  return chain.samples.colwise().mean().transpose();
}

/// Unbiased sample covariance of the post-burn-in states.
inline Mat posterior_covariance(const Chain& chain) {
  const auto n = chain.samples.rows();
  if (n < 100) throw std::invalid_argument("posterior_covariance: need at least 100 samples");
  const Vec m = chain_mean(chain);
  const Mat centered = chain.samples.rowwise() - m.transpose();
  Mat cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  if (!(cov.diagonal().maxCoeff() > 0.0))
    throw std::runtime_error("posterior_covariance: degenerate chain (all samples identical)");
  return cov;
}

}  // namespace gibbscl

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "gibbscl/composite.hpp"
#include "gibbscl/identities.hpp"
#include "gibbscl/moments.hpp"
#include "gibbscl/prior.hpp"

namespace gibbscl {

struct BfgsConfig {
  int gradient_draws = 100;  ///< exact draws per Monte Carlo gradient
  int max_iterations = 200;
  double max_step = 0.5;     ///< cap on the parameter step per iteration
  double se_multiple = 2.0;  ///< stop when ||grad|| < se_multiple * SE(grad)
  double grad_tol = 0.0;     ///< extra absolute stopping tolerance (exact-moment runs)
  Vec init;                  ///< empty = zero vector clamped into the prior support
};

struct BfgsRun {
  Vec theta;
  int iterations = 0;
  double grad_norm = std::numeric_limits<double>::quiet_NaN();
  double grad_se = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
};

/// MAP pair of Algorithm-style two-stage estimation: the composite-likelihood
/// mode and the true-posterior mode started from it.
struct MapEstimates {
  BfgsRun cl;
  BfgsRun full;
};

/// One stochastic gradient evaluation: estimated gradient of the
/// log-posterior, the standard error of its norm, and the statistic
/// covariance (the negative Hessian estimate under a flat prior).
struct GradSample {
  Vec grad;
  double se = 0.0;
  Mat neg_hessian;
};

/// BFGS ascent driven by noisy gradients. No line search: gradients are
/// Monte Carlo estimates, so steps use the inverse-Hessian direction capped
/// at max_step, and curvature pairs failing the positivity check are skipped.
/// The inverse Hessian is seeded from the oracle's covariance estimate.
inline BfgsRun stochastic_bfgs_maximize(
    const std::function<GradSample(const Vec&, int)>& oracle, const Vec& theta0, const Prior& prior,
    const BfgsConfig& cfg) {
  if (!prior.in_support(theta0)) throw std::invalid_argument("stochastic_bfgs_maximize: init outside prior support");
  const int d = static_cast<int>(theta0.size());
  Vec x = theta0;
  GradSample g = oracle(x, 0);
  if (!g.grad.allFinite()) throw std::runtime_error("stochastic_bfgs_maximize: non-finite gradient");

  auto inverse_of = [&](const Mat& b) {
    const double ridge = 1e-10 + 1e-8 * b.trace() / d;
    return Mat((b + ridge * Mat::Identity(d, d)).ldlt().solve(Mat::Identity(d, d)));
  };
  Mat hinv = inverse_of(g.neg_hessian - prior.hessian(x));

  BfgsRun run;
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    if (g.grad.norm() <= cfg.se_multiple * g.se + cfg.grad_tol) {
      run.converged = true;
      break;
    }
    Vec p = hinv * g.grad;
    if (p.dot(g.grad) <= 0.0) {
      // covariance estimate too noisy to stay positive definite; fall back
      hinv = inverse_of(g.neg_hessian - prior.hessian(x));
      p = hinv * g.grad;
      if (p.dot(g.grad) <= 0.0) p = g.grad;
    }
    double alpha = std::min(1.0, cfg.max_step / std::max(p.norm(), 1e-300));
    Vec x_new = x + alpha * p;
    int shrink = 0;
    while (!prior.in_support(x_new) && shrink < 60) {
      alpha *= 0.5;
      x_new = x + alpha * p;
      ++shrink;
    }
    if (!prior.in_support(x_new)) break;

    GradSample g_new = oracle(x_new, iter);
    if (!g_new.grad.allFinite()) throw std::runtime_error("stochastic_bfgs_maximize: non-finite gradient");
    const Vec s = x_new - x;
    const Vec yv = g.grad - g_new.grad;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * std::max(yv.norm(), 1e-300)) {
      const double rho = 1.0 / sy;
      const Mat left = Mat::Identity(d, d) - rho * s * yv.transpose();
      hinv = left * hinv * left.transpose() + rho * s * s.transpose();
    }
    x = std::move(x_new);
    g = std::move(g_new);
    run.iterations = iter;
  }
  run.theta = x;
  run.grad_norm = g.grad.norm();
  run.grad_se = g.se;
  return run;
}

namespace detail {

inline Vec clamp_into_support(Vec theta, const Prior& prior) {
  if (prior.in_support(theta)) return theta;
  if (const auto* box = dynamic_cast<const UniformBoxPrior*>(&prior)) {
    for (int j = 0; j < theta.size(); ++j)
      theta[j] = std::clamp(theta[j], box->lower()[j], box->upper()[j]);
    return theta;
  }
  throw std::invalid_argument("bfgs_map: initial point outside prior support");
}

}  // namespace detail

/// Two-stage MAP estimation: first the composite-likelihood posterior mode
/// via Monte Carlo block-conditional gradients, then the true posterior mode
/// via Monte Carlo full-lattice gradients, initialized at the first stage's
/// estimate.
inline MapEstimates bfgs_map(const Lattice& y, const ModelSpec& model, const BlockSet& blocks,
                             const Prior& prior, const BfgsConfig& cfg, std::uint64_t rng_root) {
  const int d = model.dim();
  std::vector<Vec> block_stats;
  block_stats.reserve(blocks.size());
  for (const Block& b : blocks.blocks) block_stats.push_back(BlockContext(y, b).observed_stats(model));
  const Vec full_stats = sufficient_statistics(y, model);

  Vec theta0 = cfg.init.size() == d ? cfg.init : detail::clamp_into_support(Vec::Zero(d), prior);

  auto cl_oracle = [&](const Vec& theta, int iter) {
    const auto moments = mc_block_moments(y, theta, blocks, model, cfg.gradient_draws,
                                          derive_seed(rng_root, {1, static_cast<std::uint64_t>(iter)}));
    const BlockMomentSum sum = sum_block_moments(blocks, moments);
    GradSample g;
    g.grad = grad_log_cl_posterior(theta, blocks, block_stats, moments, prior);
    g.se = std::sqrt(sum.mean_var_sum.sum());
    g.neg_hessian = sum.cov_sum;
    return g;
  };
  MapEstimates maps;
  maps.cl = stochastic_bfgs_maximize(cl_oracle, theta0, prior, cfg);

  auto full_oracle = [&](const Vec& theta, int iter) {
    const MomentEstimates m =
        mc_full_moments(theta, model, y.rows(), y.cols(), cfg.gradient_draws, derive_seed(rng_root, {2, static_cast<std::uint64_t>(iter)}));
    GradSample g;
    g.grad = grad_log_posterior(theta, full_stats, m, prior);
    g.se = std::sqrt(m.mean_se().squaredNorm());
    g.neg_hessian = m.cov;
    return g;
  };
  maps.full = stochastic_bfgs_maximize(full_oracle, maps.cl.theta, prior, cfg);
  return maps;
}

}  // namespace gibbscl

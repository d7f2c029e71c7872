#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gibbscl/blocks.hpp"
#include "gibbscl/lattice.hpp"
#include "gibbscl/model.hpp"
#include "gibbscl/partition.hpp"
#include "gibbscl/rng.hpp"
#include "gibbscl/sampler.hpp"

namespace gibbscl {

/// log z(theta, G, y_A): normalizer of the block full-conditional, summing
/// over all 2^(k^2) block configurations with the boundary fixed at y.
inline double block_conditional_log_partition(const Lattice& y, const Block& block, const Vec& theta,
                                              const ModelSpec& model) {
  return log_partition(BlockContext(y, block).conditional_model(theta, model));
}

/// log f(y_A | y_-A, theta).
inline double block_conditional_log_density(const Lattice& y, const Block& block, const Vec& theta,
                                            const ModelSpec& model) {
  const BlockContext ctx(y, block);
  return theta.dot(ctx.observed_stats(model)) - log_partition(ctx.conditional_model(theta, model));
}

/// log of the product of single-site full conditionals.
inline double log_pseudolikelihood(const Lattice& y, const Vec& theta, const ModelSpec& model) {
  const LocalCoeffs lc = local_coeffs(theta, model);
  double total = 0.0;
  for (int i = 0; i < y.size(); ++i) {
    const double a = y.at(i) * (lc.abundance + lc.theta_v * y.vertical_neighbour_sum(i) +
                                lc.theta_h * y.horizontal_neighbour_sum(i));
    total += a - log_two_cosh(a);
  }
  return total;
}

/// sum_i w_i log f(y_{A_i} | y_{-A_i}, theta).
inline double log_composite_likelihood(const Lattice& y, const Vec& theta, const BlockSet& blocks,
                                       const std::vector<double>& weights, const ModelSpec& model) {
  if (weights.size() != blocks.size())
    throw std::invalid_argument("log_composite_likelihood: weight count does not match block count");
  double total = 0.0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (weights[i] < 0.0) throw std::invalid_argument("log_composite_likelihood: negative weight");
    if (weights[i] == 0.0) continue;
    total += weights[i] * block_conditional_log_density(y, blocks.blocks[i], theta, model);
  }
  return total;
}

/// Conditional composite likelihood of a fixed lattice over a fixed block
/// set, prepared once so that repeated evaluation at many theta (optimizer
/// iterations, posterior grids) costs only the per-block recursions.
class CompositeLikelihood {
 public:
  CompositeLikelihood(const Lattice& y, const BlockSet& blocks, const ModelSpec& model)
      : model_(model) {
    contexts_.reserve(blocks.size());
    for (const Block& b : blocks.blocks) contexts_.emplace_back(y, b);
  }

  std::size_t block_count() const { return contexts_.size(); }
  const BlockContext& context(std::size_t i) const { return contexts_[i]; }
  const ModelSpec& model() const { return model_; }

  Vec observed_stats(std::size_t i) const { return contexts_[i].observed_stats(model_); }

  /// Unweighted log composite likelihood at theta.
  double log_density(const Vec& theta) const {
    check_theta(theta, model_);
    double total = 0.0;
    for (const BlockContext& ctx : contexts_)
      total += theta.dot(ctx.observed_stats(model_)) - log_partition(ctx.conditional_model(theta, model_));
    return total;
  }

 private:
  ModelSpec model_;
  std::vector<BlockContext> contexts_;
};

/// Exact draw from f(y_A | y_-A, theta): the block's spins (column-major
/// within the block), with the boundary fixed at the observed lattice. For
/// repeated draws construct the block's ExactSampler once.
inline std::vector<std::int8_t> exact_block_sample(const Lattice& y, const Block& block,
                                                   const Vec& theta, const ModelSpec& model,
                                                   RngStream& rng) {
  const BlockContext ctx(y, block);
  std::vector<std::int8_t> spins;
  ExactSampler(ctx.conditional_model(theta, model)).draw_into(rng, spins);
  return spins;
}

/// Exact draws of the block-conditional statistics s(y_{A_i} | y_{-A_i}) for
/// every block, boundaries held at the observed lattice. Returns one matrix
/// per block with n_draws rows and model.dim() columns. Draw j of block i is
/// produced from the substream (i, j) of `rng_root`, so results do not depend
/// on scheduling.
inline std::vector<Mat> mc_block_stat_draws(const Lattice& y, const Vec& theta, const BlockSet& blocks,
                                            const ModelSpec& model, int n_draws,
                                            std::uint64_t rng_root) {
  if (n_draws < 2) throw std::invalid_argument("mc_block_stat_draws: need at least 2 draws");
  check_theta(theta, model);
  std::vector<Mat> out(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockContext ctx(y, blocks.blocks[i]);
    const ExactSampler sampler(ctx.conditional_model(theta, model));
    Mat draws(n_draws, model.dim());
    std::vector<std::int8_t> spins;
    for (int j = 0; j < n_draws; ++j) {
      RngStream rng = RngStream::derive(rng_root, {i, static_cast<std::uint64_t>(j)});
      sampler.draw_into(rng, spins);
      draws.row(j) = ctx.conditional_stats(spins, model).transpose();
    }
    out[i] = std::move(draws);
  }
  return out;
}

}  // namespace gibbscl

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "gibbscl/blocks.hpp"
#include "gibbscl/model.hpp"
#include "gibbscl/partition.hpp"
#include "gibbscl/rng.hpp"
#include "gibbscl/sampler.hpp"

namespace gibbscl {

/// Monte Carlo (or exact, when n_draws == 0) mean and covariance of a
/// statistic vector.
struct MomentEstimates {
  Vec mean;
  Mat cov;           // unbiased sample covariance
  long n_draws = 0;  // 0 marks exact moments

  /// Standard error of the mean estimate, per component.
  Vec mean_se() const {
    if (n_draws <= 0) return Vec::Zero(mean.size());
    return (cov.diagonal() / static_cast<double>(n_draws)).cwiseMax(0.0).cwiseSqrt();
  }
};

namespace detail {

struct MomentAccumulator {
  Vec sum;
  Mat outer;
  long count = 0;

  explicit MomentAccumulator(int d) : sum(Vec::Zero(d)), outer(Mat::Zero(d, d)) {}

  void add(const Vec& s) {
    sum += s;
    outer += s * s.transpose();
    ++count;
  }

  void merge(const MomentAccumulator& other) {
    sum += other.sum;
    outer += other.outer;
    count += other.count;
  }

  MomentEstimates finish() const {
    if (count < 2) throw std::invalid_argument("moment estimation needs at least 2 draws");
    MomentEstimates est;
    const double n = static_cast<double>(count);
    est.mean = sum / n;
    est.cov = (outer - n * est.mean * est.mean.transpose()) / (n - 1.0);
    est.n_draws = count;
    return est;
  }
};

inline constexpr int kDrawChunk = 256;

}  // namespace detail

/// Mean and covariance of s(y) under f(y | theta) from n_draws exact draws.
/// Draw j always comes from substream (rng_root, j); chunks are combined in
/// index order, so the result is identical for any thread count.
inline MomentEstimates mc_full_moments(const Vec& theta, const ModelSpec& model, int rows, int cols,
                                       int n_draws, std::uint64_t rng_root) {
  if (n_draws < 2) throw std::invalid_argument("mc_full_moments: need at least 2 draws");
  check_theta(theta, model);
  const ExactSampler sampler(field_lattice_for(theta, model, rows, cols));
  const int d = model.dim();
  const int chunks = (n_draws + detail::kDrawChunk - 1) / detail::kDrawChunk;
  std::vector<detail::MomentAccumulator> parts(chunks, detail::MomentAccumulator(d));
  parallel_for(chunks, [&](std::size_t c) {
    const int lo = static_cast<int>(c) * detail::kDrawChunk;
    const int hi = std::min(n_draws, lo + detail::kDrawChunk);
    std::vector<std::int8_t> spins;
    auto& acc = parts[c];
    for (int j = lo; j < hi; ++j) {
      RngStream rng = RngStream::derive(rng_root, {static_cast<std::uint64_t>(j)});
      sampler.draw_into(rng, spins);
      long s0 = 0, sv = 0, sh = 0;
      for (int i = 0; i < rows * cols; ++i) {
        const int s = spins[static_cast<std::size_t>(i)];
        s0 += s;
        if (i % rows < rows - 1) sv += s * spins[static_cast<std::size_t>(i + 1)];
        if (i < rows * (cols - 1)) sh += s * spins[static_cast<std::size_t>(i + rows)];
      }
      acc.add(stats_from_raw(static_cast<double>(s0), static_cast<double>(sv),
                             static_cast<double>(sh), model));
    }
  });
  detail::MomentAccumulator total(d);
  for (const auto& p : parts) total.merge(p);
  return total.finish();
}

/// Per-block conditional moments of s(y_{A_i} | y_{-A_i}) at theta, observed
/// boundaries fixed. Block i's draws come from substreams keyed by the block
/// identity, so values are independent of block order and thread count.
inline std::vector<MomentEstimates> mc_block_moments(const Lattice& y, const Vec& theta,
                                                     const BlockSet& blocks, const ModelSpec& model,
                                                     int n_draws, std::uint64_t rng_root) {
  if (n_draws < 2) throw std::invalid_argument("mc_block_moments: need at least 2 draws");
  check_theta(theta, model);
  const int d = model.dim();
  std::vector<MomentEstimates> out(blocks.size());
  parallel_for(blocks.size(), [&](std::size_t i) {
    const Block& block = blocks.blocks[i];
    const BlockContext ctx(y, block);
    const ExactSampler sampler(ctx.conditional_model(theta, model));
    detail::MomentAccumulator acc(d);
    std::vector<std::int8_t> spins;
    for (int j = 0; j < n_draws; ++j) {
      RngStream rng = RngStream::derive(rng_root, {block_key(block), static_cast<std::uint64_t>(j)});
      sampler.draw_into(rng, spins);
      acc.add(ctx.conditional_stats(spins, model));
    }
    out[i] = acc.finish();
  });
  return out;
}

/// Sum over blocks in canonical (block-key) order of per-block means,
/// covariances and squared standard errors; the pieces the composite
/// likelihood gradient and Hessian identities need.
struct BlockMomentSum {
  Vec mean_sum;
  Mat cov_sum;
  Vec mean_var_sum;  // per-component variance of the summed mean estimate
};

inline BlockMomentSum sum_block_moments(const BlockSet& blocks,
                                        const std::vector<MomentEstimates>& per_block) {
  if (blocks.size() != per_block.size() || per_block.empty())
    throw std::invalid_argument("sum_block_moments: size mismatch");
  const int d = static_cast<int>(per_block.front().mean.size());
  std::vector<std::size_t> order(per_block.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return block_key(blocks.blocks[a]) < block_key(blocks.blocks[b]);
  });
  BlockMomentSum sum{Vec::Zero(d), Mat::Zero(d, d), Vec::Zero(d)};
  for (std::size_t i : order) {
    sum.mean_sum += per_block[i].mean;
    sum.cov_sum += per_block[i].cov;
    if (per_block[i].n_draws > 0)
      sum.mean_var_sum += per_block[i].cov.diagonal() / static_cast<double>(per_block[i].n_draws);
  }
  return sum;
}

}  // namespace gibbscl

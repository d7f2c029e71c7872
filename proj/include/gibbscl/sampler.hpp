#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gibbscl/lattice.hpp"
#include "gibbscl/model.hpp"
#include "gibbscl/partition.hpp"
#include "gibbscl/rng.hpp"

namespace gibbscl {

/// Exact sampler for a FieldLattice. One backward recursion stores the state
/// tables; each draw then walks the lattice forward, sampling every spin from
/// its exact conditional given the spins already drawn. Draws are therefore
/// independent exact samples from q(y) / z.
///
/// The stored tables cost (n - lag) * 2^lag floats; construction costs one
/// O(n 2^lag) sweep. draw() is O(n) per sample.
class ExactSampler {
 public:
  explicit ExactSampler(const FieldLattice& fl, int max_lag = kMaxLag) {
    if (fl.rows <= 0 || fl.cols <= 0) throw std::invalid_argument("ExactSampler: empty lattice");
    transposed_ = fl.cols < fl.rows;
    fl_ = transposed_ ? fl.transposed() : fl;
    detail::check_lag(fl_.rows, max_lag);
    m_ = fl_.rows;
    n_ = fl_.size();

    const int stored = n_ - m_ + 1;  // tables for windows starting at sites 0..n-m
    const std::size_t full = std::size_t{1} << m_;
    tables_.assign(static_cast<std::size_t>(stored) * full, 0.0f);
    factors_.resize(static_cast<std::size_t>(n_) * 8);
    const detail::EdgeFactors ef(fl_);
    double fac[8];
    for (int i = 0; i < n_; ++i) {
      detail::site_factors(fl_, ef, i, fac);
      for (int c = 0; c < 8; ++c) factors_[static_cast<std::size_t>(i) * 8 + c] = fac[c];
    }

    log_z_ = detail::backward_sweep(fl_, [&](int i, const double* table, std::size_t size) {
      if (i > n_ - m_) return;  // growing-window tail tables are not needed for draws
      float* dst = tables_.data() + static_cast<std::size_t>(i) * full;
      for (std::size_t s = 0; s < size; ++s) dst[s] = static_cast<float>(table[s]);
    });

    // Marginal sums of the first window table, level p holding sums over
    // window bits >= p; used to sample the first window bit by bit.
    init_levels_.resize(m_ + 1);
    init_levels_[m_].assign(full, 0.0);
    const float* t0 = tables_.data();
    for (std::size_t s = 0; s < full; ++s) init_levels_[m_][s] = t0[s];
    for (int p = m_ - 1; p >= 0; --p) {
      const std::size_t sz = std::size_t{1} << p;
      init_levels_[p].assign(sz, 0.0);
      for (std::size_t s = 0; s < sz; ++s)
        init_levels_[p][s] = init_levels_[p + 1][s] + init_levels_[p + 1][s | (std::size_t{1} << p)];
    }
  }

  /// Natural log of the partition function (a by-product of the sweep).
  double log_partition() const { return log_z_; }

  int rows() const { return transposed_ ? fl_.cols : fl_.rows; }
  int cols() const { return transposed_ ? fl_.rows : fl_.cols; }

  /// Draw spins into `out` (column-major, original orientation). Safe to call
  /// concurrently on one sampler as long as each caller has its own stream.
  void draw_into(RngStream& rng, std::vector<std::int8_t>& out) const {
    std::vector<std::int8_t> scratch;
    std::vector<std::int8_t>& work = transposed_ ? scratch : out;
    work.resize(static_cast<std::size_t>(n_));

    // first window: sites 0..m-1
    std::uint64_t s = 0;
    for (int p = 0; p < m_; ++p) {
      const double num = init_levels_[p + 1][s | (std::uint64_t{1} << p)];
      const double den = init_levels_[p][s];
      const bool b = rng.bernoulli(num / den);
      if (b) s |= std::uint64_t{1} << p;
      work[static_cast<std::size_t>(p)] = b ? 1 : -1;
    }

    // remaining sites, one exact conditional each
    const std::size_t full = std::size_t{1} << m_;
    const std::size_t half = full >> 1;
    std::uint64_t cur = s & 1;
    std::uint64_t w = s >> 1;
    for (int i = 0; i + m_ < n_; ++i) {
      const float* table = tables_.data() + static_cast<std::size_t>(i + 1) * full;
      const int b1 = m_ > 1 ? static_cast<int>(w & 1) : 0;
      const double* fac = factors_.data() + static_cast<std::size_t>(i) * 8;
      const int base = static_cast<int>(cur) | (b1 << 1);
      const double p0 = fac[base] * table[w];
      const double p1 = fac[base | 4] * table[w | half];
      const bool b = rng.bernoulli(p1 / (p0 + p1));
      work[static_cast<std::size_t>(i + m_)] = b ? 1 : -1;
      if (m_ > 1) {
        cur = w & 1;
        w = (w >> 1) | (static_cast<std::uint64_t>(b) << (m_ - 2));
      } else {
        cur = b ? 1 : 0;
      }
    }

    if (transposed_) {
      out.resize(static_cast<std::size_t>(n_));
      const int rows_int = fl_.rows, cols_int = fl_.cols;
      // internal (r, c) -> original (c, r); original has rows_ = cols_int
      for (int c = 0; c < cols_int; ++c)
        for (int r = 0; r < rows_int; ++r)
          out[static_cast<std::size_t>(r) * cols_int + c] = work[static_cast<std::size_t>(c) * rows_int + r];
    }
  }

  Lattice draw(RngStream& rng) const {
    std::vector<std::int8_t> spins;
    draw_into(rng, spins);
    return Lattice(rows(), cols(), std::move(spins));
  }

 private:
  FieldLattice fl_;  // internal (possibly transposed) orientation
  bool transposed_ = false;
  int m_ = 0, n_ = 0;
  std::vector<float> tables_;
  std::vector<double> factors_;
  std::vector<std::vector<double>> init_levels_;
  double log_z_ = 0.0;
};

/// Exact draw from f(y | theta) on an m x m' lattice. For repeated draws at
/// one theta construct an ExactSampler once instead.
inline Lattice exact_sample(const Vec& theta, const ModelSpec& model, int rows, int cols,
                            RngStream& rng, int max_lag = kMaxLag) {
  return ExactSampler(field_lattice_for(theta, model, rows, cols), max_lag).draw(rng);
}

}  // namespace gibbscl

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gibbscl/lattice.hpp"
#include "gibbscl/model.hpp"
#include "gibbscl/numeric.hpp"

namespace gibbscl {

/// Largest admissible lag: the recursion keeps 2^lag states per step, so this
/// bounds both memory and time.
inline constexpr int kMaxLag = 22;

/// Generalized binary lattice model with a per-site linear coefficient and
/// separate vertical/horizontal couplings:
///   log q(y) = sum_i field[i] y_i + theta_v * s_vert(y) + theta_h * s_horiz(y).
/// The full Ising/autologistic models and every block full-conditional reduce
/// to this form (boundary terms fold into the field).
struct FieldLattice {
  int rows = 0;
  int cols = 0;
  std::vector<double> field;  // column-major, length rows * cols
  double theta_v = 0.0;
  double theta_h = 0.0;

  int size() const { return rows * cols; }

  FieldLattice transposed() const {
    FieldLattice t;
    t.rows = cols;
    t.cols = rows;
    t.theta_v = theta_h;
    t.theta_h = theta_v;
    t.field.resize(field.size());
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r)
        t.field[static_cast<std::size_t>(r) * cols + c] = field[static_cast<std::size_t>(c) * rows + r];
    return t;
  }
};

inline FieldLattice field_lattice_for(const Vec& theta, const ModelSpec& model, int rows, int cols) {
  const LocalCoeffs lc = local_coeffs(theta, model);
  FieldLattice fl;
  fl.rows = rows;
  fl.cols = cols;
  fl.field.assign(static_cast<std::size_t>(rows) * cols, lc.abundance);
  fl.theta_v = lc.theta_v;
  fl.theta_h = lc.theta_h;
  return fl;
}

namespace detail {

/// The 8 factor values of site i, indexed b_i | b_down << 1 | b_right << 2
/// where b = 1 encodes spin +1. Sites on the last row have no vertical term,
/// sites on the last column no horizontal term.
inline void site_factor_logs(const FieldLattice& fl, int i, double out[8]) {
  const int m = fl.rows;
  const bool has_v = (i % m) < m - 1;
  const bool has_h = i < fl.size() - m;
  const double f = fl.field[static_cast<std::size_t>(i)];
  for (int combo = 0; combo < 8; ++combo) {
    const double yi = (combo & 1) ? 1.0 : -1.0;
    const double yv = (combo & 2) ? 1.0 : -1.0;
    const double yh = (combo & 4) ? 1.0 : -1.0;
    double lf = f * yi;
    if (has_v) lf += fl.theta_v * yi * yv;
    if (has_h) lf += fl.theta_h * yi * yh;
    out[combo] = lf;
  }
}

/// Edge-coupling exponentials shared by every site of one lattice.
struct EdgeFactors {
  double ev_same, ev_diff, eh_same, eh_diff;

  explicit EdgeFactors(const FieldLattice& fl)
      : ev_same(std::exp(fl.theta_v)),
        ev_diff(1.0 / ev_same),
        eh_same(std::exp(fl.theta_h)),
        eh_diff(1.0 / eh_same) {}
};

/// Linear-space version of site_factor_logs: one exp per site, the rest
/// multiplications.
inline void site_factors(const FieldLattice& fl, const EdgeFactors& ef, int i, double out[8]) {
  const int m = fl.rows;
  const bool has_v = (i % m) < m - 1;
  const bool has_h = i < fl.size() - m;
  const double fplus = std::exp(fl.field[static_cast<std::size_t>(i)]);
  const double fminus = 1.0 / fplus;
  for (int combo = 0; combo < 8; ++combo) {
    const bool yi = combo & 1;
    double v = yi ? fplus : fminus;
    if (has_v) v *= (yi == bool(combo & 2)) ? ef.ev_same : ef.ev_diff;
    if (has_h) v *= (yi == bool(combo & 4)) ? ef.eh_same : ef.eh_diff;
    out[combo] = v;
  }
}

inline void check_lag(int lag, int max_lag) {
  if (lag > max_lag)
    throw std::invalid_argument("lattice lag " + std::to_string(lag) + " exceeds the configured maximum " +
                                std::to_string(max_lag));
}

/// Backward sweep over the factor chain in linear space, renormalizing the
/// state table by its maximum at every site. Equivalent to the log-sum-exp
/// recursion (the running offset is the subtracted maximum) but the inner
/// loop is pure multiply-add. `sink(i, table, size)` is called with the
/// normalized table of windows starting at site i.
template <typename Sink>
double backward_sweep(const FieldLattice& fl, Sink&& sink) {
  const int m = fl.rows;
  const int n = fl.size();
  const std::size_t full = std::size_t{1} << m;
  std::vector<double> cur(full), next(full);
  double log_offset = 0.0;
  const EdgeFactors ef(fl);
  double fac[8];

  // base: table over the last site only
  site_factors(fl, ef, n - 1, fac);
  std::size_t size = 2;
  next[0] = fac[0];
  next[1] = fac[1];
  {
    const double mx = std::max(next[0], next[1]);
    next[0] /= mx;
    next[1] /= mx;
    log_offset += std::log(mx);
  }
  sink(n - 1, next.data(), size);

  for (int i = n - 2; i >= 0; --i) {
    site_factors(fl, ef, i, fac);
    if (i >= n - m) {
      // last column: no horizontal edge, the window grows by one site
      const std::size_t sz = size << 1;
      for (std::size_t s = 0; s < sz; ++s) {
        const int combo = static_cast<int>(s & 3u);
        cur[s] = fac[combo] * next[s >> 1];
      }
      size = sz;
    } else {
      const std::size_t half = full >> 1;
      for (std::size_t u = 0; u < half; ++u) {
        const double n0 = next[u];
        const double n1 = next[u + half];
        const int b1 = static_cast<int>(u & 1u) << 1;
        cur[(u << 1)] = fac[b1] * n0 + fac[b1 | 4] * n1;
        cur[(u << 1) | 1] = fac[b1 | 1] * n0 + fac[b1 | 5] * n1;
      }
      size = full;
    }
    double mx = 0.0;
    for (std::size_t s = 0; s < size; ++s) mx = std::max(mx, cur[s]);
    const double inv = 1.0 / mx;
    for (std::size_t s = 0; s < size; ++s) cur[s] *= inv;
    log_offset += std::log(mx);
    sink(i, cur.data(), size);
    cur.swap(next);
  }

  double total = 0.0;
  for (std::size_t s = 0; s < size; ++s) total += next[s];
  return log_offset + std::log(total);
}

/// Reference implementation carried entirely in log space with pairwise
/// log-sum-exp; used by tests to cross-check the scaled sweep.
inline double log_partition_lse(const FieldLattice& fl, int max_lag = kMaxLag) {
  FieldLattice work = fl.cols < fl.rows ? fl.transposed() : fl;
  check_lag(work.rows, max_lag);
  const int m = work.rows;
  const int n = work.size();
  const std::size_t full = std::size_t{1} << m;
  std::vector<double> cur(full), next(full);
  double flog[8];

  site_factor_logs(work, n - 1, flog);
  std::size_t size = 2;
  next[0] = flog[0];
  next[1] = flog[1];

  for (int i = n - 2; i >= 0; --i) {
    site_factor_logs(work, i, flog);
    if (i >= n - m) {
      const std::size_t sz = size << 1;
      for (std::size_t s = 0; s < sz; ++s) cur[s] = flog[s & 3u] + next[s >> 1];
      size = sz;
    } else {
      const std::size_t half = full >> 1;
      for (std::size_t u = 0; u < half; ++u) {
        const double n0 = next[u];
        const double n1 = next[u + half];
        const int b1 = static_cast<int>(u & 1u) << 1;
        cur[(u << 1)] = log_add_exp(flog[b1] + n0, flog[b1 | 4] + n1);
        cur[(u << 1) | 1] = log_add_exp(flog[b1 | 1] + n0, flog[b1 | 5] + n1);
      }
      size = full;
    }
    cur.swap(next);
  }
  return log_sum_exp({next.data(), size});
}

}  // namespace detail

/// Exact log partition function of a field lattice by the forward-backward
/// recursion over 2^lag window states; O(n 2^lag) time, O(2^lag) memory.
/// The lattice is transposed internally so the lag is min(rows, cols).
inline double log_partition(const FieldLattice& fl, int max_lag = kMaxLag) {
  if (fl.rows <= 0 || fl.cols <= 0) throw std::invalid_argument("log_partition: empty lattice");
  FieldLattice work = fl.cols < fl.rows ? fl.transposed() : fl;
  detail::check_lag(work.rows, max_lag);
  return detail::backward_sweep(work, [](int, const double*, std::size_t) {});
}

/// log z(theta, G) of a model on an m x m' lattice.
inline double log_partition_recursive(const Vec& theta, const ModelSpec& model, int rows, int cols,
                                      int max_lag = kMaxLag) {
  return log_partition(field_lattice_for(theta, model, rows, cols), max_lag);
}

// ---------------------------------------------------------------------------
// Brute-force oracle: exhaustive enumeration of all 2^n states. For uniform
// fields every state's statistics reduce to the triple (s0, s_vert, s_horiz),
// so the enumeration is stored once as a joint tally and reused across theta.

inline constexpr int kMaxBruteForceSites = 24;

/// Joint tally of (s0, s_vert, s_horiz) over every configuration of an
/// m x m' lattice: a complete density of states for all three model variants.
class StatHistogram {
 public:
  StatHistogram(int rows, int cols) : rows_(rows), cols_(cols) {
    const int n = rows * cols;
    if (n > kMaxBruteForceSites)
      throw std::invalid_argument("StatHistogram: lattice too large for enumeration");
    V_ = static_cast<long>(rows - 1) * cols;
    H_ = static_cast<long>(rows) * (cols - 1);
    std::uint64_t vmask = 0, hmask = 0;
    for (int i = 0; i < n; ++i) {
      if (i % rows < rows - 1) vmask |= std::uint64_t{1} << i;
      if (i < n - rows) hmask |= std::uint64_t{1} << i;
    }
    counts_.assign(static_cast<std::size_t>(n + 1) * (V_ + 1) * (H_ + 1), 0.0);
    const std::uint64_t total = std::uint64_t{1} << n;
    for (std::uint64_t b = 0; b < total; ++b) {
      const int ones = std::popcount(b);
      const long dv = std::popcount((b ^ (b >> 1)) & vmask);
      const long dh = std::popcount((b ^ (b >> rows)) & hmask);
      counts_[index(ones, dv, dh)] += 1.0;
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  /// log z(theta) = log sum over states exp(theta . s(state)).
  double log_partition(const Vec& theta, const ModelSpec& model) const {
    check_theta(theta, model);
    std::vector<double> terms;
    terms.reserve(counts_.size());
    for_each_bin([&](double count, double s0, double sv, double sh) {
      terms.push_back(std::log(count) + theta.dot(stats_from_raw(s0, sv, sh, model)));
    });
    return log_sum_exp(terms);
  }

  /// Exact mean and covariance of the sufficient statistics at theta.
  void moments(const Vec& theta, const ModelSpec& model, Vec& mean, Mat& cov) const {
    const double logz = log_partition(theta, model);
    const int d = model.dim();
    mean = Vec::Zero(d);
    Mat second = Mat::Zero(d, d);
    for_each_bin([&](double count, double s0, double sv, double sh) {
      const Vec s = stats_from_raw(s0, sv, sh, model);
      const double p = std::exp(std::log(count) + theta.dot(s) - logz);
      mean += p * s;
      second += p * s * s.transpose();
    });
    cov = second - mean * mean.transpose();
  }

 private:
  std::size_t index(int ones, long dv, long dh) const {
    return (static_cast<std::size_t>(ones) * (V_ + 1) + dv) * (H_ + 1) + dh;
  }

  template <typename Fn>
  void for_each_bin(Fn&& fn) const {
    const int n = rows_ * cols_;
    for (int ones = 0; ones <= n; ++ones)
      for (long dv = 0; dv <= V_; ++dv)
        for (long dh = 0; dh <= H_; ++dh) {
          const double count = counts_[index(ones, dv, dh)];
          if (count == 0.0) continue;
          fn(count, static_cast<double>(2L * ones - n), static_cast<double>(V_ - 2 * dv),
             static_cast<double>(H_ - 2 * dh));
        }
  }

  int rows_, cols_;
  long V_ = 0, H_ = 0;
  std::vector<double> counts_;
};

/// Exact log partition by full enumeration (testing oracle, lattices up to
/// kMaxBruteForceSites sites).
inline double log_partition_bruteforce(const Vec& theta, const ModelSpec& model, int rows, int cols) {
  return StatHistogram(rows, cols).log_partition(theta, model);
}

/// E[s(y)] at theta via central finite differences of the recursive log
/// partition (the gradient of log z equals the mean of the statistics).
inline Vec exact_mean_stats(const Vec& theta, const ModelSpec& model, int rows, int cols,
                            double step = 1e-4) {
  check_theta(theta, model);
  Vec mean(model.dim());
  for (int j = 0; j < model.dim(); ++j) {
    Vec hi = theta, lo = theta;
    hi[j] += step;
    lo[j] -= step;
    mean[j] = (log_partition_recursive(hi, model, rows, cols) -
               log_partition_recursive(lo, model, rows, cols)) /
              (2.0 * step);
  }
  return mean;
}

}  // namespace gibbscl

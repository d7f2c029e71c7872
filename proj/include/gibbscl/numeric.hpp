#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gibbscl {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow.
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// log(sum_i exp(v[i])) without overflow.
inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return kNegInf;
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - m);
  return m + std::log(sum);
}

/// P(x = +1) for a two-state variable with log-odds 2a, i.e.
/// exp(a) / (exp(a) + exp(-a)), computed without overflow.
inline double two_state_prob(double a) { return 1.0 / (1.0 + std::exp(-2.0 * a)); }

/// log(exp(a) + exp(-a)) = log(2 cosh a).
inline double log_two_cosh(double a) {
  const double m = std::abs(a);
  return m + std::log1p(std::exp(-2.0 * m));
}

/// Regularized lower incomplete gamma P(a, x) by series / continued fraction
/// (Numerical Recipes scheme).
inline double gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    // series expansion
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  // continued fraction for Q(a, x)
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  const double q = std::exp(-x + a * std::log(x) - gln) * h;
  return 1.0 - q;
}

/// Chi-square survival function P(X > x) with k degrees of freedom.
inline double chi_square_sf(double x, double k) { return 1.0 - gamma_p(0.5 * k, 0.5 * x); }

namespace detail {
inline int& thread_limit_storage() {
  static int limit = 0;  // 0 = use hardware_concurrency
  return limit;
}
}  // namespace detail

/// Cap the worker count used by parallel_for (0 restores the hardware default).
inline void set_max_threads(int n) { detail::thread_limit_storage() = n; }

inline int max_threads() {
  const int limit = detail::thread_limit_storage();
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int base = hw > 0 ? hw : 1;
  return limit > 0 ? std::min(limit, base) : base;
}

namespace detail {
inline bool& inside_parallel_worker() {
  thread_local bool inside = false;
  return inside;
}
}  // namespace detail

/// Run fn(i) for i in [0, n) across worker threads. The split of work across
/// threads never affects results as long as fn(i) writes only to slot i of
/// its output, so callers stay deterministic under any thread count. Nested
/// calls from inside a worker run serially instead of oversubscribing.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const int workers =
      detail::inside_parallel_worker() ? 1 : static_cast<int>(std::min<std::size_t>(max_threads(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto body = [&] {
    detail::inside_parallel_worker() = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) break;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        break;
      }
    }
    detail::inside_parallel_worker() = false;
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int t = 1; t < workers; ++t) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

/// Natural cubic spline through (x_i, y_i); x strictly increasing.
class CubicSpline {
 public:
  CubicSpline() = default;

  CubicSpline(std::vector<double> x, std::vector<double> y)
      : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw std::invalid_argument("CubicSpline: need >= 2 nodes");
    for (std::size_t i = 1; i < n; ++i)
      if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("CubicSpline: x not increasing");
    // Tridiagonal solve for second derivatives, natural boundary conditions.
    m_.assign(n, 0.0);
    if (n == 2) return;
    std::vector<double> diag(n, 0.0), rhs(n, 0.0), upper(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1];
      const double h1 = x_[i + 1] - x_[i];
      diag[i] = 2.0 * (h0 + h1);
      upper[i] = h1;
      rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    // forward sweep
    for (std::size_t i = 2; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1];
      const double w = h0 / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
      m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
      if (i == 1) break;
    }
  }

  double operator()(double xq) const {
    if (xq <= x_.front()) return extrapolate_left(xq);
    if (xq >= x_.back()) return extrapolate_right(xq);
    const auto it = std::upper_bound(x_.begin(), x_.end(), xq);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - xq) / h;
    const double b = (xq - x_[i]) / h;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
  }

  /// dy/dx of the interpolant.
  double derivative(double xq) const {
    const std::size_t n = x_.size();
    std::size_t i;
    if (xq <= x_.front())
      i = 0;
    else if (xq >= x_.back())
      i = n - 2;
    else
      i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), xq) - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - xq) / h;
    const double b = (xq - x_[i]) / h;
    return (y_[i + 1] - y_[i]) / h +
           ((3.0 * b * b - 1.0) * m_[i + 1] - (3.0 * a * a - 1.0) * m_[i]) * h / 6.0;
  }

  double min_x() const { return x_.front(); }
  double max_x() const { return x_.back(); }

 private:
  double extrapolate_left(double xq) const {
    const double s = derivative(x_.front());
    return y_.front() + s * (xq - x_.front());
  }
  double extrapolate_right(double xq) const {
    const double s = derivative(x_.back());
    return y_.back() + s * (xq - x_.back());
  }

  std::vector<double> x_, y_;
  std::vector<double> m_;
};

}  // namespace gibbscl

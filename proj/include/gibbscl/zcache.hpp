#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gibbscl/model.hpp"
#include "gibbscl/numeric.hpp"
#include "gibbscl/partition.hpp"
#include "gibbscl/rng.hpp"

namespace gibbscl {

/// Cubic-spline interpolant of the exact log partition function over a
/// rectangular theta grid. log z is smooth and data independent, so one
/// cache serves every likelihood evaluation of an experiment (posterior
/// grids, MCMC chains, importance sampling). build() validates the spline
/// against direct recursion evaluations at probe points and records the
/// worst error seen.
class LogZCache {
 public:
  /// axes: one strictly increasing grid per parameter component (d <= 2).
  /// The grid is extended by `pad` nodes per side so queries inside the
  /// requested range never hit the natural-spline boundary layer.
  static LogZCache build(const ModelSpec& model, int rows, int cols,
                         std::vector<std::vector<double>> axes, int probe_points = 16,
                         std::uint64_t probe_seed = 7) {
    if (axes.size() != static_cast<std::size_t>(model.dim()))
      throw std::invalid_argument("LogZCache: axis count must match model dimension");
    LogZCache cache;
    cache.model_ = model;
    cache.rows_ = rows;
    cache.cols_ = cols;
    cache.axes_ = pad_axes(std::move(axes));

    if (cache.axes_.size() == 1) {
      const auto& ax = cache.axes_[0];
      std::vector<double> values(ax.size());
      parallel_for(ax.size(), [&](std::size_t i) {
        Vec theta(1);
        theta << ax[i];
        values[i] = log_partition_recursive(theta, model, rows, cols);
      });
      cache.line_ = CubicSpline(ax, values);
    } else {
      const auto& ax0 = cache.axes_[0];
      const auto& ax1 = cache.axes_[1];
      const std::size_t n0 = ax0.size(), n1 = ax1.size();
      std::vector<double> values(n0 * n1);
      parallel_for(n0 * n1, [&](std::size_t idx) {
        Vec theta(2);
        theta << ax0[idx / n1], ax1[idx % n1];
        values[idx] = log_partition_recursive(theta, model, rows, cols);
      });
      cache.rows_splines_.reserve(n0);
      for (std::size_t i = 0; i < n0; ++i) {
        std::vector<double> line(values.begin() + i * n1, values.begin() + (i + 1) * n1);
        cache.rows_splines_.emplace_back(ax1, std::move(line));
      }
    }
    cache.validate(probe_points, probe_seed);
    return cache;
  }

  double operator()(const Vec& theta) const {
    if (axes_.size() == 1) return line_(theta[0]);
    const std::size_t n0 = axes_[0].size();
    std::vector<double> column(n0);
    for (std::size_t i = 0; i < n0; ++i) column[i] = rows_splines_[i](theta[1]);
    return CubicSpline(axes_[0], std::move(column))(theta[0]);
  }

  /// Largest |spline - exact| over the validation probes.
  double max_probe_error() const { return max_probe_error_; }

  const ModelSpec& model() const { return model_; }

 private:
  static std::vector<std::vector<double>> pad_axes(std::vector<std::vector<double>> axes) {
    constexpr int pad = 3;
    for (auto& ax : axes) {
      if (ax.size() < 4) throw std::invalid_argument("LogZCache: need at least 4 nodes per axis");
      const double h_lo = ax[1] - ax[0];
      const double h_hi = ax[ax.size() - 1] - ax[ax.size() - 2];
      std::vector<double> padded;
      padded.reserve(ax.size() + 2 * pad);
      for (int p = pad; p >= 1; --p) padded.push_back(ax.front() - p * h_lo);
      padded.insert(padded.end(), ax.begin(), ax.end());
      for (int p = 1; p <= pad; ++p) padded.push_back(ax.back() + p * h_hi);
      ax = std::move(padded);
    }
    return axes;
  }

  void validate(int probe_points, std::uint64_t probe_seed) {
    max_probe_error_ = 0.0;
    if (probe_points <= 0) return;
    std::vector<double> errs(static_cast<std::size_t>(probe_points));
    parallel_for(errs.size(), [&](std::size_t p) {
      RngStream rng = RngStream::derive(probe_seed, {p});
      Vec theta(static_cast<Eigen::Index>(axes_.size()));
      for (std::size_t j = 0; j < axes_.size(); ++j) {
        // probe strictly inside the unpadded range
        const double lo = axes_[j][3], hi = axes_[j][axes_[j].size() - 4];
        theta[static_cast<Eigen::Index>(j)] = lo + (hi - lo) * rng.uniform01();
      }
      errs[p] = std::abs((*this)(theta) - log_partition_recursive(theta, model_, rows_, cols_));
    });
    for (double e : errs) max_probe_error_ = std::max(max_probe_error_, e);
  }

  ModelSpec model_;
  int rows_ = 0, cols_ = 0;
  std::vector<std::vector<double>> axes_;
  CubicSpline line_;                        // d = 1
  std::vector<CubicSpline> rows_splines_;   // d = 2: spline in theta_2 per theta_1 node
  double max_probe_error_ = 0.0;
};

/// Evenly spaced axis helper.
inline std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 2 || !(hi > lo)) throw std::invalid_argument("linspace: bad range");
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    v[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (count - 1);
  return v;
}

}  // namespace gibbscl

#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "gibbscl/lattice.hpp"
#include "gibbscl/numeric.hpp"

namespace gibbscl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Model families on the first-order lattice graph. Each interaction
/// statistic counts every edge of its graph exactly once (concordant pairs
/// +1, discordant -1), matching the factorisation used by the exact engine.
enum class ModelVariant {
  IsingIsotropic,    ///< d = 1: all first-order edges, one coupling
  IsingAnisotropic,  ///< d = 2: (vertical edges, horizontal edges)
  Autologistic,      ///< d = 2: (spin sum, all first-order edges)
};

struct ModelSpec {
  ModelVariant variant = ModelVariant::IsingIsotropic;

  int dim() const { return variant == ModelVariant::IsingIsotropic ? 1 : 2; }
  bool has_abundance() const { return variant == ModelVariant::Autologistic; }

  static ModelSpec ising() { return {ModelVariant::IsingIsotropic}; }
  static ModelSpec anisotropic() { return {ModelVariant::IsingAnisotropic}; }
  static ModelSpec autologistic() { return {ModelVariant::Autologistic}; }

  std::string name() const {
    switch (variant) {
      case ModelVariant::IsingIsotropic: return "ising";
      case ModelVariant::IsingAnisotropic: return "anisotropic";
      case ModelVariant::Autologistic: return "autologistic";
    }
    return "?";
  }

  static ModelSpec from_name(const std::string& s) {
    if (s == "ising") return ising();
    if (s == "anisotropic") return anisotropic();
    if (s == "autologistic") return autologistic();
    throw std::invalid_argument("unknown model '" + s + "' (ising|anisotropic|autologistic)");
  }
};

inline void check_theta(const Vec& theta, const ModelSpec& model) {
  if (theta.size() != model.dim())
    throw std::invalid_argument("parameter vector has dimension " + std::to_string(theta.size()) +
                                ", model expects " + std::to_string(model.dim()));
  if (!theta.allFinite()) throw std::invalid_argument("parameter vector must be finite");
}

/// Spin sum s0 and once-per-edge interaction counts (vertical, horizontal).
struct RawStats {
  long s0 = 0;
  long vertical = 0;
  long horizontal = 0;
};

inline RawStats raw_statistics(const Lattice& y) {
  RawStats st;
  const int m = y.rows(), mp = y.cols();
  for (int i = 0; i < y.size(); ++i) {
    const int s = y.at(i);
    st.s0 += s;
    if (y.row_of(i) < m - 1) st.vertical += s * y.at(i + 1);
    if (y.col_of(i) < mp - 1) st.horizontal += s * y.at(i + m);
  }
  return st;
}

/// Assemble the model's statistic vector from the raw triple.
inline Vec stats_from_raw(double s0, double sv, double sh, const ModelSpec& model) {
  Vec s(model.dim());
  switch (model.variant) {
    case ModelVariant::IsingIsotropic: s << sv + sh; break;
    case ModelVariant::IsingAnisotropic: s << sv, sh; break;
    case ModelVariant::Autologistic: s << s0, sv + sh; break;
  }
  return s;
}

/// Sufficient statistic vector of the model: (s1) for isotropic Ising,
/// (s_vertical, s_horizontal) for the anisotropic Ising, (s0, s1) for the
/// autologistic model. Components are integer-valued.
inline Vec sufficient_statistics(const Lattice& y, const ModelSpec& model) {
  const RawStats st = raw_statistics(y);
  return stats_from_raw(static_cast<double>(st.s0), static_cast<double>(st.vertical),
                        static_cast<double>(st.horizontal), model);
}

/// theta . s(y), the log of the unnormalized likelihood q(y | theta).
inline double unnormalized_log_likelihood(const Lattice& y, const Vec& theta, const ModelSpec& model) {
  check_theta(theta, model);
  return theta.dot(sufficient_statistics(y, model));
}

/// Per-model coefficients of the local log-odds: a_i = y_i * (abundance +
/// theta_v * vsum_i + theta_h * hsum_i).
struct LocalCoeffs {
  double abundance = 0.0;
  double theta_v = 0.0;
  double theta_h = 0.0;
};

inline LocalCoeffs local_coeffs(const Vec& theta, const ModelSpec& model) {
  check_theta(theta, model);
  switch (model.variant) {
    case ModelVariant::IsingIsotropic: return {0.0, theta[0], theta[0]};
    case ModelVariant::IsingAnisotropic: return {0.0, theta[0], theta[1]};
    case ModelVariant::Autologistic: return {theta[0], theta[1], theta[1]};
  }
  return {};
}

/// Full-conditional probability that site i keeps its current value given
/// the rest of the lattice: exp(a) / (exp(a) + exp(-a)) with
/// a = theta0 y_i + sum_k theta_k y_i (neighbour sum under graph k).
inline double site_conditional_probability(const Lattice& y, int i, const Vec& theta,
                                           const ModelSpec& model) {
  if (i < 0 || i >= y.size()) throw std::out_of_range("site_conditional_probability: bad site index");
  const LocalCoeffs lc = local_coeffs(theta, model);
  const double a = y.at(i) * (lc.abundance + lc.theta_v * y.vertical_neighbour_sum(i) +
                              lc.theta_h * y.horizontal_neighbour_sum(i));
  return two_state_prob(a);
}

}  // namespace gibbscl

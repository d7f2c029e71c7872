#pragma once

#include <memory>
#include <stdexcept>

#include "gibbscl/model.hpp"
#include "gibbscl/numeric.hpp"

namespace gibbscl {

/// Log prior with the derivatives the posterior identities need.
class Prior {
 public:
  virtual ~Prior() = default;
  virtual double log_density(const Vec& theta) const = 0;
  virtual Vec gradient(const Vec& theta) const = 0;
  virtual Mat hessian(const Vec& theta) const = 0;
  virtual bool in_support(const Vec& theta) const = 0;
};

/// Uniform prior on a box; density 1/volume inside, zero outside.
class UniformBoxPrior : public Prior {
 public:
  UniformBoxPrior(Vec lower, Vec upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size() || lower_.size() == 0)
      throw std::invalid_argument("UniformBoxPrior: bad bounds");
    log_volume_ = 0.0;
    for (int j = 0; j < lower_.size(); ++j) {
      if (!(upper_[j] > lower_[j])) throw std::invalid_argument("UniformBoxPrior: empty box");
      log_volume_ += std::log(upper_[j] - lower_[j]);
    }
  }

  double log_density(const Vec& theta) const override {
    return in_support(theta) ? -log_volume_ : kNegInf;
  }
  Vec gradient(const Vec& theta) const override { return Vec::Zero(theta.size()); }
  Mat hessian(const Vec& theta) const override { return Mat::Zero(theta.size(), theta.size()); }
  bool in_support(const Vec& theta) const override {
    for (int j = 0; j < lower_.size(); ++j)
      if (theta[j] < lower_[j] || theta[j] > upper_[j]) return false;
    return true;
  }

  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }

 private:
  Vec lower_, upper_;
  double log_volume_ = 0.0;
};

/// Gaussian prior with full covariance.
class GaussianPrior : public Prior {
 public:
  GaussianPrior(Vec mean, Mat cov) : mean_(std::move(mean)) {
    const auto llt = cov.llt();
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("GaussianPrior: covariance not positive definite");
    precision_ = llt.solve(Mat::Identity(cov.rows(), cov.cols()));
    const Mat l = llt.matrixL();
    log_norm_ = -0.5 * mean_.size() * std::log(2.0 * M_PI) - l.diagonal().array().log().sum();
  }

  double log_density(const Vec& theta) const override {
    const Vec d = theta - mean_;
    return log_norm_ - 0.5 * d.dot(precision_ * d);
  }
  Vec gradient(const Vec& theta) const override { return -precision_ * (theta - mean_); }
  Mat hessian(const Vec&) const override { return -precision_; }
  bool in_support(const Vec&) const override { return true; }

 private:
  Vec mean_;
  Mat precision_;
  double log_norm_ = 0.0;
};

}  // namespace gibbscl

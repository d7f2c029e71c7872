#include <catch2/catch_amalgamated.hpp>

#include "gibbscl/adjust.hpp"
#include "gibbscl/composite.hpp"
#include "gibbscl/rng.hpp"
#include "oracles.hpp"

using namespace gibbscl;

namespace {
Mat random_spd(int d, RngStream& rng, double ridge = 0.3) {
  Mat r(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) r(i, j) = rng.normal();
  return r * r.transpose() + ridge * Mat::Identity(d, d);
}
}  // namespace

TEST_CASE("scalar magnitude weight", "[adjust]") {
  REQUIRE(scalar_magnitude_weight(3.0, 3.0).value == 1.0);
  REQUIRE(scalar_magnitude_weight(2.0, 8.0).value == 0.25);
  REQUIRE_THROWS_AS(scalar_magnitude_weight(1.0, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(scalar_magnitude_weight(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("matrix weight options on the reference pair", "[adjust]") {
  Mat k = Mat::Zero(2, 2), kcl = Mat::Identity(2, 2);
  k(0, 0) = 4.0;
  k(1, 1) = 1.0;
  REQUIRE(matrix_magnitude_weight(k, kcl, 1).value == Catch::Approx(2.0).epsilon(1e-14));
  REQUIRE(matrix_magnitude_weight(k, kcl, 2).value == Catch::Approx(2.5).epsilon(1e-14));
  REQUIRE(matrix_magnitude_weight(k, kcl, 3).value == Catch::Approx(2.5).epsilon(1e-14));
  REQUIRE(matrix_magnitude_weight(k, kcl, 4).value == Catch::Approx(2.5).epsilon(1e-14));
  REQUIRE(matrix_magnitude_weight(k, kcl, 5).value ==
          Catch::Approx(std::sqrt(17.0 / 2.0)).epsilon(1e-14));
  REQUIRE_THROWS_AS(matrix_magnitude_weight(k, kcl, 6), std::invalid_argument);
  REQUIRE_THROWS_AS(matrix_magnitude_weight(k, Mat::Zero(2, 2), 1), std::invalid_argument);
}

TEST_CASE("all weight options return 1 on identical pairs and 1/c under scaling", "[adjust]") {
  RngStream rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const Mat k = random_spd(2, rng);
    for (int o = 1; o <= 5; ++o)
      REQUIRE(matrix_magnitude_weight(k, k, o).value == Catch::Approx(1.0).margin(1e-12));
    const double c = 0.25 + 4.0 * rng.uniform01();
    for (int o = 1; o <= 5; ++o)
      REQUIRE(matrix_magnitude_weight(k, c * k, o).value == Catch::Approx(1.0 / c).margin(1e-12));
  }
}

TEST_CASE("d=1 matrix options coincide with the scalar rule", "[adjust]") {
  RngStream rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const double vf = 0.5 + rng.uniform01();
    const double vc = 0.5 + 3.0 * rng.uniform01();
    const double w = scalar_magnitude_weight(vf, vc).value;
    const Mat kf = Mat::Constant(1, 1, vf), kc = Mat::Constant(1, 1, vc);
    for (int o = 1; o <= 5; ++o)
      REQUIRE(matrix_magnitude_weight(kf, kc, o).value == Catch::Approx(w).epsilon(1e-13));
  }
}

TEST_CASE("curvature matrix solves its defining identity", "[adjust]") {
  RngStream rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    const Mat h_full = -random_spd(2, rng);
    const Mat h_cl = -random_spd(2, rng);
    const CurvatureMatrix cm = curvature_matrix(h_full, h_cl);
    REQUIRE(cm.residual < 1e-6);
    REQUIRE((cm.w.transpose() * h_cl * cm.w - h_full).norm() / h_full.norm() < 1e-6);
    // triangular by construction
    REQUIRE(cm.w(1, 0) == 0.0);
  }
}

TEST_CASE("curvature matrix special cases and failure modes", "[adjust]") {
  RngStream rng(5);
  const Mat h = -random_spd(2, rng);
  const CurvatureMatrix id = curvature_matrix(h, h);
  REQUIRE((id.w - Mat::Identity(2, 2)).norm() < 1e-10);

  // d = 1 reduces to sqrt(H_full / H_cl)
  const Mat h1 = Mat::Constant(1, 1, -3.0), h2 = Mat::Constant(1, 1, -12.0);
  REQUIRE(curvature_matrix(h1, h2).w(0, 0) == Catch::Approx(0.5).epsilon(1e-13));

  // a positive-definite "Hessian" must be rejected
  REQUIRE_THROWS_AS(curvature_matrix(Mat::Identity(2, 2), h), std::invalid_argument);
}

TEST_CASE("scalar weight matches curvatures of the tempered composite posterior", "[adjust]") {
  // with exact variances, the second derivative of w * log f_CL at theta_b
  // equals that of the exact log likelihood at theta_a, by construction of w
  const auto model = ModelSpec::ising();
  RngStream rng(12);
  std::vector<std::int8_t> s(16);
  for (auto& v : s) v = rng.bernoulli(0.5) ? 1 : -1;
  const Lattice y(4, 4, std::move(s));
  const BlockSet blocks = enumerate_blocks(4, 4, 2);

  Vec theta_a(1), theta_b(1);
  theta_a << 0.42;
  theta_b << 0.35;

  Vec mean_full;
  Mat cov_full;
  oracle::moments(4, 4, theta_a, model, mean_full, cov_full);

  double var_blocks = 0.0;
  for (const Block& block : blocks.blocks) {
    const BlockContext ctx(y, block);
    std::vector<double> logq(16);
    std::vector<double> s1(16);
    for (std::uint64_t b = 0; b < 16; ++b) {
      std::vector<std::int8_t> spins(4);
      for (int j = 0; j < 4; ++j) spins[static_cast<std::size_t>(j)] = (b >> j) & 1 ? 1 : -1;
      s1[b] = ctx.conditional_stats(spins, model)[0];
      logq[b] = theta_b[0] * s1[b];
    }
    const double lz = oracle::log_sum(logq);
    double m1 = 0.0, m2 = 0.0;
    for (std::uint64_t b = 0; b < 16; ++b) {
      const double p = std::exp(logq[b] - lz);
      m1 += p * s1[b];
      m2 += p * s1[b] * s1[b];
    }
    var_blocks += m2 - m1 * m1;
  }

  const double w = scalar_magnitude_weight(cov_full(0, 0), var_blocks).value;
  const CompositeLikelihood cl(y, blocks, model);
  const double h = 1e-4;
  auto cl_at = [&](double x) { return cl.log_density(Vec::Constant(1, x)); };
  const double curv_cl =
      w * (cl_at(theta_b[0] + h) - 2 * cl_at(theta_b[0]) + cl_at(theta_b[0] - h)) / (h * h);
  auto ll_at = [&](double x) {
    const Vec t = Vec::Constant(1, x);
    return unnormalized_log_likelihood(y, t, model) - log_partition_recursive(t, model, 4, 4);
  };
  const double curv_full =
      (ll_at(theta_a[0] + h) - 2 * ll_at(theta_a[0]) + ll_at(theta_a[0] - h)) / (h * h);
  REQUIRE(curv_cl == Catch::Approx(curv_full).margin(1e-3));
}

TEST_CASE("mean and curvature adjusted evaluators", "[adjust]") {
  // synthetic CL log posterior: concave quadratic centred at theta_cl
  Vec theta_cl(2), theta_star(2);
  theta_cl << 0.2, 0.6;
  theta_star << 0.35, 0.4;
  Mat h_cl(2, 2);
  h_cl << -5.0, 1.0, 1.0, -3.0;
  const LogDensityFn cl = [&](const Vec& x) {
    const Vec d = x - theta_cl;
    return 0.5 * d.dot(h_cl * d);
  };

  // evaluating the mean-adjusted density at theta* gives the CL mode value
  REQUIRE(mean_adjusted_log_posterior(theta_star, theta_star, theta_cl, cl) ==
          Catch::Approx(cl(theta_cl)).margin(1e-14));
  // identity shift: theta*_CL = theta*
  REQUIRE(mean_adjusted_log_posterior(Vec(theta_cl), theta_cl, theta_cl, cl) == cl(theta_cl));

  // the shifted density peaks at theta*: compare against nearby points
  const double at_mode = mean_adjusted_log_posterior(theta_star, theta_star, theta_cl, cl);
  for (double eps : {-0.01, 0.01}) {
    Vec x = theta_star;
    x[0] += eps;
    REQUIRE(mean_adjusted_log_posterior(x, theta_star, theta_cl, cl) < at_mode);
  }

  // curvature: W = I leaves the density unchanged
  Vec probe(2);
  probe << 0.17, 0.52;
  REQUIRE(curvature_adjusted_log_posterior(probe, theta_cl, Mat::Identity(2, 2), cl) ==
          Catch::Approx(cl(probe)).margin(1e-14));
  // any W keeps the maximum at theta*_CL
  Mat w(2, 2);
  w << 1.3, 0.4, 0.0, 0.8;
  const double mode_val = curvature_adjusted_log_posterior(Vec(theta_cl), theta_cl, w, cl);
  REQUIRE(mode_val == Catch::Approx(cl(theta_cl)).margin(1e-14));
  for (double eps : {-0.02, 0.02}) {
    Vec x = theta_cl;
    x[1] += eps;
    REQUIRE(curvature_adjusted_log_posterior(x, theta_cl, w, cl) < mode_val);
  }

  // the curvature-adjusted Hessian at the mode is W' H_cl W
  RngStream rng6(6);
  const Mat h_full = -random_spd(2, rng6);  // target curvature
  const CurvatureMatrix cm = curvature_matrix(h_full, h_cl);
  const double h_step = 1e-4;
  Mat fd(2, 2);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      Vec pp = theta_cl, pm = theta_cl, mp = theta_cl, mm = theta_cl;
      pp[a] += h_step; pp[b] += h_step;
      pm[a] += h_step; pm[b] -= h_step;
      mp[a] -= h_step; mp[b] += h_step;
      mm[a] -= h_step; mm[b] -= h_step;
      fd(a, b) = (curvature_adjusted_log_posterior(pp, theta_cl, cm.w, cl) -
                  curvature_adjusted_log_posterior(pm, theta_cl, cm.w, cl) -
                  curvature_adjusted_log_posterior(mp, theta_cl, cm.w, cl) +
                  curvature_adjusted_log_posterior(mm, theta_cl, cm.w, cl)) /
                 (4 * h_step * h_step);
    }
  REQUIRE((fd - h_full).norm() < 1e-5);
}

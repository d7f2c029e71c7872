#include <catch2/catch_amalgamated.hpp>

#include "gibbscl/blocks.hpp"
#include "gibbscl/composite.hpp"
#include "gibbscl/partition.hpp"
#include "gibbscl/rng.hpp"
#include "oracles.hpp"

using namespace gibbscl;

namespace {
Lattice random_lattice(int rows, int cols, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<std::int8_t> s(static_cast<std::size_t>(rows) * cols);
  for (auto& v : s) v = rng.bernoulli(0.5) ? 1 : -1;
  return Lattice(rows, cols, std::move(s));
}
}  // namespace

TEST_CASE("free partition values", "[partition]") {
  Vec zero = Vec::Zero(1);
  REQUIRE(log_partition_recursive(zero, ModelSpec::ising(), 5, 7) ==
          Catch::Approx(35.0 * std::log(2.0)).epsilon(1e-13));
  REQUIRE(log_partition_bruteforce(zero, ModelSpec::ising(), 2, 2) ==
          Catch::Approx(std::log(16.0)).epsilon(1e-14));

  // 1x2 lattice: z = 2 e^theta + 2 e^-theta
  Vec t(1);
  t << 0.3;
  const double closed = std::log(2.0 * std::exp(0.3) + 2.0 * std::exp(-0.3));
  REQUIRE(log_partition_recursive(t, ModelSpec::ising(), 1, 2) == Catch::Approx(closed).epsilon(1e-14));
  REQUIRE(log_partition_bruteforce(t, ModelSpec::ising(), 1, 2) == Catch::Approx(closed).epsilon(1e-14));
}

TEST_CASE("recursive, brute-force, log-space and oracle partitions agree", "[partition]") {
  Vec t_auto(2), t_aniso(2), t_iso(1);
  t_auto << 0.05, 0.4;
  t_aniso << -0.2, 0.55;
  t_iso << 0.4;
  struct Case {
    ModelSpec model;
    Vec theta;
  };
  const Case cases[] = {{ModelSpec::autologistic(), t_auto},
                        {ModelSpec::anisotropic(), t_aniso},
                        {ModelSpec::ising(), t_iso}};
  for (const auto& [model, theta] : cases) {
    for (auto [m, mp] : {std::pair{1, 1}, {1, 4}, {4, 1}, {2, 3}, {3, 4}, {4, 4}}) {
      const double rec = log_partition_recursive(theta, model, m, mp);
      const double bf = log_partition_bruteforce(theta, model, m, mp);
      const double ora = oracle::log_partition(m, mp, theta, model);
      const double lse = detail::log_partition_lse(field_lattice_for(theta, model, m, mp));
      REQUIRE(rec == Catch::Approx(bf).margin(1e-11));
      REQUIRE(rec == Catch::Approx(ora).margin(1e-10));
      REQUIRE(rec == Catch::Approx(lse).margin(1e-11));
    }
  }
}

TEST_CASE("partition is invariant under lattice transposition", "[partition]") {
  Vec t(2);
  t << 0.1, 0.35;
  // transposing the lattice swaps the roles of the two anisotropic couplings
  Vec t_swapped(2);
  t_swapped << 0.35, 0.1;
  REQUIRE(log_partition_recursive(t, ModelSpec::anisotropic(), 3, 5) ==
          Catch::Approx(log_partition_recursive(t_swapped, ModelSpec::anisotropic(), 5, 3))
              .epsilon(1e-13));
  Vec iso(1);
  iso << 0.4;
  REQUIRE(log_partition_recursive(iso, ModelSpec::ising(), 2, 6) ==
          Catch::Approx(log_partition_recursive(iso, ModelSpec::ising(), 6, 2)).epsilon(1e-13));
}

TEST_CASE("partition lower bound and lag guard", "[partition]") {
  Vec t(1);
  t << 0.8;
  const int m = 4, mp = 5;
  const double lz = log_partition_recursive(t, ModelSpec::ising(), m, mp);
  const double edges = (m - 1) * mp + m * (mp - 1);
  REQUIRE(lz >= m * mp * std::log(2.0) - 0.8 * edges);
  REQUIRE(std::isfinite(lz));

  FieldLattice fl = field_lattice_for(t, ModelSpec::ising(), 30, 30);
  REQUIRE_THROWS_AS(log_partition(fl), std::invalid_argument);
  REQUIRE_THROWS_AS(StatHistogram(5, 5), std::invalid_argument);
}

TEST_CASE("block conditional partition: whole lattice block equals full partition", "[partition]") {
  Vec t(2);
  t << 0.05, 0.4;
  const auto model = ModelSpec::autologistic();
  const auto y = random_lattice(4, 4, 3);
  const Block whole = make_block(4, 4, 0, 0, 4);
  REQUIRE(whole.boundary.empty());
  REQUIRE(block_conditional_log_partition(y, whole, t, model) ==
          Catch::Approx(log_partition_recursive(t, model, 4, 4)).margin(1e-10));
}

TEST_CASE("block conditional partition matches enumeration with fixed boundary", "[partition]") {
  Vec t(1);
  t << 0.4;
  const auto model = ModelSpec::ising();

  // 2x2 block inside an all +1 lattice: compare against direct enumeration
  const auto ones = Lattice::filled(4, 4, 1);
  const Block block = make_block(4, 4, 1, 1, 2);
  const auto enumd = oracle::enumerate_block(ones, block.sites, t, model);
  // z_block = sum over block configs of exp(theta . s_cond); recover it from
  // the full-joint enumeration: q(config) / q_rest where the rest-terms are
  // constant, so compare normalized densities instead.
  const BlockContext ctx(ones, block);
  const double lz = log_partition(ctx.conditional_model(t, model));
  for (std::uint64_t b = 0; b < enumd.probs.size(); ++b) {
    std::vector<std::int8_t> spins(4);
    for (int j = 0; j < 4; ++j) spins[static_cast<std::size_t>(j)] = (b >> j) & 1 ? 1 : -1;
    const double log_dens = t.dot(ctx.conditional_stats(spins, model)) - lz;
    REQUIRE(std::exp(log_dens) == Catch::Approx(enumd.probs[b]).margin(1e-12));
  }

  // theta = 0: k^2 log 2
  Vec zero = Vec::Zero(1);
  REQUIRE(block_conditional_log_partition(ones, block, zero, model) ==
          Catch::Approx(4.0 * std::log(2.0)).epsilon(1e-14));

  // 1x1 block with cancelling neighbours
  const Lattice mixed(3, 3, {1, -1, 1, -1, 1, -1, 1, -1, 1});
  const Block single = make_block(3, 3, 1, 0, 1);
  Vec zero2 = Vec::Zero(2);
  REQUIRE(block_conditional_log_partition(mixed, single, zero2, ModelSpec::autologistic()) ==
          Catch::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("exact_mean_stats matches enumeration moments", "[partition]") {
  Vec t(1);
  t << 0.4;
  Vec mean_o;
  Mat cov_o;
  oracle::moments(3, 3, t, ModelSpec::ising(), mean_o, cov_o);
  const Vec fd = exact_mean_stats(t, ModelSpec::ising(), 3, 3);
  REQUIRE(fd[0] == Catch::Approx(mean_o[0]).margin(1e-6));

  Vec t2(2);
  t2 << 0.05, 0.4;
  Vec mean2;
  Mat cov2;
  oracle::moments(3, 3, t2, ModelSpec::autologistic(), mean2, cov2);
  const Vec fd2 = exact_mean_stats(t2, ModelSpec::autologistic(), 3, 3);
  REQUIRE(fd2[0] == Catch::Approx(mean2[0]).margin(1e-6));
  REQUIRE(fd2[1] == Catch::Approx(mean2[1]).margin(1e-6));

  // abundance mean vanishes at theta = 0 by symmetry
  Vec zero2 = Vec::Zero(2);
  REQUIRE(exact_mean_stats(zero2, ModelSpec::autologistic(), 3, 4)[0] == Catch::Approx(0.0).margin(1e-7));

  // square-lattice symmetry: equal couplings give equal directional means
  Vec tc(2);
  tc << 0.3, 0.3;
  const Vec m_aniso = exact_mean_stats(tc, ModelSpec::anisotropic(), 4, 4);
  REQUIRE(m_aniso[0] == Catch::Approx(m_aniso[1]).margin(1e-7));
}

TEST_CASE("log partition is convex in theta", "[partition]") {
  // finite-difference Hessian of log z must be PSD (it is a covariance)
  const auto model = ModelSpec::autologistic();
  const double h = 1e-4;
  for (auto base : {std::pair{0.05, 0.4}, {-0.2, 0.1}, {0.3, -0.3}}) {
    Vec t(2);
    t << base.first, base.second;
    auto lz = [&](double a, double b) {
      Vec x(2);
      x << a, b;
      return log_partition_recursive(x, model, 3, 4);
    };
    const double f0 = lz(t[0], t[1]);
    const double haa = (lz(t[0] + h, t[1]) - 2 * f0 + lz(t[0] - h, t[1])) / (h * h);
    const double hbb = (lz(t[0], t[1] + h) - 2 * f0 + lz(t[0], t[1] - h)) / (h * h);
    const double hab = (lz(t[0] + h, t[1] + h) - lz(t[0] + h, t[1] - h) - lz(t[0] - h, t[1] + h) +
                        lz(t[0] - h, t[1] - h)) /
                       (4 * h * h);
    REQUIRE(haa >= -1e-6);
    REQUIRE(hbb >= -1e-6);
    REQUIRE(haa * hbb - hab * hab >= -1e-4);  // determinant of the 2x2 FD Hessian
  }
}

TEST_CASE("StatHistogram moments equal the oracle", "[partition]") {
  Vec t(2);
  t << 0.1, 0.25;
  const auto model = ModelSpec::anisotropic();
  Vec mean_h, mean_o;
  Mat cov_h, cov_o;
  StatHistogram(3, 4).moments(t, model, mean_h, cov_h);
  oracle::moments(3, 4, t, model, mean_o, cov_o);
  REQUIRE((mean_h - mean_o).norm() < 1e-10);
  REQUIRE((cov_h - cov_o).norm() < 1e-9);
}

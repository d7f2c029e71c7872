#include <catch2/catch_amalgamated.hpp>

#include "gibbscl/mcmc.hpp"

using namespace gibbscl;

TEST_CASE("random-walk chain recovers a standard normal", "[mcmc]") {
  auto target = [](const Vec& t) { return -0.5 * t.squaredNorm(); };
  RngStream rng(11);
  const Chain chain = rwm_sample(target, Vec::Zero(1), 50000, 5000, Vec::Constant(1, 2.4), rng);
  REQUIRE(chain.samples.rows() == 45000);
  REQUIRE(chain.acceptance_rate > 0.2);
  REQUIRE(chain.acceptance_rate < 0.8);
  const Mat cov = posterior_covariance(chain);
  REQUIRE(cov(0, 0) == Catch::Approx(1.0).epsilon(0.1));
  REQUIRE(std::abs(chain_mean(chain)[0]) < 0.05);
}

TEST_CASE("chains are deterministic under a fixed seed", "[mcmc]") {
  auto target = [](const Vec& t) { return -0.5 * t.squaredNorm(); };
  RngStream a(3), b(3);
  const Chain ca = rwm_sample(target, Vec::Zero(2), 2000, 500, Vec::Constant(2, 1.0), a);
  const Chain cb = rwm_sample(target, Vec::Zero(2), 2000, 500, Vec::Constant(2, 1.0), b);
  REQUIRE(ca.samples == cb.samples);
  REQUIRE(ca.acceptance_rate == cb.acceptance_rate);
}

TEST_CASE("degenerate targets and bad arguments are rejected", "[mcmc]") {
  RngStream rng(5);
  // target accepts nothing away from the initial point
  auto spike = [](const Vec& t) { return t[0] == 0.0 ? 0.0 : kNegInf; };
  REQUIRE_THROWS_AS(rwm_sample(spike, Vec::Zero(1), 500, 100, Vec::Constant(1, 1.0), rng),
                    std::runtime_error);

  auto ok = [](const Vec& t) { return -0.5 * t.squaredNorm(); };
  REQUIRE_THROWS_AS(rwm_sample(ok, Vec::Zero(1), 100, 100, Vec::Constant(1, 1.0), rng),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(rwm_sample(ok, Vec::Zero(1), 200, 100, Vec::Constant(1, -1.0), rng),
                    std::invalid_argument);

  Chain tiny;
  tiny.samples = Mat::Zero(10, 1);
  REQUIRE_THROWS_AS(posterior_covariance(tiny), std::invalid_argument);
  Chain flat;
  flat.samples = Mat::Ones(200, 1);
  REQUIRE_THROWS_AS(posterior_covariance(flat), std::runtime_error);
}

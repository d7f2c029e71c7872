#include <catch2/catch_amalgamated.hpp>

#include "gibbscl/moments.hpp"
#include "oracles.hpp"

using namespace gibbscl;

TEST_CASE("full-model Monte Carlo moments approach enumeration values", "[moments]") {
  Vec t(1);
  t << 0.4;
  const auto model = ModelSpec::ising();
  Vec mean;
  Mat cov;
  oracle::moments(3, 3, t, model, mean, cov);

  const MomentEstimates est = mc_full_moments(t, model, 3, 3, 50000, 2024);
  REQUIRE(est.n_draws == 50000);
  REQUIRE(std::abs(est.mean[0] - mean[0]) < 3.0 * est.mean_se()[0]);
  REQUIRE(est.cov(0, 0) > 0.0);
  // variance estimate within a loose fourth-moment band
  REQUIRE(std::abs(est.cov(0, 0) - cov(0, 0)) < 0.1 * cov(0, 0));
}

TEST_CASE("abundance mean vanishes at theta zero", "[moments]") {
  Vec zero = Vec::Zero(2);
  const MomentEstimates est = mc_full_moments(zero, ModelSpec::autologistic(), 4, 4, 20000, 5);
  REQUIRE(std::abs(est.mean[0]) < 4.0 * est.mean_se()[0]);
  REQUIRE(est.cov(0, 0) >= 0.0);
  REQUIRE(est.cov(1, 1) >= 0.0);
}

TEST_CASE("moment estimation is deterministic and thread-count independent", "[moments]") {
  Vec t(2);
  t << 0.05, 0.4;
  const auto model = ModelSpec::autologistic();
  const MomentEstimates a = mc_full_moments(t, model, 4, 4, 3000, 99);
  set_max_threads(1);
  const MomentEstimates b = mc_full_moments(t, model, 4, 4, 3000, 99);
  set_max_threads(0);
  REQUIRE(a.mean == b.mean);
  REQUIRE(a.cov == b.cov);
}

TEST_CASE("block moments and their canonical sum", "[moments]") {
  Vec t(1);
  t << 0.35;
  const auto model = ModelSpec::ising();
  RngStream rng(31);
  std::vector<std::int8_t> s(16);
  for (auto& v : s) v = rng.bernoulli(0.5) ? 1 : -1;
  const Lattice y(4, 4, std::move(s));
  const BlockSet blocks = enumerate_blocks(4, 4, 2);

  const auto moms = mc_block_moments(y, t, blocks, model, 2000, 7);
  REQUIRE(moms.size() == blocks.size());
  for (const auto& m : moms) REQUIRE(m.cov(0, 0) >= 0.0);

  // the sum must not depend on the listing order of the blocks
  BlockSet reversed = blocks;
  std::reverse(reversed.blocks.begin(), reversed.blocks.end());
  const auto moms_rev = mc_block_moments(y, t, reversed, model, 2000, 7);
  const BlockMomentSum sum_a = sum_block_moments(blocks, moms);
  const BlockMomentSum sum_b = sum_block_moments(reversed, moms_rev);
  REQUIRE(sum_a.mean_sum == sum_b.mean_sum);
  REQUIRE(sum_a.cov_sum == sum_b.cov_sum);
}

TEST_CASE("moment argument validation", "[moments]") {
  Vec t(1);
  t << 0.1;
  REQUIRE_THROWS_AS(mc_full_moments(t, ModelSpec::ising(), 3, 3, 1, 0), std::invalid_argument);
}

#include <catch2/catch_amalgamated.hpp>

#include "gibbscl/rng.hpp"

using namespace gibbscl;

TEST_CASE("identical seeds give identical streams", "[rng]") {
  RngStream a(123), b(123);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("derived substreams are reproducible and distinct", "[rng]") {
  RngStream a = RngStream::derive(7, {1, 2});
  RngStream b = RngStream::derive(7, {1, 2});
  RngStream c = RngStream::derive(7, {2, 1});
  REQUIRE(a.next_u64() == b.next_u64());
  REQUIRE(a.next_u64() != c.next_u64());
  REQUIRE(derive_seed(7, {1, 2}) == derive_seed(7, {1, 2}));
  REQUIRE(derive_seed(7, {1}) != derive_seed(8, {1}));
}

TEST_CASE("uniform01 stays in [0,1) and is roughly uniform", "[rng]") {
  RngStream rng(99);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  REQUIRE(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("normal draws have unit variance", "[rng]") {
  RngStream rng(5);
  double sum = 0.0, sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  REQUIRE(std::abs(sum / n) < 0.02);
  REQUIRE(std::abs(sq / n - 1.0) < 0.03);
}

TEST_CASE("uniform_below covers the range without bias", "[rng]") {
  RngStream rng(17);
  std::vector<long> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_below(7)];
  for (long c : counts) REQUIRE(std::abs(c - 10000) < 500);
}

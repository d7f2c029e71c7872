#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "gibbscl/blocks.hpp"

using namespace gibbscl;

TEST_CASE("exhaustive block counts", "[blocks]") {
  REQUIRE(enumerate_blocks(16, 16, 4).size() == 169);  // (16-4+1)^2
  REQUIRE(enumerate_blocks(3, 5, 1).size() == 15);     // pseudolikelihood blocks
  REQUIRE(enumerate_blocks(4, 4, 4).size() == 1);      // full likelihood
  REQUIRE(enumerate_blocks(5, 3, 2).size() == 4 * 2);
  REQUIRE_THROWS_AS(enumerate_blocks(4, 4, 5), std::invalid_argument);
  REQUIRE_THROWS_AS(enumerate_blocks(4, 4, 0), std::invalid_argument);
}

TEST_CASE("blocks arrive in column-major corner order", "[blocks]") {
  const BlockSet set = enumerate_blocks(4, 5, 2);
  std::size_t i = 0;
  for (int c = 0; c + 2 <= 5; ++c)
    for (int r = 0; r + 2 <= 4; ++r) {
      REQUIRE(set.blocks[i].top_row == r);
      REQUIRE(set.blocks[i].top_col == c);
      ++i;
    }
}

TEST_CASE("block membership and boundary invariants", "[blocks]") {
  const int rows = 5, cols = 6;
  for (int k : {1, 2, 3}) {
    const BlockSet set = enumerate_blocks(rows, cols, k);
    for (const Block& b : set.blocks) {
      REQUIRE(b.sites.size() == static_cast<std::size_t>(k) * k);
      const std::set<int> a(b.sites.begin(), b.sites.end());
      REQUIRE(a.size() == b.sites.size());

      // boundary = every outside site adjacent to the block, nothing else
      std::set<int> expected;
      for (int site : b.sites) {
        const int r = site % rows, c = site / rows;
        const int nbrs[4] = {r > 0 ? site - 1 : -1, r < rows - 1 ? site + 1 : -1,
                             c > 0 ? site - rows : -1, c < cols - 1 ? site + rows : -1};
        for (int nb : nbrs)
          if (nb >= 0 && !a.count(nb)) expected.insert(nb);
      }
      const std::set<int> boundary(b.boundary.begin(), b.boundary.end());
      REQUIRE(boundary == expected);

      // A and B are disjoint
      for (int site : b.boundary) REQUIRE_FALSE(a.count(site));
    }
  }

  // whole-lattice block has no boundary
  REQUIRE(enumerate_blocks(4, 4, 4).blocks[0].boundary.empty());
}

TEST_CASE("make_block range checks", "[blocks]") {
  REQUIRE_THROWS_AS(make_block(4, 4, 3, 3, 2), std::out_of_range);
  REQUIRE_THROWS_AS(make_block(4, 4, -1, 0, 2), std::out_of_range);
}

TEST_CASE("block keys identify blocks regardless of listing order", "[blocks]") {
  const BlockSet set = enumerate_blocks(6, 6, 3);
  std::set<std::uint64_t> keys;
  for (const Block& b : set.blocks) keys.insert(block_key(b));
  REQUIRE(keys.size() == set.size());
}

TEST_CASE("conditional stats of the observed block equal full-lattice restrictions", "[blocks]") {
  // on the all-ones lattice, a 2x2 interior block sees 4 interior edges and
  // 8 boundary edges, all concordant
  const auto ones = Lattice::filled(4, 4, 1);
  const Block block = make_block(4, 4, 1, 1, 2);
  const BlockContext ctx(ones, block);
  const Vec s = ctx.observed_stats(ModelSpec::autologistic());
  REQUIRE(s[0] == 4.0);
  REQUIRE(s[1] == 12.0);

  // anisotropic split: 2 vertical interior + 4 vertical cross, same horizontally
  const Vec sa = ctx.observed_stats(ModelSpec::anisotropic());
  REQUIRE(sa[0] == 6.0);
  REQUIRE(sa[1] == 6.0);
}

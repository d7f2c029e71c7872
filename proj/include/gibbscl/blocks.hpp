#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "gibbscl/lattice.hpp"
#include "gibbscl/model.hpp"
#include "gibbscl/partition.hpp"

namespace gibbscl {

/// Contiguous k x k block of lattice sites together with its conditioning
/// boundary (every outside site joined to the block by a first-order edge).
struct Block {
  int top_row = 0;
  int top_col = 0;
  int side = 1;
  std::vector<int> sites;     // lattice indices, column-major within the block
  std::vector<int> boundary;  // sorted lattice indices adjacent to the block

  bool contains(int site) const { return std::binary_search(sites.begin(), sites.end(), site); }
};

struct BlockSet {
  int side = 1;
  std::vector<Block> blocks;

  std::size_t size() const { return blocks.size(); }
};

inline Block make_block(int rows, int cols, int top_row, int top_col, int side) {
  if (side < 1 || top_row < 0 || top_col < 0 || top_row + side > rows || top_col + side > cols)
    throw std::out_of_range("make_block: block outside lattice bounds");
  Block b;
  b.top_row = top_row;
  b.top_col = top_col;
  b.side = side;
  b.sites.reserve(static_cast<std::size_t>(side) * side);
  for (int c = 0; c < side; ++c)
    for (int r = 0; r < side; ++r) b.sites.push_back((top_col + c) * rows + (top_row + r));
  // boundary ring (no corners under first-order adjacency)
  for (int c = 0; c < side; ++c) {
    const int col = top_col + c;
    if (top_row > 0) b.boundary.push_back(col * rows + top_row - 1);
    if (top_row + side < rows) b.boundary.push_back(col * rows + top_row + side);
  }
  for (int r = 0; r < side; ++r) {
    const int row = top_row + r;
    if (top_col > 0) b.boundary.push_back((top_col - 1) * rows + row);
    if (top_col + side < cols) b.boundary.push_back((top_col + side) * rows + row);
  }
  std::sort(b.boundary.begin(), b.boundary.end());
  return b;
}

/// Stable identity of a block within its lattice, used to key RNG substreams
/// and canonical summation order so that results do not depend on the order
/// blocks are listed in.
inline std::uint64_t block_key(const Block& b) {
  return (static_cast<std::uint64_t>(b.top_col) << 40) | (static_cast<std::uint64_t>(b.top_row) << 16) |
         static_cast<std::uint64_t>(b.side);
}

/// All (m - k + 1)(m' - k + 1) k x k blocks, in column-major order of the
/// top-left corner.
inline BlockSet enumerate_blocks(int rows, int cols, int side) {
  if (side < 1 || side > std::min(rows, cols))
    throw std::invalid_argument("enumerate_blocks: block side out of range");
  BlockSet set;
  set.side = side;
  set.blocks.reserve(static_cast<std::size_t>(rows - side + 1) * (cols - side + 1));
  for (int c = 0; c + side <= cols; ++c)
    for (int r = 0; r + side <= rows; ++r) set.blocks.push_back(make_block(rows, cols, r, c, side));
  return set;
}

/// Everything about one block that depends on the observed lattice but not on
/// theta: observed block spins and, per block site, the spin sums of its
/// outside neighbours split by edge direction. Conditional statistics and the
/// conditional model at any theta are assembled from these.
class BlockContext {
 public:
  BlockContext(const Lattice& y, const Block& block) : side_(block.side) {
    const int k = side_;
    const std::size_t nk = static_cast<std::size_t>(k) * k;
    observed_.resize(nk);
    boundary_v_.assign(nk, 0);
    boundary_h_.assign(nk, 0);
    for (int c = 0; c < k; ++c)
      for (int r = 0; r < k; ++r) {
        const int local = c * k + r;
        const int gr = block.top_row + r;
        const int gc = block.top_col + c;
        const int site = y.site(gr, gc);
        observed_[static_cast<std::size_t>(local)] = y.at(site);
        if (r == 0 && gr > 0) boundary_v_[local] += y.at(site - 1);
        if (r == k - 1 && gr < y.rows() - 1) boundary_v_[local] += y.at(site + 1);
        if (c == 0 && gc > 0) boundary_h_[local] += y.at(site - y.rows());
        if (c == k - 1 && gc < y.cols() - 1) boundary_h_[local] += y.at(site + y.rows());
      }
  }

  int side() const { return side_; }
  const std::vector<std::int8_t>& observed_spins() const { return observed_; }

  /// Raw conditional statistic triple of a block configuration: interior
  /// edges once each plus cross-boundary edges against the fixed outside
  /// spins.
  void raw_conditional_stats(std::span<const std::int8_t> spins, long& s0, long& sv, long& sh) const {
    const int k = side_;
    s0 = sv = sh = 0;
    for (int c = 0; c < k; ++c)
      for (int r = 0; r < k; ++r) {
        const int j = c * k + r;
        const int yj = spins[static_cast<std::size_t>(j)];
        s0 += yj;
        sv += yj * boundary_v_[j];
        sh += yj * boundary_h_[j];
        if (r < k - 1) sv += yj * spins[static_cast<std::size_t>(j + 1)];
        if (c < k - 1) sh += yj * spins[static_cast<std::size_t>(j + k)];
      }
  }

  Vec conditional_stats(std::span<const std::int8_t> spins, const ModelSpec& model) const {
    long s0, sv, sh;
    raw_conditional_stats(spins, s0, sv, sh);
    return stats_from_raw(static_cast<double>(s0), static_cast<double>(sv), static_cast<double>(sh),
                          model);
  }

  /// s(y_A | y_-A) of the observed configuration.
  Vec observed_stats(const ModelSpec& model) const { return conditional_stats(observed_, model); }

  /// The conditional model of the block at theta: a k x k field lattice whose
  /// site fields absorb the abundance term and the fixed boundary spins.
  FieldLattice conditional_model(const Vec& theta, const ModelSpec& model) const {
    const LocalCoeffs lc = local_coeffs(theta, model);
    FieldLattice fl;
    fl.rows = side_;
    fl.cols = side_;
    fl.theta_v = lc.theta_v;
    fl.theta_h = lc.theta_h;
    fl.field.resize(observed_.size());
    for (std::size_t j = 0; j < observed_.size(); ++j)
      fl.field[j] = lc.abundance + lc.theta_v * boundary_v_[j] + lc.theta_h * boundary_h_[j];
    return fl;
  }

 private:
  int side_;
  std::vector<std::int8_t> observed_;
  std::vector<int> boundary_v_, boundary_h_;
};

}  // namespace gibbscl

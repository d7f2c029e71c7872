#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gibbscl {

/// Rectangular grid of +/-1 spins. Sites are indexed column-major: top to
/// bottom within each column, columns left to right, so site (r, c) has
/// index c * rows + r and an interior site i has first-order neighbours
/// {i - rows, i - 1, i + 1, i + rows}.
class Lattice {
 public:
  Lattice(int rows, int cols, std::vector<std::int8_t> spins)
      : rows_(rows), cols_(cols), spins_(std::move(spins)) {
    if (rows_ <= 0 || cols_ <= 0) throw std::invalid_argument("Lattice: dimensions must be positive");
    if (spins_.size() != static_cast<std::size_t>(rows_) * cols_)
      throw std::invalid_argument("Lattice: spin count does not match dimensions");
    for (std::int8_t s : spins_)
      if (s != 1 && s != -1) throw std::invalid_argument("Lattice: spins must be +1 or -1");
  }

  static Lattice filled(int rows, int cols, std::int8_t value) {
    return Lattice(rows, cols, std::vector<std::int8_t>(static_cast<std::size_t>(rows) * cols, value));
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return rows_ * cols_; }

  int site(int r, int c) const { return c * rows_ + r; }
  int row_of(int i) const { return i % rows_; }
  int col_of(int i) const { return i / rows_; }

  std::int8_t at(int i) const { return spins_[static_cast<std::size_t>(i)]; }
  std::int8_t at(int r, int c) const { return spins_[static_cast<std::size_t>(site(r, c))]; }
  const std::vector<std::int8_t>& spins() const { return spins_; }

  void set(int i, std::int8_t v) {
    if (v != 1 && v != -1) throw std::invalid_argument("Lattice: spins must be +1 or -1");
    spins_[static_cast<std::size_t>(i)] = v;
  }

  /// Neighbour sum within the column (sites above/below), truncated at edges.
  int vertical_neighbour_sum(int i) const {
    const int r = row_of(i);
    int s = 0;
    if (r > 0) s += at(i - 1);
    if (r < rows_ - 1) s += at(i + 1);
    return s;
  }

  /// Neighbour sum across columns (sites left/right), truncated at edges.
  int horizontal_neighbour_sum(int i) const {
    const int c = col_of(i);
    int s = 0;
    if (c > 0) s += at(i - rows_);
    if (c < cols_ - 1) s += at(i + rows_);
    return s;
  }

  int neighbour_count(int i) const {
    const int r = row_of(i), c = col_of(i);
    return (r > 0) + (r < rows_ - 1) + (c > 0) + (c < cols_ - 1);
  }

  Lattice transposed() const {
    std::vector<std::int8_t> t(spins_.size());
    for (int c = 0; c < cols_; ++c)
      for (int r = 0; r < rows_; ++r) t[static_cast<std::size_t>(r * cols_ + c)] = at(r, c);
    return Lattice(cols_, rows_, std::move(t));
  }

  Lattice flipped() const {
    std::vector<std::int8_t> f(spins_.size());
    for (std::size_t i = 0; i < spins_.size(); ++i) f[i] = static_cast<std::int8_t>(-spins_[i]);
    return Lattice(rows_, cols_, std::move(f));
  }

  bool operator==(const Lattice& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && spins_ == other.spins_;
  }

 private:
  int rows_, cols_;
  std::vector<std::int8_t> spins_;
};

/// Human-readable form: one line per lattice row, "+1"/"-1" tokens separated
/// by spaces (row-major on output even though storage is column-major).
inline void write_lattice_text(std::ostream& os, const Lattice& y) {
  for (int r = 0; r < y.rows(); ++r) {
    for (int c = 0; c < y.cols(); ++c) {
      if (c > 0) os << ' ';
      os << (y.at(r, c) > 0 ? "+1" : "-1");
    }
    os << '\n';
  }
}

inline Lattice read_lattice_text(std::istream& is) {
  std::vector<std::vector<std::int8_t>> grid;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::vector<std::int8_t> row;
    std::string tok;
    while (ls >> tok) {
      if (tok == "+1" || tok == "1")
        row.push_back(1);
      else if (tok == "-1")
        row.push_back(-1);
      else
        throw std::invalid_argument("read_lattice_text: unexpected token '" + tok + "'");
    }
    if (row.empty()) continue;
    if (!grid.empty() && row.size() != grid.front().size())
      throw std::invalid_argument("read_lattice_text: ragged rows");
    grid.push_back(std::move(row));
  }
  if (grid.empty()) throw std::invalid_argument("read_lattice_text: empty input");
  const int rows = static_cast<int>(grid.size());
  const int cols = static_cast<int>(grid.front().size());
  std::vector<std::int8_t> spins(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) spins[static_cast<std::size_t>(c * rows + r)] = grid[r][c];
  return Lattice(rows, cols, std::move(spins));
}

/// Single CSV record: rows, cols, then the column-major spin values.
inline void write_lattice_csv(std::ostream& os, const Lattice& y) {
  os << y.rows() << ',' << y.cols();
  for (int i = 0; i < y.size(); ++i) os << ',' << static_cast<int>(y.at(i));
  os << '\n';
}

inline Lattice read_lattice_csv(std::istream& is) {
  std::string record;
  if (!std::getline(is, record)) throw std::invalid_argument("read_lattice_csv: empty input");
  std::istringstream rs(record);
  std::string field;
  std::vector<long> values;
  while (std::getline(rs, field, ',')) {
    try {
      values.push_back(std::stol(field));
    } catch (const std::exception&) {
      throw std::invalid_argument("read_lattice_csv: bad field '" + field + "'");
    }
  }
  if (values.size() < 3) throw std::invalid_argument("read_lattice_csv: truncated record");
  const int rows = static_cast<int>(values[0]);
  const int cols = static_cast<int>(values[1]);
  if (rows <= 0 || cols <= 0 || values.size() != 2 + static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("read_lattice_csv: dimension/value mismatch");
  std::vector<std::int8_t> spins;
  spins.reserve(values.size() - 2);
  for (std::size_t k = 2; k < values.size(); ++k) {
    if (values[k] != 1 && values[k] != -1)
      throw std::invalid_argument("read_lattice_csv: spins must be +1 or -1");
    spins.push_back(static_cast<std::int8_t>(values[k]));
  }
  return Lattice(rows, cols, std::move(spins));
}

}  // namespace gibbscl

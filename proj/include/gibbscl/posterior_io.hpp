#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "gibbscl/grid.hpp"
#include "gibbscl/mcmc.hpp"
#include "gibbscl/report.hpp"

namespace gibbscl {

// CSV forms of the posterior objects. The first line is a '#'-prefixed JSON
// header carrying run metadata (seeds, configs, evidence); data rows follow a
// plain CSV column header.

inline void write_grid_posterior_csv(std::ostream& os, const GridPosterior& grid,
                                     json header = json::object()) {
  header["kind"] = "grid_posterior";
  header["log_evidence"] = grid.log_evidence();
  os << "# " << header.dump() << '\n';
  os << (grid.dim() == 1 ? "theta_1,log_density" : "theta_1,theta_2,log_density") << '\n';
  const auto& lp = grid.log_density();
  for (std::size_t flat = 0; flat < lp.size(); ++flat) {
    const Vec t = grid.node(flat);
    for (int j = 0; j < t.size(); ++j) os << format_double(t[j]) << ',';
    os << format_double(lp[flat]) << '\n';
  }
}

inline void write_chain_csv(std::ostream& os, const Chain& chain, json header = json::object()) {
  header["kind"] = "chain";
  header["acceptance_rate"] = chain.acceptance_rate;
  header["burn_in"] = chain.burn_in;
  header["iterations"] = chain.iterations;
  os << "# " << header.dump() << '\n';
  const auto d = chain.samples.cols();
  for (Eigen::Index j = 0; j < d; ++j) os << (j ? ",theta_" : "theta_") << (j + 1);
  os << '\n';
  for (Eigen::Index r = 0; r < chain.samples.rows(); ++r) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (j) os << ',';
      os << format_double(chain.samples(r, j));
    }
    os << '\n';
  }
}

struct ChainFile {
  Chain chain;
  json header;
};

inline ChainFile read_chain_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0)
    throw std::invalid_argument("read_chain_csv: missing JSON header line");
  ChainFile out;
  out.header = json::parse(line.substr(2));
  if (out.header.value("kind", "") != "chain")
    throw std::invalid_argument("read_chain_csv: not a chain file");
  out.chain.acceptance_rate = out.header.value("acceptance_rate", 0.0);
  out.chain.burn_in = out.header.value("burn_in", 0);
  out.chain.iterations = out.header.value("iterations", 0);
  if (!std::getline(is, line)) throw std::invalid_argument("read_chain_csv: missing column header");
  const auto d = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  std::vector<double> values;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t pos = 0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const std::size_t next = line.find(',', pos);
      values.push_back(std::stod(line.substr(pos, next - pos)));
      pos = next == std::string::npos ? line.size() : next + 1;
    }
  }
  const auto rows = static_cast<Eigen::Index>(values.size()) / d;
  out.chain.samples.resize(rows, d);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index j = 0; j < d; ++j) out.chain.samples(r, j) = values[static_cast<std::size_t>(r * d + j)];
  return out;
}

}  // namespace gibbscl

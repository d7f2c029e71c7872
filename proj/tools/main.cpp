#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "gibbscl/experiment.hpp"
#include "gibbscl/lattice.hpp"
#include "gibbscl/sampler.hpp"

namespace {

using namespace gibbscl;

Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

int cmd_simulate(const std::string& model_name, const std::vector<double>& theta, int rows, int cols,
                 std::uint64_t seed, const std::string& out_path, const std::string& format) {
  const ModelSpec model = ModelSpec::from_name(model_name);
  RngStream rng = RngStream::derive(seed, {0});
  const Lattice y = exact_sample(to_vec(theta), model, rows, cols, rng);
  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot open " + out_path);
  if (format == "csv")
    write_lattice_csv(os, y);
  else
    write_lattice_text(os, y);
  std::cout << "wrote " << rows << "x" << cols << " lattice to " << out_path << "\n";
  return 0;
}

Lattice load_lattice(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  if (std::filesystem::path(path).extension() == ".csv") return read_lattice_csv(is);
  return read_lattice_text(is);
}

int cmd_calibrate(const std::string& lattice_path, const std::string& model_name, int block_side,
                  int gradient_draws, int covariance_draws, std::uint64_t seed,
                  std::vector<double> prior_lower, std::vector<double> prior_upper,
                  const std::string& out_path) {
  const ModelSpec model = ModelSpec::from_name(model_name);
  const Lattice y = load_lattice(lattice_path);
  const int d = model.dim();
  if (prior_lower.empty()) prior_lower.assign(static_cast<std::size_t>(d), -1.0);
  if (prior_upper.empty()) prior_upper.assign(static_cast<std::size_t>(d), 1.0);
  const UniformBoxPrior prior(to_vec(prior_lower), to_vec(prior_upper));
  const BlockSet blocks = enumerate_blocks(y.rows(), y.cols(), block_side);

  BfgsConfig bfgs;
  bfgs.gradient_draws = gradient_draws;
  const MapEstimates maps = bfgs_map(y, model, blocks, prior, bfgs, derive_seed(seed, {1}));

  const Mat k_full =
      mc_full_moments(maps.full.theta, model, y.rows(), y.cols(), covariance_draws, derive_seed(seed, {2})).cov;
  const auto block_moms =
      mc_block_moments(y, maps.cl.theta, blocks, model, covariance_draws, derive_seed(seed, {3}));
  const Mat k_cl_sum = sum_block_moments(blocks, block_moms).cov_sum;

  json weights = json::object();
  if (d == 1) {
    weights["w"] = scalar_magnitude_weight(k_full(0, 0), k_cl_sum(0, 0)).value;
  } else {
    for (int o = 1; o <= 5; ++o)
      weights["w" + std::to_string(o)] = matrix_magnitude_weight(k_full, k_cl_sum, o).value;
  }
  json curvature = json::object();
  try {
    const CurvatureMatrix cm = curvature_matrix(Mat(-k_full), Mat(-k_cl_sum));
    curvature["W"] = detail::to_std(cm.w);
    curvature["residual"] = cm.residual;
  } catch (const std::exception& e) {
    curvature["error"] = e.what();
  }

  const json report{{"version", kVersion},
                    {"model", model.name()},
                    {"lattice", json{{"rows", y.rows()}, {"cols", y.cols()}}},
                    {"block_side", block_side},
                    {"seed", seed},
                    {"draws", json{{"gradient", gradient_draws}, {"covariance", covariance_draws}}},
                    {"theta_star", detail::to_std(maps.full.theta)},
                    {"theta_star_cl", detail::to_std(maps.cl.theta)},
                    {"iterations", json{{"cl", maps.cl.iterations}, {"full", maps.full.iterations}}},
                    {"gradient_norms", json{{"cl", maps.cl.grad_norm}, {"full", maps.full.grad_norm}}},
                    {"converged", json{{"cl", maps.cl.converged}, {"full", maps.full.converged}}},
                    {"hessian_full", detail::to_std(Mat(-k_full))},
                    {"hessian_cl", detail::to_std(Mat(-k_cl_sum))},
                    {"weights", weights},
                    {"curvature", curvature}};
  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot open " + out_path);
  os << report.dump(2) << '\n';
  std::cout << "theta_star    = " << maps.full.theta.transpose() << "\n"
            << "theta_star_cl = " << maps.cl.theta.transpose() << "\n"
            << "report written to " << out_path << "\n";
  return 0;
}

int cmd_metrics(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream cs(fs::path(dir) / "config_echo.json");
  if (!cs) throw std::runtime_error("no config_echo.json under " + dir);
  json cj;
  cs >> cj;
  const ExperimentConfig cfg = ExperimentConfig::from_json(cj);
  std::vector<ReplicateResult> records;
  for (int i = 0;; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "rep_%05d.json", i);
    const fs::path p = fs::path(dir) / "records" / buf;
    if (!fs::exists(p)) break;
    std::ifstream is(p);
    json j;
    is >> j;
    records.push_back(ReplicateResult::from_json(j));
  }
  if (records.empty()) throw std::runtime_error("no replicate records under " + dir);
  const json summary = summarize(records, cfg);
  std::ofstream os(fs::path(dir) / "summary.json");
  os << summary.dump(2) << '\n';
  std::cout << format_metrics_table(summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composite-likelihood calibration toolkit for Ising/autologistic lattices"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Draw an exact lattice sample and write it to a file");
  std::string sim_model = "ising", sim_out = "lattice.txt", sim_format = "text";
  std::vector<double> sim_theta{0.4};
  int sim_rows = 16, sim_cols = 16;
  std::uint64_t sim_seed = 1;
  sim->add_option("--model", sim_model, "ising|anisotropic|autologistic");
  sim->add_option("--theta", sim_theta, "parameter vector")->expected(-1);
  sim->add_option("--rows", sim_rows);
  sim->add_option("--cols", sim_cols);
  sim->add_option("--seed", sim_seed);
  sim->add_option("--out", sim_out);
  sim->add_option("--format", sim_format, "text|csv");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "MAP pair and calibration report for one lattice");
  std::string cal_lattice, cal_model = "ising", cal_out = "calibration.json";
  int cal_k = 4, cal_gdraws = 100, cal_cdraws = 10000;
  std::uint64_t cal_seed = 1;
  std::vector<double> cal_lo, cal_hi;
  cal->add_option("--lattice", cal_lattice, "lattice file (text or csv)")->required();
  cal->add_option("--model", cal_model);
  cal->add_option("--k", cal_k, "block side");
  cal->add_option("--gradient-draws", cal_gdraws);
  cal->add_option("--covariance-draws", cal_cdraws);
  cal->add_option("--seed", cal_seed);
  cal->add_option("--prior-lower", cal_lo)->expected(-1);
  cal->add_option("--prior-upper", cal_hi)->expected(-1);
  cal->add_option("--out", cal_out);

  // experiment
  auto* exp = app.add_subcommand("experiment", "Run a replicated simulation study");
  int exp_id = 1, exp_replicates = -1, exp_threads = 0;
  std::string exp_profile = "quick", exp_out = "out", exp_weight = "all", exp_config;
  std::uint64_t exp_seed = 0;
  bool exp_emit_grids = false;
  exp->add_option("--experiment", exp_id, "1|2|3");
  exp->add_option("--replicates", exp_replicates, "override replicate count");
  exp->add_option("--seed", exp_seed, "master seed (0 = keep default)");
  exp->add_option("--profile", exp_profile, "paper|quick");
  exp->add_option("--out", exp_out, "output directory");
  exp->add_option("--weight-option", exp_weight, "1..5 or 'all' (experiment 2)");
  exp->add_option("--config", exp_config, "config JSON; other flags override it");
  exp->add_option("--threads", exp_threads, "worker cap (0 = hardware)");
  exp->add_flag("--emit-grids", exp_emit_grids, "write posterior_grid CSVs per replicate");

  // metrics
  auto* met = app.add_subcommand("metrics", "Recompute the metrics table from stored records");
  std::string met_dir = "out";
  met->add_option("--records", met_dir, "experiment output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_model, sim_theta, sim_rows, sim_cols, sim_seed, sim_out, sim_format);
    if (cal->parsed())
      return cmd_calibrate(cal_lattice, cal_model, cal_k, cal_gdraws, cal_cdraws, cal_seed, cal_lo,
                           cal_hi, cal_out);
    if (exp->parsed()) {
      gibbscl::ExperimentConfig cfg;
      if (!exp_config.empty()) {
        std::ifstream is(exp_config);
        if (!is) throw std::runtime_error("cannot open " + exp_config);
        gibbscl::json j;
        is >> j;
        cfg = gibbscl::ExperimentConfig::from_json(j);
        if (exp->count("--experiment") && exp_id != cfg.experiment)
          throw std::runtime_error("--experiment conflicts with config file");
      } else {
        cfg = gibbscl::ExperimentConfig::defaults(exp_id, exp_profile);
      }
      if (exp->count("--profile") && exp_config.empty() == false) {
        // profile from flag re-derives count defaults only when no explicit override
        gibbscl::ExperimentConfig fresh = gibbscl::ExperimentConfig::defaults(cfg.experiment, exp_profile);
        cfg.replicates = fresh.replicates;
        cfg.covariance_draws = fresh.covariance_draws;
        cfg.profile = exp_profile;
      }
      if (exp_replicates > 0) cfg.replicates = exp_replicates;
      if (exp_seed != 0) cfg.seed = exp_seed;
      cfg.out_dir = exp_out;
      cfg.emit_grids = exp_emit_grids;
      if (cfg.experiment == 2) {
        if (exp_weight == "all")
          cfg.weight_options = {1, 2, 3, 4, 5};
        else
          cfg.weight_options = {std::stoi(exp_weight)};
      }
      if (exp_threads > 0) gibbscl::set_max_threads(exp_threads);
      const auto output = gibbscl::run_experiment(cfg);
      std::cout << gibbscl::format_metrics_table(output.summary);
      return 0;
    }
    if (met->parsed()) return cmd_metrics(met_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gibbscl/experiment.hpp"

using namespace gibbscl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Desk-micro configuration: 8x8 lattice, tiny draw counts; exercises the
/// full pipeline in seconds. The prior boxes widen with the posterior, which
/// is much broader on 64 sites than on the production 256.
ExperimentConfig micro(int experiment, const std::string& out) {
  ExperimentConfig cfg = ExperimentConfig::defaults(experiment, "quick");
  cfg.rows = cfg.cols = 8;
  cfg.block_side = 2;
  cfg.replicates = 2;
  cfg.gradient_draws = 50;
  cfg.covariance_draws = 2000;
  cfg.bfgs_max_iterations = 40;
  cfg.mcmc_iterations = 3000;
  cfg.mcmc_burn_in = 1000;
  cfg.pilot_iterations = 800;
  cfg.pilot_burn_in = 200;
  cfg.is_points = 400;
  cfg.is_min_ess = 20.0;
  cfg.grid_points = experiment == 1 ? 120 : 60;
  cfg.zcache_step = experiment == 1 ? 0.01 : 0.05;
  cfg.zcache_probes = 6;
  for (std::size_t j = 0; j < cfg.prior_lower.size(); ++j) {
    cfg.prior_lower[j] = cfg.theta_true[j] - 1.0;
    cfg.prior_upper[j] = cfg.theta_true[j] + 1.0;
  }
  cfg.seed = 321;
  cfg.out_dir = out;
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("experiment config defaults follow the study protocol", "[experiment]") {
  const ExperimentConfig e1 = ExperimentConfig::defaults(1);
  REQUIRE(e1.rows == 16);
  REQUIRE(e1.cols == 16);
  REQUIRE(e1.block_side == 4);
  REQUIRE(e1.replicates == 100);
  REQUIRE(e1.gradient_draws == 100);
  REQUIRE(e1.covariance_draws == 50000);
  REQUIRE(e1.mcmc_iterations == 7000);
  REQUIRE(e1.mcmc_burn_in == 2000);
  REQUIRE(e1.theta_true == std::vector<double>{0.4});

  const ExperimentConfig e2 = ExperimentConfig::defaults(2, "quick");
  REQUIRE(e2.theta_true == std::vector<double>{0.3, 0.5});
  REQUIRE(e2.replicates == 20);
  REQUIRE(e2.covariance_draws == 10000);
  REQUIRE(e2.weight_options == std::vector<int>{1, 2, 3, 4, 5});

  const ExperimentConfig e3 = ExperimentConfig::defaults(3);
  REQUIRE(e3.theta_true == std::vector<double>{0.05, 0.4});

  // config json round trip
  const json j = e2.to_json();
  const ExperimentConfig back = ExperimentConfig::from_json(j);
  REQUIRE(back.to_json() == j);

  REQUIRE_THROWS_AS(ExperimentConfig::defaults(4), std::invalid_argument);
  ExperimentConfig bad = e1;
  bad.theta_true = {2.0};
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("isotropic micro study runs end to end", "[experiment]") {
  const fs::path out = fresh_dir("gibbscl_exp1");
  const ExperimentConfig cfg = micro(1, out.string());
  const ExperimentOutput res = run_experiment(cfg, false);

  REQUIRE(res.records.size() == 2);
  for (const auto& r : res.records) {
    INFO(r.error);
    REQUIRE(r.ok);
    REQUIRE(r.weights.size() == 1);
    REQUIRE(r.weights[0] > 0.0);
    REQUIRE(r.methods.size() == 3);
    for (const auto& m : r.methods) {
      REQUIRE(std::isfinite(m.ratio));
      REQUIRE(m.kl >= -1e-10);
    }
    // estimates should sit in a sane neighbourhood of the truth
    REQUIRE(r.theta_star[0] > -0.3);
    REQUIRE(r.theta_star[0] < 0.9);
  }
  REQUIRE(fs::exists(out / "replicates.csv"));
  REQUIRE(fs::exists(out / "timings.csv"));
  REQUIRE(fs::exists(out / "summary.json"));
  REQUIRE(fs::exists(out / "config_echo.json"));
  REQUIRE(fs::exists(out / "records" / "rep_00000.json"));

  // csv header matches the documented schema
  const std::string csv = slurp(out / "replicates.csv");
  REQUIRE(csv.rfind("replicate,seed,ok,error,theta_star_1,theta_star_cl_1,", 0) == 0);
  REQUIRE(csv.find("cl_calibrated_kl") != std::string::npos);

  const std::string summary = slurp(out / "summary.json");
  REQUIRE(summary.find("\"pseudo\"") != std::string::npos);
}

TEST_CASE("reruns are byte-identical and resumable", "[experiment]") {
  const fs::path out = fresh_dir("gibbscl_det");
  ExperimentConfig cfg = micro(1, out.string());

  // two fresh executions of the same config: byte-identical outputs
  run_experiment(cfg, false);
  const std::string csv_a = slurp(out / "replicates.csv");
  const std::string summary_a = slurp(out / "summary.json");
  fs::remove_all(out);
  run_experiment(cfg, false);
  REQUIRE(slurp(out / "replicates.csv") == csv_a);
  REQUIRE(slurp(out / "summary.json") == summary_a);

  // resuming reuses records (records unchanged on disk)
  const auto stamp = fs::last_write_time(out / "records" / "rep_00001.json");
  run_experiment(cfg, false);
  REQUIRE(fs::last_write_time(out / "records" / "rep_00001.json") == stamp);

  // any subset reproduces the same per-replicate records (timings are
  // wall-clock measurements, so compare records with timings stripped)
  const fs::path out_c = fresh_dir("gibbscl_det_c");
  cfg.out_dir = out_c.string();
  cfg.replicates = 1;
  run_experiment(cfg, false);
  auto record_sans_timings = [](const fs::path& p) {
    json j = json::parse(slurp(p));
    j.erase("timings");
    return j.dump();
  };
  REQUIRE(record_sans_timings(out / "records" / "rep_00000.json") ==
          record_sans_timings(out_c / "records" / "rep_00000.json"));

  // a different config in the same directory is refused
  cfg.out_dir = out.string();
  cfg.seed = 999;
  cfg.replicates = 2;
  REQUIRE_THROWS_AS(run_experiment(cfg, false), std::runtime_error);
}

TEST_CASE("anisotropic micro study exercises weights, MCMC truth and evidence", "[experiment]") {
  const fs::path out = fresh_dir("gibbscl_exp2");
  ExperimentConfig cfg = micro(2, out.string());
  cfg.replicates = 1;
  const ExperimentOutput res = run_experiment(cfg, false);
  const auto& r = res.records.at(0);
  INFO(r.error);
  REQUIRE(r.ok);
  REQUIRE(r.weights.size() == 5);
  for (double w : r.weights) REQUIRE(w > 0.0);
  REQUIRE(r.methods.size() == 6);
  REQUIRE(std::isfinite(r.log_evidence_is));
  REQUIRE(r.k_true.size() == 4);
  // true covariance matrix is symmetric PSD
  REQUIRE(r.k_true[1] == Catch::Approx(r.k_true[2]).margin(1e-12));
  REQUIRE(r.k_true[0] > 0.0);
  REQUIRE(r.k_true[3] > 0.0);
}

TEST_CASE("autologistic micro study exercises the curvature adjustment", "[experiment]") {
  const fs::path out = fresh_dir("gibbscl_exp3");
  ExperimentConfig cfg = micro(3, out.string());
  cfg.replicates = 1;
  const ExperimentOutput res = run_experiment(cfg, false);
  const auto& r = res.records.at(0);
  INFO(r.error);
  REQUIRE(r.ok);
  REQUIRE(r.w_matrix.size() == 4);
  REQUIRE(r.methods.size() == 2);
  // W is triangular with positive diagonal
  REQUIRE(r.w_matrix[2] == 0.0);
  REQUIRE(r.w_matrix[0] > 0.0);
  REQUIRE(r.w_matrix[3] > 0.0);
  // the curvature-adjusted posterior should not be wildly off the truth scale
  REQUIRE(r.methods[1].ratio > 0.2);
  REQUIRE(r.methods[1].ratio < 5.0);
}

TEST_CASE("summarize aggregates per-method metrics", "[experiment]") {
  ExperimentConfig cfg = ExperimentConfig::defaults(1, "quick");
  ReplicateResult a, b;
  a.index = 0;
  a.ok = true;
  a.weights = {0.8};
  a.methods = {{"pseudo", 2.0, 1.0, 0.5}, {"cl_w1", 0.4, 0.36, 0.3}, {"cl_calibrated", 1.1, 0.01, 0.02}};
  b = a;
  b.index = 1;
  b.weights = {1.2};
  b.methods = {{"pseudo", 2.2, 1.44, 0.7}, {"cl_w1", 0.2, 0.64, 0.5}, {"cl_calibrated", 0.9, 0.01, 0.04}};
  const json s = summarize({a, b}, cfg);
  REQUIRE(s.at("methods").at("cl_w1").at("rmse").get<double>() == Catch::Approx(0.5));
  REQUIRE(s.at("methods").at("cl_calibrated").at("akld").get<double>() == Catch::Approx(0.03));
  REQUIRE(s.at("methods").at("pseudo").at("variance_ratio").at("median").get<double>() ==
          Catch::Approx(2.1));
  REQUIRE(s.at("weights").at("w0").at("median").get<double>() == Catch::Approx(1.0));
  REQUIRE(s.at("replicates").at("ok").get<int>() == 2);

  // all-identical records give zero-spread quantiles
  const json s2 = summarize({a, a}, cfg);
  const auto& q = s2.at("methods").at("pseudo").at("variance_ratio");
  REQUIRE(q.at("min").get<double>() == q.at("max").get<double>());
}

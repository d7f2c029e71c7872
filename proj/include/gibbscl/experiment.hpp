#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "gibbscl/adjust.hpp"
#include "gibbscl/bfgs.hpp"
#include "gibbscl/composite.hpp"
#include "gibbscl/evidence.hpp"
#include "gibbscl/grid.hpp"
#include "gibbscl/mcmc.hpp"
#include "gibbscl/metrics.hpp"
#include "gibbscl/moments.hpp"
#include "gibbscl/posterior_io.hpp"
#include "gibbscl/report.hpp"
#include "gibbscl/sampler.hpp"
#include "gibbscl/zcache.hpp"

namespace gibbscl {

inline constexpr const char* kVersion = "0.1.0";

/// Full description of one simulation study: model, data size, estimation
/// effort, ground-truth machinery and output location. defaults() materializes
/// every setting of the three studies explicitly so deviations stay visible in
/// the config echo.
struct ExperimentConfig {
  int experiment = 1;           // 1 isotropic, 2 anisotropic, 3 autologistic
  std::string profile = "paper";
  int rows = 16;
  int cols = 16;
  int block_side = 4;
  int replicates = 100;
  int gradient_draws = 100;
  int covariance_draws = 50000;
  int bfgs_max_iterations = 200;
  double bfgs_max_step = 0.5;
  int mcmc_iterations = 7000;
  int mcmc_burn_in = 2000;
  int pilot_iterations = 2000;
  int pilot_burn_in = 500;
  int is_points = 1000;
  double is_cov_inflation = 2.0;
  double is_min_ess = 50.0;
  int grid_points = 200;
  double grid_halfwidth_sds = 6.0;
  std::vector<int> weight_options;  // scalar rule is option 0
  std::vector<double> theta_true;
  std::vector<double> prior_lower;
  std::vector<double> prior_upper;
  double zcache_step = 0.02;
  int zcache_probes = 12;
  std::uint64_t seed = 20150918;
  std::string out_dir = "out";
  bool emit_grids = false;

  ModelSpec model() const {
    switch (experiment) {
      case 1: return ModelSpec::ising();
      case 2: return ModelSpec::anisotropic();
      case 3: return ModelSpec::autologistic();
      default: throw std::invalid_argument("experiment id must be 1, 2 or 3");
    }
  }

  int dim() const { return model().dim(); }

  Vec theta_true_vec() const {
    Vec t(static_cast<Eigen::Index>(theta_true.size()));
    for (std::size_t i = 0; i < theta_true.size(); ++i) t[static_cast<Eigen::Index>(i)] = theta_true[i];
    return t;
  }

  static ExperimentConfig defaults(int experiment, const std::string& profile = "paper") {
    ExperimentConfig cfg;
    cfg.experiment = experiment;
    cfg.profile = profile;
    switch (experiment) {
      case 1:
        cfg.theta_true = {0.4};
        cfg.prior_lower = {-0.5};
        cfg.prior_upper = {1.0};
        cfg.weight_options = {0};
        cfg.zcache_step = 0.0025;
        break;
      case 2:
        cfg.theta_true = {0.3, 0.5};
        cfg.prior_lower = {-0.15, 0.05};
        cfg.prior_upper = {0.75, 0.95};
        cfg.weight_options = {1, 2, 3, 4, 5};
        cfg.zcache_step = 0.02;
        break;
      case 3:
        cfg.theta_true = {0.05, 0.4};
        cfg.prior_lower = {-0.40, -0.05};
        cfg.prior_upper = {0.50, 0.85};
        cfg.weight_options = {};
        cfg.zcache_step = 0.02;
        break;
      default:
        throw std::invalid_argument("experiment id must be 1, 2 or 3");
    }
    if (profile == "quick") {
      cfg.replicates = 20;
      cfg.covariance_draws = 10000;
    } else if (profile != "paper") {
      throw std::invalid_argument("profile must be 'paper' or 'quick'");
    }
    return cfg;
  }

  json to_json() const {
    return json{{"experiment", experiment},
                {"profile", profile},
                {"rows", rows},
                {"cols", cols},
                {"block_side", block_side},
                {"replicates", replicates},
                {"gradient_draws", gradient_draws},
                {"covariance_draws", covariance_draws},
                {"bfgs_max_iterations", bfgs_max_iterations},
                {"bfgs_max_step", bfgs_max_step},
                {"mcmc_iterations", mcmc_iterations},
                {"mcmc_burn_in", mcmc_burn_in},
                {"pilot_iterations", pilot_iterations},
                {"pilot_burn_in", pilot_burn_in},
                {"is_points", is_points},
                {"is_cov_inflation", is_cov_inflation},
                {"is_min_ess", is_min_ess},
                {"grid_points", grid_points},
                {"grid_halfwidth_sds", grid_halfwidth_sds},
                {"weight_options", weight_options},
                {"theta_true", theta_true},
                {"prior_lower", prior_lower},
                {"prior_upper", prior_upper},
                {"zcache_step", zcache_step},
                {"zcache_probes", zcache_probes},
                {"seed", seed},
                {"out_dir", out_dir},
                {"emit_grids", emit_grids}};
  }

  static ExperimentConfig from_json(const json& j) {
    ExperimentConfig cfg = defaults(j.at("experiment").get<int>(),
                                    j.value("profile", std::string("paper")));
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("rows", cfg.rows);
    get("cols", cfg.cols);
    get("block_side", cfg.block_side);
    get("replicates", cfg.replicates);
    get("gradient_draws", cfg.gradient_draws);
    get("covariance_draws", cfg.covariance_draws);
    get("bfgs_max_iterations", cfg.bfgs_max_iterations);
    get("bfgs_max_step", cfg.bfgs_max_step);
    get("mcmc_iterations", cfg.mcmc_iterations);
    get("mcmc_burn_in", cfg.mcmc_burn_in);
    get("pilot_iterations", cfg.pilot_iterations);
    get("pilot_burn_in", cfg.pilot_burn_in);
    get("is_points", cfg.is_points);
    get("is_cov_inflation", cfg.is_cov_inflation);
    get("is_min_ess", cfg.is_min_ess);
    get("grid_points", cfg.grid_points);
    get("grid_halfwidth_sds", cfg.grid_halfwidth_sds);
    get("weight_options", cfg.weight_options);
    get("theta_true", cfg.theta_true);
    get("prior_lower", cfg.prior_lower);
    get("prior_upper", cfg.prior_upper);
    get("zcache_step", cfg.zcache_step);
    get("zcache_probes", cfg.zcache_probes);
    get("seed", cfg.seed);
    get("out_dir", cfg.out_dir);
    get("emit_grids", cfg.emit_grids);
    return cfg;
  }

  /// Hash of everything that determines per-replicate values. Excludes the
  /// replicate count (records are keyed by index), output path and grid
  /// emission, so runs can be resumed and extended.
  std::uint64_t replicate_hash() const {
    json j = to_json();
    j.erase("replicates");
    j.erase("out_dir");
    j.erase("emit_grids");
    return fnv1a(j.dump());
  }

  UniformBoxPrior prior() const {
    const int d = dim();
    Vec lo(d), hi(d);
    for (int j = 0; j < d; ++j) {
      lo[j] = prior_lower.at(static_cast<std::size_t>(j));
      hi[j] = prior_upper.at(static_cast<std::size_t>(j));
    }
    return UniformBoxPrior(lo, hi);
  }

  void validate() const {
    if (rows < 2 || cols < 2) throw std::invalid_argument("config: lattice too small");
    if (block_side < 1 || block_side > std::min(rows, cols))
      throw std::invalid_argument("config: block side out of range");
    if (replicates < 1 || gradient_draws < 2 || covariance_draws < 2 || is_points < 2)
      throw std::invalid_argument("config: counts must be positive");
    if (mcmc_iterations <= mcmc_burn_in || pilot_iterations <= pilot_burn_in)
      throw std::invalid_argument("config: MCMC iterations must exceed burn-in");
    if (grid_points < 10) throw std::invalid_argument("config: grid too coarse");
    const std::size_t d = static_cast<std::size_t>(dim());
    if (theta_true.size() != d || prior_lower.size() != d || prior_upper.size() != d)
      throw std::invalid_argument("config: parameter dimension mismatch");
    for (std::size_t j = 0; j < d; ++j) {
      if (!(prior_lower[j] < prior_upper[j])) throw std::invalid_argument("config: empty prior box");
      if (theta_true[j] < prior_lower[j] || theta_true[j] > prior_upper[j])
        throw std::invalid_argument("config: true parameter outside prior support");
    }
    for (int o : weight_options)
      if (o < 0 || o > 5) throw std::invalid_argument("config: weight option out of range");
  }
};

/// Names of the approximate-posterior variants each study evaluates.
inline std::vector<std::string> method_names(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case 1: return {"pseudo", "cl_w1", "cl_calibrated"};
    case 2: {
      std::vector<std::string> names{"cl_w1"};
      for (int o : cfg.weight_options) names.push_back("cal_w" + std::to_string(o));
      return names;
    }
    case 3: return {"cl_w1", "cl_curvature"};
    default: throw std::invalid_argument("experiment id must be 1, 2 or 3");
  }
}

struct MethodMetrics {
  std::string name;
  double ratio = std::numeric_limits<double>::quiet_NaN();  // scalar (d=1) or Frobenius ratio
  double rel_sq_err = std::numeric_limits<double>::quiet_NaN();
  double kl = std::numeric_limits<double>::quiet_NaN();
};

struct ReplicateResult {
  int index = -1;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<double> theta_star, theta_star_cl;
  int iters_cl = 0, iters_full = 0;
  double gnorm_cl = 0.0, gnorm_full = 0.0;
  bool conv_cl = false, conv_full = false;
  std::vector<double> weights;       // aligned with cfg.weight_options
  std::vector<double> w_matrix;      // curvature matrix, row-major (experiment 3)
  std::vector<double> k_true;        // row-major d x d
  double log_evidence_is = std::numeric_limits<double>::quiet_NaN();
  double is_ess = std::numeric_limits<double>::quiet_NaN();
  std::vector<MethodMetrics> methods;
  std::map<std::string, double> timings;  // seconds; kept out of the deterministic outputs

  json to_json(std::uint64_t config_hash) const {
    json m = json::array();
    for (const auto& mm : methods)
      m.push_back(json{{"name", mm.name}, {"ratio", mm.ratio}, {"rel_sq_err", mm.rel_sq_err}, {"kl", mm.kl}});
    return json{{"config_hash", config_hash},
                {"index", index},
                {"seed", seed},
                {"ok", ok},
                {"error", error},
                {"theta_star", theta_star},
                {"theta_star_cl", theta_star_cl},
                {"iters_cl", iters_cl},
                {"iters_full", iters_full},
                {"gnorm_cl", gnorm_cl},
                {"gnorm_full", gnorm_full},
                {"conv_cl", conv_cl},
                {"conv_full", conv_full},
                {"weights", weights},
                {"w_matrix", w_matrix},
                {"k_true", k_true},
                {"log_evidence_is", log_evidence_is},
                {"is_ess", is_ess},
                {"methods", m},
                {"timings", timings}};
  }

  static ReplicateResult from_json(const json& j) {
    // NaN serializes to null, so numeric reads must accept null
    auto num = [](const json& v) {
      return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    auto numvec = [&](const json& v) {
      std::vector<double> out;
      for (const auto& e : v) out.push_back(num(e));
      return out;
    };
    ReplicateResult r;
    r.index = j.at("index").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.ok = j.at("ok").get<bool>();
    r.error = j.at("error").get<std::string>();
    r.theta_star = numvec(j.at("theta_star"));
    r.theta_star_cl = numvec(j.at("theta_star_cl"));
    r.iters_cl = j.at("iters_cl").get<int>();
    r.iters_full = j.at("iters_full").get<int>();
    r.gnorm_cl = num(j.at("gnorm_cl"));
    r.gnorm_full = num(j.at("gnorm_full"));
    r.conv_cl = j.at("conv_cl").get<bool>();
    r.conv_full = j.at("conv_full").get<bool>();
    r.weights = numvec(j.at("weights"));
    r.w_matrix = numvec(j.at("w_matrix"));
    r.k_true = numvec(j.at("k_true"));
    r.log_evidence_is = num(j.at("log_evidence_is"));
    r.is_ess = num(j.at("is_ess"));
    for (const auto& mj : j.at("methods"))
      r.methods.push_back(MethodMetrics{mj.at("name").get<std::string>(), num(mj.at("ratio")),
                                        num(mj.at("rel_sq_err")), num(mj.at("kl"))});
    if (j.contains("timings")) r.timings = j.at("timings").get<std::map<std::string, double>>();
    return r;
  }
};

namespace detail {

class StageTimer {
 public:
  explicit StageTimer(std::map<std::string, double>& sink) : sink_(sink) {}

  template <typename Fn>
  auto time(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      sink_[stage] += seconds_since(t0);
    } else {
      auto out = fn();
      sink_[stage] += seconds_since(t0);
      return out;
    }
  }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  std::map<std::string, double>& sink_;
};

inline std::vector<double> to_std(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline std::vector<double> to_std(const Mat& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

/// Truth-grid axes: mode +/- halfwidth*sd per dimension, clipped to the
/// prior box.
inline std::vector<std::vector<double>> posterior_axes(const Vec& center, const Vec& sd,
                                                       const ExperimentConfig& cfg) {
  std::vector<std::vector<double>> axes;
  for (int j = 0; j < center.size(); ++j) {
    double lo = std::max(center[j] - cfg.grid_halfwidth_sds * sd[j],
                         cfg.prior_lower[static_cast<std::size_t>(j)]);
    double hi = std::min(center[j] + cfg.grid_halfwidth_sds * sd[j],
                         cfg.prior_upper[static_cast<std::size_t>(j)]);
    if (!(hi > lo)) throw std::runtime_error("posterior_axes: degenerate grid range");
    axes.push_back(linspace(lo, hi, cfg.grid_points));
  }
  return axes;
}

}  // namespace detail

/// Shared, data-independent machinery of one experiment: the log-partition
/// cache over the prior box and the sampler that simulates replicate data.
struct ExperimentContext {
  ExperimentConfig cfg;
  LogZCache zcache;
  ExactSampler data_sampler;
  BlockSet blocks;

  static ExperimentContext prepare(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<std::vector<double>> axes;
    for (int j = 0; j < cfg.dim(); ++j) {
      const double lo = cfg.prior_lower[static_cast<std::size_t>(j)];
      const double hi = cfg.prior_upper[static_cast<std::size_t>(j)];
      const int count = std::max(4, static_cast<int>(std::lround((hi - lo) / cfg.zcache_step)) + 1);
      axes.push_back(linspace(lo, hi, count));
    }
    return ExperimentContext{
        cfg,
        LogZCache::build(cfg.model(), cfg.rows, cfg.cols, std::move(axes), cfg.zcache_probes,
                         derive_seed(cfg.seed, {0xCACE})),
        ExactSampler(field_lattice_for(cfg.theta_true_vec(), cfg.model(), cfg.rows, cfg.cols)),
        enumerate_blocks(cfg.rows, cfg.cols, cfg.block_side)};
  }
};

/// One full replicate: simulate data, estimate the MAP pair, calibrate,
/// build the ground-truth posterior and score every method against it.
inline ReplicateResult run_replicate(const ExperimentContext& ctx, int index) {
  const ExperimentConfig& cfg = ctx.cfg;
  const ModelSpec model = cfg.model();
  const int d = model.dim();
  ReplicateResult rec;
  rec.index = index;
  rec.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(index)});
  detail::StageTimer timer(rec.timings);

  const auto grids_dir = std::filesystem::path(cfg.out_dir) / "grids";
  auto emit_grid = [&](const std::string& tag, const GridPosterior& grid, json header) {
    if (!cfg.emit_grids) return;
    std::filesystem::create_directories(grids_dir);
    header["experiment"] = cfg.experiment;
    header["replicate"] = index;
    header["seed"] = rec.seed;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "posterior_grid_rep%05d_%s.csv", index, tag.c_str());
    std::ofstream os(grids_dir / buf);
    write_grid_posterior_csv(os, grid, std::move(header));
  };

  try {
    const UniformBoxPrior prior = cfg.prior();

    // data
    Lattice y = timer.time("simulate", [&] {
      RngStream rng = RngStream::derive(rec.seed, {0});
      return ctx.data_sampler.draw(rng);
    });

    // reference timing: one block normalizer evaluation
    timer.time("block_normalizer_once", [&] {
      (void)block_conditional_log_partition(y, ctx.blocks.blocks.front(), cfg.theta_true_vec(), model);
    });

    // MAP pair (Algorithm 1)
    BfgsConfig bfgs;
    bfgs.gradient_draws = cfg.gradient_draws;
    bfgs.max_iterations = cfg.bfgs_max_iterations;
    bfgs.max_step = cfg.bfgs_max_step;
    const MapEstimates maps =
        timer.time("bfgs_map", [&] { return bfgs_map(y, model, ctx.blocks, prior, bfgs, derive_seed(rec.seed, {1})); });
    rec.theta_star = detail::to_std(maps.full.theta);
    rec.theta_star_cl = detail::to_std(maps.cl.theta);
    rec.iters_cl = maps.cl.iterations;
    rec.iters_full = maps.full.iterations;
    rec.gnorm_cl = maps.cl.grad_norm;
    rec.gnorm_full = maps.full.grad_norm;
    rec.conv_cl = maps.cl.converged;
    rec.conv_full = maps.full.converged;

    // covariances at the MAP pair
    const Mat k_full = timer.time("cov_full", [&] {
      return mc_full_moments(maps.full.theta, model, cfg.rows, cfg.cols, cfg.covariance_draws,
                             derive_seed(rec.seed, {2}))
          .cov;
    });
    const Mat k_cl_sum = timer.time("cov_blocks", [&] {
      const auto moms = mc_block_moments(y, maps.cl.theta, ctx.blocks, model, cfg.covariance_draws,
                                         derive_seed(rec.seed, {3}));
      return sum_block_moments(ctx.blocks, moms).cov_sum;
    });

    // adjustments
    std::optional<CurvatureMatrix> curv;
    timer.time("calibration", [&] {
      for (int o : cfg.weight_options) {
        if (o == 0)
          rec.weights.push_back(scalar_magnitude_weight(k_full(0, 0), k_cl_sum(0, 0)).value);
        else
          rec.weights.push_back(matrix_magnitude_weight(k_full, k_cl_sum, o).value);
      }
      if (cfg.experiment == 3) {
        curv = curvature_matrix(-k_full + prior.hessian(maps.full.theta),
                                -k_cl_sum + prior.hessian(maps.cl.theta));
        rec.w_matrix = detail::to_std(curv->w);
      }
    });

    // posterior evaluators
    const CompositeLikelihood cl(y, ctx.blocks, model);
    const Vec s_obs = sufficient_statistics(y, model);
    const auto log_post_true = [&](const Vec& theta) {
      const double lp = prior.log_density(theta);
      if (lp == kNegInf) return kNegInf;
      return theta.dot(s_obs) - ctx.zcache(theta) + lp;
    };
    const auto log_post_cl = [&](const Vec& theta) {
      const double lp = prior.log_density(theta);
      if (lp == kNegInf) return kNegInf;
      return cl.log_density(theta) + lp;
    };

    // ground truth: pilot chain for scales, then grid (d=1) or main chain +
    // grid (d=2), all through the validated z cache
    Vec pilot_sd(d);
    {
      const Mat fisher_inv = k_full.ldlt().solve(Mat::Identity(d, d));
      for (int j = 0; j < d; ++j)
        pilot_sd[j] = 2.4 / std::sqrt(static_cast<double>(d)) * std::sqrt(std::max(fisher_inv(j, j), 1e-12));
    }
    const Chain pilot = timer.time("truth", [&] {
      RngStream rng = RngStream::derive(rec.seed, {4});
      return rwm_sample(log_post_true, maps.full.theta, cfg.pilot_iterations, cfg.pilot_burn_in,
                        pilot_sd, rng);
    });
    const Vec pilot_sds = posterior_covariance(pilot).diagonal().cwiseSqrt();

    Mat k_true(d, d);
    std::optional<GridPosterior> truth;
    timer.time("truth", [&] {
      auto build_truth_grid = [&](const Vec& center, const Vec& sd) {
        auto axes = detail::posterior_axes(center, sd, cfg);
        try {
          return grid_posterior(y, model, axes, prior, [&](const Vec& t) { return ctx.zcache(t); });
        } catch (const GridCoverageError&) {
          // mass reaches the prior bounds; accept truncation by the prior
          std::vector<std::vector<double>> box_axes;
          for (int j = 0; j < d; ++j)
            box_axes.push_back(linspace(cfg.prior_lower[static_cast<std::size_t>(j)],
                                        cfg.prior_upper[static_cast<std::size_t>(j)], cfg.grid_points));
          return grid_posterior(y, model, box_axes, prior, [&](const Vec& t) { return ctx.zcache(t); },
                                std::numeric_limits<double>::infinity());
        }
      };
      if (cfg.experiment == 1) {
        truth = build_truth_grid(maps.full.theta, pilot_sds);
        k_true = truth->covariance();
      } else {
        RngStream rng = RngStream::derive(rec.seed, {5});
        const Vec main_sd = 2.4 / std::sqrt(static_cast<double>(d)) * pilot_sds;
        const Chain main = rwm_sample(log_post_true, maps.full.theta, cfg.mcmc_iterations,
                                      cfg.mcmc_burn_in, main_sd, rng);
        k_true = posterior_covariance(main);
        const Vec mean = chain_mean(main);
        truth = build_truth_grid(mean, k_true.diagonal().cwiseSqrt());
        if (cfg.emit_grids) {
          std::filesystem::create_directories(grids_dir);
          char buf[64];
          std::snprintf(buf, sizeof(buf), "chain_rep%05d_truth.csv", index);
          std::ofstream os(grids_dir / buf);
          write_chain_csv(os, main,
                          json{{"experiment", cfg.experiment}, {"replicate", index}, {"seed", rec.seed}});
        }
      }
    });
    rec.k_true = detail::to_std(k_true);

    // evidence by importance sampling (anisotropic and autologistic studies)
    if (cfg.experiment != 1) {
      timer.time("evidence", [&] {
        try {
          RngStream rng = RngStream::derive(rec.seed, {6});
          const auto log_joint = [&](const Vec& theta) {
            const double lp = prior.log_density(theta);
            if (lp == kNegInf) return kNegInf;
            return theta.dot(s_obs) - ctx.zcache(theta) + lp;
          };
          const EvidenceEstimate ev = evidence_importance_sampling(
              log_joint, truth->mean(), cfg.is_cov_inflation * truth->covariance(), cfg.is_points, rng,
              cfg.is_min_ess);
          rec.log_evidence_is = ev.log_evidence;
          rec.is_ess = ev.effective_sample_size;
        } catch (const std::exception& e) {
          rec.error += std::string("[evidence: ") + e.what() + "] ";
        }
      });
    }

    // Approximate posteriors, evaluated on the truth grid. The adjustments
    // transform the composite LIKELIHOOD (shifted/tempered/reparameterized
    // argument); the uniform prior stays a function of theta itself, so the
    // transformed densities keep full support on the grid.
    std::vector<std::pair<std::string, LogTargetFn>> methods;
    const Vec shift = maps.cl.theta - maps.full.theta;  // theta* -> theta*_CL
    if (cfg.experiment == 1) {
      methods.emplace_back("pseudo", [&](const Vec& t) {
        const double lp = prior.log_density(t);
        return lp == kNegInf ? kNegInf : log_pseudolikelihood(y, t, model) + lp;
      });
      methods.emplace_back("cl_w1", log_post_cl);
      const double w = rec.weights.at(0);
      methods.emplace_back("cl_calibrated", [&, w](const Vec& t) {
        const double lp = prior.log_density(t);
        return lp == kNegInf ? kNegInf : w * cl.log_density(t + shift) + lp;
      });
    } else if (cfg.experiment == 2) {
      methods.emplace_back("cl_w1", log_post_cl);
      for (std::size_t oi = 0; oi < cfg.weight_options.size(); ++oi) {
        const double w = rec.weights.at(oi);
        const std::string name = "cal_w" + std::to_string(cfg.weight_options[oi]);
        methods.emplace_back(name, [&, w](const Vec& t) {
          const double lp = prior.log_density(t);
          return lp == kNegInf ? kNegInf : w * cl.log_density(t + shift) + lp;
        });
      }
    } else {
      methods.emplace_back("cl_w1", log_post_cl);
      const Mat w_mat = curv->w;
      methods.emplace_back("cl_curvature", [&, w_mat](const Vec& t) {
        // mean + curvature: mode lands on theta*
        const double lp = prior.log_density(t);
        if (lp == kNegInf) return kNegInf;
        return cl.log_density(maps.cl.theta + w_mat * (t - maps.full.theta)) + lp;
      });
    }

    timer.time("methods", [&] {
      for (const auto& [name, fn] : methods) {
        const GridPosterior grid = build_grid_posterior(truth->axes(), fn);
        const auto vr = variance_ratio_metrics(grid.covariance(), k_true);
        MethodMetrics mm;
        mm.name = name;
        mm.ratio = d == 1 ? vr.scalar_ratio : vr.frobenius_ratio;
        mm.rel_sq_err = vr.relative_squared_error;
        mm.kl = kl_divergence_grid(*truth, grid);
        rec.methods.push_back(mm);
        emit_grid(name, grid, json{{"method", name}});
      }
      emit_grid("truth", *truth,
                json{{"method", "truth"},
                     {"log_evidence_is", rec.log_evidence_is},
                     {"is_ess", rec.is_ess}});
    });

    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error += e.what();
  }
  return rec;
}

/// Aggregate per-replicate records into the metrics table: per-method RMSE
/// (mean squared relative covariance error), AKLD (mean KL against the
/// truth), variance-ratio box-plot quantiles and median calibration weights.
inline json summarize(const std::vector<ReplicateResult>& records, const ExperimentConfig& cfg) {
  if (records.empty()) throw std::invalid_argument("summarize: no records");
  json methods = json::object();
  for (const std::string& name : method_names(cfg)) {
    std::vector<double> ratios, rses, kls;
    for (const auto& r : records) {
      if (!r.ok) continue;
      for (const auto& m : r.methods)
        if (m.name == name) {
          ratios.push_back(m.ratio);
          rses.push_back(m.rel_sq_err);
          kls.push_back(m.kl);
        }
    }
    methods[name] = json{{"rmse", mean_of(rses)},
                         {"akld", mean_of(kls)},
                         {"variance_ratio", quantile_summary(ratios)},
                         {"n", ratios.size()}};
  }

  json weights = json::object();
  for (std::size_t oi = 0; oi < cfg.weight_options.size(); ++oi) {
    std::vector<double> ws;
    for (const auto& r : records)
      if (r.ok && oi < r.weights.size()) ws.push_back(r.weights[oi]);
    weights["w" + std::to_string(cfg.weight_options[oi])] = quantile_summary(ws);
  }

  std::vector<int> failed;
  int ok = 0;
  for (const auto& r : records) {
    if (r.ok)
      ++ok;
    else
      failed.push_back(r.index);
  }
  return json{{"version", kVersion},
              {"experiment", cfg.experiment},
              {"profile", cfg.profile},
              {"kl_direction", "KL(true || approx)"},
              {"config", cfg.to_json()},
              {"replicates", json{{"total", records.size()}, {"ok", ok}, {"failed", failed}}},
              {"methods", methods},
              {"weights", weights}};
}

namespace detail {

inline std::string csv_escape(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

inline void write_replicates_csv(const std::filesystem::path& path,
                                 const std::vector<ReplicateResult>& records,
                                 const ExperimentConfig& cfg) {
  const int d = cfg.dim();
  std::ofstream os(path);
  os << "replicate,seed,ok,error";
  for (int j = 1; j <= d; ++j) os << ",theta_star_" << j;
  for (int j = 1; j <= d; ++j) os << ",theta_star_cl_" << j;
  os << ",iters_cl,iters_full,gnorm_cl,gnorm_full,conv_cl,conv_full";
  for (int r = 1; r <= d; ++r)
    for (int c = 1; c <= d; ++c) os << ",k_true_" << r << c;
  for (int o : cfg.weight_options) os << ",w" << o;
  if (cfg.experiment == 3)
    for (int r = 1; r <= d; ++r)
      for (int c = 1; c <= d; ++c) os << ",W_" << r << c;
  if (cfg.experiment != 1) os << ",log_evidence_is,is_ess";
  for (const std::string& name : method_names(cfg))
    os << ',' << name << "_ratio," << name << "_rse," << name << "_kl";
  os << '\n';

  const std::size_t dd = static_cast<std::size_t>(d) * d;
  for (const auto& r : records) {
    os << r.index << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ',' << csv_escape(r.error);
    auto put_vec = [&](const std::vector<double>& v, std::size_t want) {
      for (std::size_t j = 0; j < want; ++j)
        os << ',' << (j < v.size() ? format_double(v[j]) : "nan");
    };
    put_vec(r.theta_star, static_cast<std::size_t>(d));
    put_vec(r.theta_star_cl, static_cast<std::size_t>(d));
    os << ',' << r.iters_cl << ',' << r.iters_full << ',' << format_double(r.gnorm_cl) << ','
       << format_double(r.gnorm_full) << ',' << (r.conv_cl ? 1 : 0) << ',' << (r.conv_full ? 1 : 0);
    put_vec(r.k_true, dd);
    put_vec(r.weights, cfg.weight_options.size());
    if (cfg.experiment == 3) put_vec(r.w_matrix, dd);
    if (cfg.experiment != 1)
      os << ',' << format_double(r.log_evidence_is) << ',' << format_double(r.is_ess);
    for (const std::string& name : method_names(cfg)) {
      const MethodMetrics* found = nullptr;
      for (const auto& m : r.methods)
        if (m.name == name) found = &m;
      if (found)
        os << ',' << format_double(found->ratio) << ',' << format_double(found->rel_sq_err) << ','
           << format_double(found->kl);
      else
        os << ",nan,nan,nan";
    }
    os << '\n';
  }
}

inline void write_timings_csv(const std::filesystem::path& path,
                              const std::vector<ReplicateResult>& records) {
  std::ofstream os(path);
  os << "replicate,stage,seconds\n";
  for (const auto& r : records)
    for (const auto& [stage, sec] : r.timings) os << r.index << ',' << stage << ',' << format_double(sec) << '\n';
}

}  // namespace detail

struct ExperimentOutput {
  std::vector<ReplicateResult> records;
  json summary;
};

/// Run (or resume) a whole experiment into cfg.out_dir. Completed replicates
/// found in out_dir/records with a matching config hash are reused, so a run
/// is resumable and extendable; replicate values depend only on (config,
/// index), never on which subset runs.
inline ExperimentOutput run_experiment(const ExperimentConfig& cfg, bool verbose = true) {
  cfg.validate();
  namespace fs = std::filesystem;
  const fs::path out(cfg.out_dir);
  const fs::path records_dir = out / "records";
  fs::create_directories(records_dir);
  const std::uint64_t chash = cfg.replicate_hash();

  {
    std::ofstream os(out / "config_echo.json");
    os << cfg.to_json().dump(2) << '\n';
  }

  if (verbose) std::fprintf(stderr, "[experiment %d] building log-partition cache...\n", cfg.experiment);
  const ExperimentContext ctx = ExperimentContext::prepare(cfg);
  if (verbose)
    std::fprintf(stderr, "[experiment %d] cache probe error %.3g\n", cfg.experiment,
                 ctx.zcache.max_probe_error());

  std::vector<ReplicateResult> records(static_cast<std::size_t>(cfg.replicates));
  parallel_for(records.size(), [&](std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "rep_%05d.json", static_cast<int>(i));
    const fs::path rec_path = records_dir / buf;
    if (fs::exists(rec_path)) {
      std::ifstream is(rec_path);
      json j;
      is >> j;
      if (j.value("config_hash", std::uint64_t{0}) == chash) {
        records[i] = ReplicateResult::from_json(j);
        if (verbose) std::fprintf(stderr, "[replicate %zu] reused\n", i);
        return;
      }
      throw std::runtime_error("run_experiment: " + rec_path.string() +
                               " was produced by a different config; use a fresh out dir");
    }
    records[i] = run_replicate(ctx, static_cast<int>(i));
    std::ofstream os(rec_path);
    os << records[i].to_json(chash).dump(2) << '\n';
    if (verbose)
      std::fprintf(stderr, "[replicate %zu] %s\n", i,
                   records[i].ok ? "ok" : records[i].error.c_str());
  });

  ExperimentOutput output;
  output.records = std::move(records);
  output.summary = summarize(output.records, cfg);
  detail::write_replicates_csv(out / "replicates.csv", output.records, cfg);
  detail::write_timings_csv(out / "timings.csv", output.records);
  {
    json s = output.summary;
    s["zcache_probe_error"] = ctx.zcache.max_probe_error();
    output.summary = s;
    std::ofstream os(out / "summary.json");
    os << s.dump(2) << '\n';
  }
  return output;
}

/// Plain-text metrics table for terminals, rows in study layout order.
inline std::string format_metrics_table(const json& summary) {
  std::ostringstream os;
  os << "method              RMSE        AKLD        ratio(median)\n";
  const ExperimentConfig cfg = ExperimentConfig::from_json(summary.at("config"));
  for (const std::string& name : method_names(cfg)) {
    if (!summary.at("methods").contains(name)) continue;
    const auto& m = summary.at("methods").at(name);
    char line[128];
    std::snprintf(line, sizeof(line), "%-18s %-11.4g %-11.4g %-11.4g\n", name.c_str(),
                  m.at("rmse").get<double>(), m.at("akld").get<double>(),
                  m.at("variance_ratio").at("median").get<double>());
    os << line;
  }
  if (summary.contains("weights"))
    for (auto it = summary.at("weights").begin(); it != summary.at("weights").end(); ++it)
      os << "weight " << it.key() << " median " << format_double(it.value().at("median").get<double>())
         << "\n";
  return os.str();
}

}  // namespace gibbscl

#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "ncreg/datagen.hpp"
#include "ncreg/glasso.hpp"
#include "ncreg/pdw.hpp"
#include "ncreg/solver.hpp"

namespace ncreg {

using nlohmann::json;

enum class StudyKind { PhaseTransition, ErrorCurves, Multistart, GlassoStudy };

inline const char* study_name(StudyKind s) {
  switch (s) {
    case StudyKind::PhaseTransition: return "phase-transition";
    case StudyKind::ErrorCurves: return "error-curves";
    case StudyKind::Multistart: return "multistart";
    case StudyKind::GlassoStudy: return "glasso-study";
  }
  return "?";
}

inline StudyKind study_from_name(const std::string& s) {
  if (s == "phase-transition") return StudyKind::PhaseTransition;
  if (s == "error-curves") return StudyKind::ErrorCurves;
  if (s == "multistart") return StudyKind::Multistart;
  if (s == "glasso-study") return StudyKind::GlassoStudy;
  throw std::invalid_argument("unknown study: " + s);
}

// Declarative Monte Carlo study description. Shared data per (cell, trial):
// every regularizer in the list sees the same draws and the same lambda.
struct ExperimentConfig {
  StudyKind study = StudyKind::PhaseTransition;
  std::vector<int> p_grid{64};
  std::vector<double> n_over_klogp_grid{2, 4, 6, 8, 10, 12, 14};
  std::vector<int> n_grid;  // used when n_over_klogp_grid is empty
  int trials = 50;
  std::vector<RegularizerSpec> regularizers{
      RegularizerSpec::l1(0), RegularizerSpec::lsp(0),
      RegularizerSpec::scad(0, 2.5), RegularizerSpec::mcp(0, 1.5)};

  std::string loss = "corrupted";         // ols | corrupted | logistic
  std::string design_family = "m1";       // m1 | m2 | identity
  double design_theta = std::numeric_limits<double>::quiet_NaN();  // NaN: 2.5/k for m1
  double sigma_x = 1.0;                   // identity design scale
  double sigma_eps = 0.1;
  double sigma_w = 0.2;                   // 0 = clean covariates
  BetaPattern beta_pattern = BetaPattern::FlatPositive;

  std::string lambda_rule = "sqrt_log_p_over_n";  // or "fixed"
  double lambda_fixed = 0.0;
  double lambda_scale = 1.0;  // multiplies the sqrt rule
  std::string r_rule = "1.1_l1_beta_star";  // or "fixed"
  double r_fixed = 0.0;

  std::uint64_t seed = 1;
  int multistart_m = 15;
  int max_iters = 20000;
  double tol = 1e-9;
  int threads = 0;  // 0 = hardware concurrency

  // glasso study
  double rho_off = 0.4;
  int glasso_n = 4000;
  double kappa = 0.0;  // 0 = auto sqrt(2/mu)

  double lambda_for(int p, int n) const {
    if (lambda_rule == "fixed") return lambda_fixed;
    return lambda_scale *
           std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
  }

  double radius_for(const Vec& beta_star) const {
    if (r_rule == "fixed") return r_fixed;
    return 1.1 * beta_star.lpNorm<1>();
  }

  double theta_for(int k) const {
    if (!std::isnan(design_theta)) return design_theta;
    if (design_family == "m1") return 2.5 / static_cast<double>(k);
    throw std::invalid_argument("config: design_theta required for " + design_family);
  }
};

inline json experiment_config_to_json(const ExperimentConfig& c) {
  json j;
  j["study"] = study_name(c.study);
  j["p_grid"] = c.p_grid;
  j["n_over_klogp_grid"] = c.n_over_klogp_grid;
  j["n_grid"] = c.n_grid;
  j["trials"] = c.trials;
  j["regularizers"] = json::array();
  for (const auto& r : c.regularizers) j["regularizers"].push_back(regularizer_to_json(r));
  j["loss"] = c.loss;
  j["design_family"] = c.design_family;
  if (!std::isnan(c.design_theta)) j["design_theta"] = c.design_theta;
  j["sigma_x"] = c.sigma_x;
  j["sigma_eps"] = c.sigma_eps;
  j["sigma_w"] = c.sigma_w;
  j["beta_pattern"] = (c.beta_pattern == BetaPattern::FlatPositive) ? "flat" : "random_signs";
  j["lambda_rule"] = c.lambda_rule;
  j["lambda_fixed"] = c.lambda_fixed;
  j["lambda_scale"] = c.lambda_scale;
  j["r_rule"] = c.r_rule;
  j["r_fixed"] = c.r_fixed;
  j["seed"] = c.seed;
  j["multistart_m"] = c.multistart_m;
  j["max_iters"] = c.max_iters;
  j["tol"] = c.tol;
  j["rho_off"] = c.rho_off;
  j["glasso_n"] = c.glasso_n;
  j["kappa"] = c.kappa;
  return j;
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  c.study = study_from_name(j.at("study").get<std::string>());
  if (j.contains("p_grid")) c.p_grid = j["p_grid"].get<std::vector<int>>();
  if (j.contains("n_over_klogp_grid"))
    c.n_over_klogp_grid = j["n_over_klogp_grid"].get<std::vector<double>>();
  if (j.contains("n_grid")) c.n_grid = j["n_grid"].get<std::vector<int>>();
  if (j.contains("trials")) c.trials = j["trials"].get<int>();
  if (j.contains("regularizers")) {
    c.regularizers.clear();
    for (const auto& r : j["regularizers"]) c.regularizers.push_back(regularizer_from_json(r));
  }
  if (j.contains("loss")) c.loss = j["loss"].get<std::string>();
  if (j.contains("design_family")) c.design_family = j["design_family"].get<std::string>();
  if (j.contains("design_theta")) c.design_theta = j["design_theta"].get<double>();
  if (j.contains("sigma_x")) c.sigma_x = j["sigma_x"].get<double>();
  if (j.contains("sigma_eps")) c.sigma_eps = j["sigma_eps"].get<double>();
  if (j.contains("sigma_w")) c.sigma_w = j["sigma_w"].get<double>();
  if (j.contains("beta_pattern"))
    c.beta_pattern = (j["beta_pattern"].get<std::string>() == "flat")
                         ? BetaPattern::FlatPositive
                         : BetaPattern::RandomSigns;
  if (j.contains("lambda_rule")) c.lambda_rule = j["lambda_rule"].get<std::string>();
  if (j.contains("lambda_fixed")) c.lambda_fixed = j["lambda_fixed"].get<double>();
  if (j.contains("lambda_scale")) c.lambda_scale = j["lambda_scale"].get<double>();
  if (j.contains("r_rule")) c.r_rule = j["r_rule"].get<std::string>();
  if (j.contains("r_fixed")) c.r_fixed = j["r_fixed"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("multistart_m")) c.multistart_m = j["multistart_m"].get<int>();
  if (j.contains("max_iters")) c.max_iters = j["max_iters"].get<int>();
  if (j.contains("tol")) c.tol = j["tol"].get<double>();
  if (j.contains("rho_off")) c.rho_off = j["rho_off"].get<double>();
  if (j.contains("glasso_n")) c.glasso_n = j["glasso_n"].get<int>();
  if (j.contains("kappa")) c.kappa = j["kappa"].get<double>();
  return c;
}

// ---- rows ----

struct CellRow {
  int p = 0, k = 0, n = 0;
  double n_over_klogp = 0.0;
  std::string design;
  double theta = 0.0;
  std::string regularizer;
  double lambda = 0.0, radius = 0.0;
  int trials = 0, failures = 0;
  double success_rate = 0.0;
  double median_linf = 0.0, median_l2 = 0.0;
  double mean_iterations = 0.0;
};

struct MultistartRow {
  std::string loss, design;
  double theta = 0.0, sigma_x = 1.0;
  int p = 0, k = 0, n = 0;
  std::string regularizer;
  double lambda = 0.0, radius = 0.0;
  int m = 0, cluster_count = 0;
  double mean_iterations = 0.0;
};

struct GlassoRow {
  int p = 0, n = 0;
  double rho_off = 0.0;
  std::string regularizer;
  double lambda = 0.0, kappa = 0.0;
  int trials = 0, failures = 0;
  double support_exact_rate = 0.0;
  double median_max_err = 0.0, median_frob_err = 0.0, median_spectral_err = 0.0;
  double chain_ok_rate = 0.0;
  double oracle_resid_max = 0.0;
  double median_oracle_dist = 0.0;
  double mean_iterations = 0.0;
};

struct TraceRow {
  std::string regularizer;
  int run = 0;
  int iter = 0;
  double log_l2_error = 0.0;
};

struct StudyResult {
  StudyKind study = StudyKind::PhaseTransition;
  std::vector<CellRow> cell_rows;
  std::vector<MultistartRow> multistart_rows;
  std::vector<GlassoRow> glasso_rows;
  std::vector<TraceRow> trace_rows;
  json summary;

  std::string results_csv() const;
  std::string traces_csv() const;
};

namespace detail {

// Fixed-width worker pool; results land in preallocated slots so the
// output is independent of scheduling.
inline void parallel_for(int num_tasks, int threads,
                         const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, num_tasks));
  if (threads == 1) {
    for (int i = 0; i < num_tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  workers.reserve(static_cast<size_t>(threads));
  for (int w = 0; w < threads; ++w)
    workers.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < num_tasks; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : workers) t.join();
}

inline std::string csv_cell(double x) { return format_g17(x); }

}  // namespace detail

inline std::string StudyResult::results_csv() const {
  std::ostringstream out;
  out << "# ncreg results schema v1\n";
  if (study == StudyKind::PhaseTransition || study == StudyKind::ErrorCurves) {
    out << "study,p,k,n,n_over_klogp,design,theta,regularizer,lambda,R,trials,"
           "failures,success_rate,median_linf,median_l2,mean_iterations\n";
    for (const auto& r : cell_rows) {
      out << study_name(study) << ',' << r.p << ',' << r.k << ',' << r.n << ','
          << detail::csv_cell(r.n_over_klogp) << ',' << r.design << ','
          << detail::csv_cell(r.theta) << ',' << r.regularizer << ','
          << detail::csv_cell(r.lambda) << ',' << detail::csv_cell(r.radius) << ','
          << r.trials << ',' << r.failures << ',' << detail::csv_cell(r.success_rate)
          << ',' << detail::csv_cell(r.median_linf) << ','
          << detail::csv_cell(r.median_l2) << ','
          << detail::csv_cell(r.mean_iterations) << '\n';
    }
  } else if (study == StudyKind::Multistart) {
    out << "study,loss,design,theta,sigma_x,p,k,n,regularizer,lambda,R,m,"
           "cluster_count,mean_iterations\n";
    for (const auto& r : multistart_rows) {
      out << study_name(study) << ',' << r.loss << ',' << r.design << ','
          << detail::csv_cell(r.theta) << ',' << detail::csv_cell(r.sigma_x) << ','
          << r.p << ',' << r.k << ',' << r.n << ',' << r.regularizer << ','
          << detail::csv_cell(r.lambda) << ',' << detail::csv_cell(r.radius) << ','
          << r.m << ',' << r.cluster_count << ','
          << detail::csv_cell(r.mean_iterations) << '\n';
    }
  } else {
    out << "study,p,n,rho_off,regularizer,lambda,kappa,trials,failures,"
           "support_exact_rate,median_max_err,median_frob_err,median_spectral_err,"
           "chain_ok_rate,oracle_resid_max,median_oracle_dist,mean_iterations\n";
    for (const auto& r : glasso_rows) {
      out << study_name(study) << ',' << r.p << ',' << r.n << ','
          << detail::csv_cell(r.rho_off) << ',' << r.regularizer << ','
          << detail::csv_cell(r.lambda) << ',' << detail::csv_cell(r.kappa) << ','
          << r.trials << ',' << r.failures << ','
          << detail::csv_cell(r.support_exact_rate) << ','
          << detail::csv_cell(r.median_max_err) << ','
          << detail::csv_cell(r.median_frob_err) << ','
          << detail::csv_cell(r.median_spectral_err) << ','
          << detail::csv_cell(r.chain_ok_rate) << ','
          << detail::csv_cell(r.oracle_resid_max) << ','
          << detail::csv_cell(r.median_oracle_dist) << ','
          << detail::csv_cell(r.mean_iterations) << '\n';
    }
  }
  return out.str();
}

inline std::string StudyResult::traces_csv() const {
  std::ostringstream out;
  out << "regularizer,run,iter,log_l2_error\n";
  for (const auto& t : trace_rows)
    out << t.regularizer << ',' << t.run << ',' << t.iter << ','
        << detail::csv_cell(t.log_l2_error) << '\n';
  return out.str();
}

// ---- phase transition / error curves ----

namespace detail {

struct TrialRecord {
  bool failed = false;
  std::vector<char> support_ok;   // per regularizer
  std::vector<double> err_linf;
  std::vector<double> err_l2;
  std::vector<int> iterations;
};

struct CellPlan {
  int p = 0, k = 0, n = 0;
  double ratio = 0.0;
  double theta = 0.0;
};

}  // namespace detail

inline StudyResult run_grid_study(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("experiment: trials >= 1 required");
  if (cfg.p_grid.empty() || cfg.regularizers.empty())
    throw std::invalid_argument("experiment: empty grid");
  const bool ratio_grid = !cfg.n_over_klogp_grid.empty();
  if (!ratio_grid && cfg.n_grid.empty())
    throw std::invalid_argument("experiment: need an n grid");

  std::vector<detail::CellPlan> cells;
  for (int p : cfg.p_grid) {
    const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(p))));
    const double logp = std::log(static_cast<double>(p));
    if (ratio_grid) {
      for (double r : cfg.n_over_klogp_grid) {
        detail::CellPlan c;
        c.p = p;
        c.k = k;
        c.ratio = r;
        c.n = std::max(4, static_cast<int>(std::lround(r * k * logp)));
        c.theta = cfg.theta_for(k);
        cells.push_back(c);
      }
    } else {
      for (int n : cfg.n_grid) {
        detail::CellPlan c;
        c.p = p;
        c.k = k;
        c.n = n;
        c.ratio = static_cast<double>(n) / (k * logp);
        c.theta = cfg.theta_for(k);
        cells.push_back(c);
      }
    }
  }

  const int nreg = static_cast<int>(cfg.regularizers.size());
  const int ncells = static_cast<int>(cells.size());
  std::vector<detail::TrialRecord> records(
      static_cast<size_t>(ncells) * static_cast<size_t>(cfg.trials));

  auto run_trial = [&](int task) {
    const int ci = task / cfg.trials;
    const int ti = task % cfg.trials;
    const auto& cell = cells[static_cast<size_t>(ci)];
    detail::TrialRecord rec;
    rec.support_ok.assign(static_cast<size_t>(nreg), 0);
    rec.err_linf.assign(static_cast<size_t>(nreg), std::nan(""));
    rec.err_l2.assign(static_cast<size_t>(nreg), std::nan(""));
    rec.iterations.assign(static_cast<size_t>(nreg), 0);
    try {
      DesignSpec ds;
      if (cfg.design_family == "m1")
        ds = DesignSpec::m1(cell.p, cell.k, cell.theta);
      else if (cfg.design_family == "m2")
        ds = DesignSpec::m2(cell.p, cell.theta);
      else
        ds = DesignSpec::identity(cell.p, cfg.sigma_x);
      const Mat design = make_design(ds);

      TrialSpec ts;
      ts.p = cell.p;
      ts.k = cell.k;
      ts.n = cell.n;
      ts.pattern = cfg.beta_pattern;
      ts.sigma_eps = cfg.sigma_eps;
      ts.sigma_w = (cfg.loss == "corrupted") ? cfg.sigma_w : 0.0;
      ts.seed = split_seed(cfg.seed, static_cast<std::uint64_t>(ci),
                           static_cast<std::uint64_t>(ti));
      const bool logistic = (cfg.loss == "logistic");
      const TrialData data =
          sample_trial(design, ts, logistic ? ResponseKind::Logistic : ResponseKind::Linear);

      LossModel model = [&]() {
        if (cfg.loss == "corrupted") {
          const Mat Sw = cfg.sigma_w * cfg.sigma_w * Mat::Identity(cell.p, cell.p);
          auto [G, g] = corrected_moments(data.Z ? *data.Z : data.X, data.y, Sw);
          return LossModel::corrupted_quadratic(std::move(G), std::move(g), cell.n);
        }
        if (logistic) return LossModel::logistic(data.X, data.y);
        return LossModel::ols(data.X, data.y);
      }();

      const double lambda = cfg.lambda_for(cell.p, cell.n);
      SolverConfig sc;
      sc.R = cfg.radius_for(data.beta_star);
      sc.max_iters = cfg.max_iters;
      sc.tol = cfg.tol;

      for (int ri = 0; ri < nreg; ++ri) {
        const RegularizerSpec reg = cfg.regularizers[static_cast<size_t>(ri)].with_lambda(lambda);
        const SolveResult sr = composite_gd(model, reg, sc, Vec::Zero(cell.p));
        rec.support_ok[static_cast<size_t>(ri)] =
            signed_support_match(sr.beta, data.beta_star) ? 1 : 0;
        rec.err_linf[static_cast<size_t>(ri)] =
            (sr.beta - data.beta_star).cwiseAbs().maxCoeff();
        rec.err_l2[static_cast<size_t>(ri)] = (sr.beta - data.beta_star).norm();
        rec.iterations[static_cast<size_t>(ri)] = sr.iterations;
      }
    } catch (const std::exception&) {
      rec.failed = true;
    }
    records[static_cast<size_t>(task)] = std::move(rec);
  };

  detail::parallel_for(ncells * cfg.trials, cfg.threads, run_trial);

  StudyResult out;
  out.study = cfg.study;
  for (int ci = 0; ci < ncells; ++ci) {
    const auto& cell = cells[static_cast<size_t>(ci)];
    for (int ri = 0; ri < nreg; ++ri) {
      CellRow row;
      row.p = cell.p;
      row.k = cell.k;
      row.n = cell.n;
      row.n_over_klogp = cell.ratio;
      row.design = cfg.design_family;
      row.theta = (cfg.design_family == "identity") ? 0.0 : cell.theta;
      row.regularizer = cfg.regularizers[static_cast<size_t>(ri)].name();
      row.lambda = cfg.lambda_for(cell.p, cell.n);
      row.trials = cfg.trials;
      std::vector<double> linf, l2;
      double iter_sum = 0.0;
      int ok = 0, failures = 0, solved = 0;
      for (int ti = 0; ti < cfg.trials; ++ti) {
        const auto& rec = records[static_cast<size_t>(ci * cfg.trials + ti)];
        if (rec.failed) {
          failures++;
          continue;
        }
        solved++;
        ok += rec.support_ok[static_cast<size_t>(ri)];
        linf.push_back(rec.err_linf[static_cast<size_t>(ri)]);
        l2.push_back(rec.err_l2[static_cast<size_t>(ri)]);
        iter_sum += rec.iterations[static_cast<size_t>(ri)];
      }
      row.failures = failures;
      row.success_rate = static_cast<double>(ok) / static_cast<double>(cfg.trials);
      row.median_linf = median(linf);
      row.median_l2 = median(l2);
      row.mean_iterations = solved ? iter_sum / solved : 0.0;
      // R depends on beta_star only through ||.||_1 = sqrt(k), identical
      // across trials for both patterns.
      row.radius = (cfg.r_rule == "fixed")
                       ? cfg.r_fixed
                       : 1.1 * std::sqrt(static_cast<double>(cell.k));
      out.cell_rows.push_back(row);
    }
  }

  out.summary["config"] = experiment_config_to_json(cfg);
  out.summary["cells"] = ncells;
  out.summary["rows"] = out.cell_rows.size();
  return out;
}

inline StudyResult run_phase_transition(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.study = StudyKind::PhaseTransition;
  return run_grid_study(c);
}

inline StudyResult run_error_curves(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.study = StudyKind::ErrorCurves;
  return run_grid_study(c);
}

// ---- multistart study ----

inline StudyResult run_multistart(const ExperimentConfig& cfg) {
  if (cfg.p_grid.empty() || cfg.regularizers.empty())
    throw std::invalid_argument("experiment: empty grid");
  const int p = cfg.p_grid.front();
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(p))));
  const double logp = std::log(static_cast<double>(p));
  const bool logistic = (cfg.loss == "logistic");
  int n;
  if (!cfg.n_grid.empty())
    n = cfg.n_grid.front();
  else if (logistic)
    n = static_cast<int>(std::lround(10.0 * k * k * k * logp));
  else
    n = static_cast<int>(std::lround(20.0 * k * logp));

  DesignSpec ds = logistic ? DesignSpec::identity(p, cfg.sigma_x)
                           : DesignSpec::m2(p, cfg.design_theta);
  const Mat design = make_design(ds);

  TrialSpec ts;
  ts.p = p;
  ts.k = k;
  ts.n = n;
  ts.pattern = cfg.beta_pattern;
  ts.sigma_eps = cfg.sigma_eps;
  ts.sigma_w = 0.0;
  ts.seed = split_seed(cfg.seed, 0xDA7Au);
  const TrialData data =
      sample_trial(design, ts, logistic ? ResponseKind::Logistic : ResponseKind::Linear);
  LossModel model =
      logistic ? LossModel::logistic(data.X, data.y) : LossModel::ols(data.X, data.y);

  const double lambda = cfg.lambda_for(p, n);
  SolverConfig sc;
  sc.R = cfg.radius_for(data.beta_star);
  sc.max_iters = cfg.max_iters;
  sc.tol = cfg.tol;
  sc.record_trace = true;

  const int nreg = static_cast<int>(cfg.regularizers.size());
  std::vector<MultistartResult> results(static_cast<size_t>(nreg));
  detail::parallel_for(nreg, cfg.threads, [&](int ri) {
    const RegularizerSpec reg = cfg.regularizers[static_cast<size_t>(ri)].with_lambda(lambda);
    results[static_cast<size_t>(ri)] =
        multistart(model, reg, sc, cfg.multistart_m,
                   split_seed(cfg.seed, 0x5EEDu, static_cast<std::uint64_t>(ri)));
  });

  StudyResult out;
  out.study = StudyKind::Multistart;
  for (int ri = 0; ri < nreg; ++ri) {
    const auto& ms = results[static_cast<size_t>(ri)];
    MultistartRow row;
    row.loss = cfg.loss;
    row.design = ds.name();
    row.theta = logistic ? 0.0 : cfg.design_theta;
    row.sigma_x = cfg.sigma_x;
    row.p = p;
    row.k = k;
    row.n = n;
    row.regularizer = cfg.regularizers[static_cast<size_t>(ri)].name();
    row.lambda = lambda;
    row.radius = sc.R;
    row.m = cfg.multistart_m;
    row.cluster_count = ms.cluster_count();
    double it = 0;
    for (const auto& r : ms.runs) it += r.iterations;
    row.mean_iterations = it / static_cast<double>(ms.runs.size());
    out.multistart_rows.push_back(row);

    for (int run = 0; run < static_cast<int>(ms.runs.size()); ++run) {
      const auto& trace = ms.runs[static_cast<size_t>(run)].iterate_trace;
      for (int t = 0; t < static_cast<int>(trace.size()); ++t) {
        TraceRow tr;
        tr.regularizer = row.regularizer;
        tr.run = run;
        tr.iter = t;
        tr.log_l2_error =
            std::log((trace[static_cast<size_t>(t)] - data.beta_star).norm());
        out.trace_rows.push_back(tr);
      }
    }
  }
  out.summary["config"] = experiment_config_to_json(cfg);
  out.summary["n"] = n;
  out.summary["k"] = k;
  return out;
}

// ---- glasso study ----

inline StudyResult run_glasso_study(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("experiment: trials >= 1 required");
  const int p = cfg.p_grid.empty() ? 32 : cfg.p_grid.front();
  const int n = cfg.glasso_n;
  const Mat theta_star = make_chain_precision(p, cfg.rho_off);
  Mat sigma_star = theta_star.llt().solve(Mat::Identity(p, p));
  sigma_star = ((sigma_star + sigma_star.transpose()) / 2.0).eval();
  const EdgeSet support = EdgeSet::off_diagonal_support(theta_star, 1e-12);
  const Eigen::LLT<Mat> llt(sigma_star);
  const Mat L = llt.matrixL();
  const double lambda = cfg.lambda_for(p, n);
  // Support threshold for the matrix estimate: the spectral clamp can leak
  // small magnitudes everywhere, so lambda/2 separates signal from leakage.
  const double tau_supp = lambda / 2.0;

  const int nreg = static_cast<int>(cfg.regularizers.size());
  struct GlTrial {
    bool failed = false;
    std::vector<char> support_exact;
    std::vector<double> max_err, frob_err, spec_err;
    std::vector<char> chain_ok;
    std::vector<double> oracle_dist;
    std::vector<int> iterations;
    double oracle_resid = 0.0;
  };
  std::vector<GlTrial> trials(static_cast<size_t>(cfg.trials));

  detail::parallel_for(cfg.trials, cfg.threads, [&](int ti) {
    GlTrial rec;
    rec.support_exact.assign(static_cast<size_t>(nreg), 0);
    rec.max_err.assign(static_cast<size_t>(nreg), std::nan(""));
    rec.frob_err.assign(static_cast<size_t>(nreg), std::nan(""));
    rec.spec_err.assign(static_cast<size_t>(nreg), std::nan(""));
    rec.chain_ok.assign(static_cast<size_t>(nreg), 0);
    rec.oracle_dist.assign(static_cast<size_t>(nreg), std::nan(""));
    rec.iterations.assign(static_cast<size_t>(nreg), 0);
    try {
      SplitMix64 rng(split_seed(cfg.seed, 0x61A5u, static_cast<std::uint64_t>(ti)));
      Mat G(n, p);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) G(i, j) = rng.next_gaussian();
      const Mat X = G * L.transpose();
      Mat sigma_hat = X.transpose() * X / static_cast<double>(n);
      sigma_hat = ((sigma_hat + sigma_hat.transpose()) / 2.0).eval();

      const Mat oracle = glasso_oracle(sigma_hat, support);
      {
        const Mat W = oracle.llt().solve(Mat::Identity(p, p));
        double r = 0.0;
        for (int j = 0; j < p; ++j) r = std::max(r, std::abs(sigma_hat(j, j) - W(j, j)));
        for (const auto& [a, b] : support.edges)
          r = std::max(r, std::abs(sigma_hat(a, b) - W(a, b)));
        rec.oracle_resid = r;
      }

      for (int ri = 0; ri < nreg; ++ri) {
        const RegularizerSpec reg = cfg.regularizers[static_cast<size_t>(ri)].with_lambda(lambda);
        GlassoConfig gc;
        gc.kappa = cfg.kappa;
        gc.max_iters = cfg.max_iters;
        gc.tol = cfg.tol;
        const GlassoResult gr = glasso_solve(sigma_hat, reg, gc, Mat::Identity(p, p));
        const EdgeSet est = EdgeSet::off_diagonal_support(gr.theta, tau_supp);
        rec.support_exact[static_cast<size_t>(ri)] = (est == support) ? 1 : 0;
        const GlassoErrorNorms norms = glasso_error_norms(gr.theta, theta_star, support);
        rec.max_err[static_cast<size_t>(ri)] = norms.max_norm;
        rec.frob_err[static_cast<size_t>(ri)] = norms.frobenius;
        rec.spec_err[static_cast<size_t>(ri)] = norms.spectral;
        const double eps = 1e-12 * std::max(1.0, norms.frobenius);
        const bool chain =
            norms.spectral <= norms.frobenius + eps &&
            norms.frobenius <=
                std::sqrt(static_cast<double>(support.total_nonzeros())) * norms.max_norm + eps;
        rec.chain_ok[static_cast<size_t>(ri)] = chain ? 1 : 0;
        rec.oracle_dist[static_cast<size_t>(ri)] = (gr.theta - oracle).cwiseAbs().maxCoeff();
        rec.iterations[static_cast<size_t>(ri)] = gr.iterations;
      }
    } catch (const std::exception&) {
      rec.failed = true;
    }
    trials[static_cast<size_t>(ti)] = std::move(rec);
  });

  StudyResult out;
  out.study = StudyKind::GlassoStudy;
  for (int ri = 0; ri < nreg; ++ri) {
    GlassoRow row;
    row.p = p;
    row.n = n;
    row.rho_off = cfg.rho_off;
    row.regularizer = cfg.regularizers[static_cast<size_t>(ri)].name();
    row.lambda = lambda;
    row.kappa = cfg.kappa > 0.0
                    ? cfg.kappa
                    : GlassoConfig{}.resolve_kappa(
                          cfg.regularizers[static_cast<size_t>(ri)].with_lambda(lambda));
    row.trials = cfg.trials;
    std::vector<double> maxv, frobv, specv, odist;
    int ok = 0, chain = 0, failures = 0, solved = 0;
    double it = 0, oresid = 0;
    for (const auto& rec : trials) {
      if (rec.failed) {
        failures++;
        continue;
      }
      solved++;
      ok += rec.support_exact[static_cast<size_t>(ri)];
      chain += rec.chain_ok[static_cast<size_t>(ri)];
      maxv.push_back(rec.max_err[static_cast<size_t>(ri)]);
      frobv.push_back(rec.frob_err[static_cast<size_t>(ri)]);
      specv.push_back(rec.spec_err[static_cast<size_t>(ri)]);
      odist.push_back(rec.oracle_dist[static_cast<size_t>(ri)]);
      it += rec.iterations[static_cast<size_t>(ri)];
      oresid = std::max(oresid, rec.oracle_resid);
    }
    row.failures = failures;
    row.support_exact_rate = static_cast<double>(ok) / static_cast<double>(cfg.trials);
    row.chain_ok_rate = static_cast<double>(chain) / static_cast<double>(cfg.trials);
    row.median_max_err = median(maxv);
    row.median_frob_err = median(frobv);
    row.median_spectral_err = median(specv);
    row.median_oracle_dist = median(odist);
    row.oracle_resid_max = oresid;
    row.mean_iterations = solved ? it / solved : 0.0;
    out.glasso_rows.push_back(row);
  }
  out.summary["config"] = experiment_config_to_json(cfg);
  out.summary["support_threshold"] = tau_supp;
  return out;
}

inline StudyResult run_study(const ExperimentConfig& cfg) {
  switch (cfg.study) {
    case StudyKind::PhaseTransition: return run_phase_transition(cfg);
    case StudyKind::ErrorCurves: return run_error_curves(cfg);
    case StudyKind::Multistart: return run_multistart(cfg);
    case StudyKind::GlassoStudy: return run_glasso_study(cfg);
  }
  throw std::invalid_argument("run_study: bad study kind");
}

// ---- desk-scale presets (paper-scale variants provided for reference) ----

inline ExperimentConfig desk_phase_transition() {
  ExperimentConfig c;
  c.study = StudyKind::PhaseTransition;
  c.p_grid = {64};
  c.n_over_klogp_grid = {2, 4, 6, 8, 10, 12, 14};
  c.trials = 50;
  c.loss = "corrupted";
  c.design_family = "m1";
  c.sigma_eps = 0.1;
  c.sigma_w = 0.2;
  c.beta_pattern = BetaPattern::FlatPositive;
  c.seed = 20240901;
  return c;
}

inline ExperimentConfig full_phase_transition() {
  ExperimentConfig c = desk_phase_transition();
  c.p_grid = {128, 256, 512};
  return c;
}

inline ExperimentConfig desk_multistart_ols(double theta, const RegularizerSpec& reg) {
  ExperimentConfig c;
  c.study = StudyKind::Multistart;
  c.p_grid = {64};
  c.loss = "ols";
  c.design_family = "m2";
  c.design_theta = theta;
  c.sigma_eps = 0.1;
  c.beta_pattern = BetaPattern::RandomSigns;
  c.regularizers = {reg};
  c.multistart_m = 15;
  c.seed = 20240902;
  return c;
}

inline ExperimentConfig desk_multistart_logistic(double sigma_x, const RegularizerSpec& reg) {
  ExperimentConfig c;
  c.study = StudyKind::Multistart;
  c.p_grid = {64};
  c.loss = "logistic";
  c.design_family = "identity";
  c.sigma_x = sigma_x;
  c.beta_pattern = BetaPattern::RandomSigns;
  c.regularizers = {reg};
  c.multistart_m = 15;
  c.seed = 20240903;
  return c;
}

inline ExperimentConfig desk_glasso_study() {
  ExperimentConfig c;
  c.study = StudyKind::GlassoStudy;
  c.p_grid = {32};
  c.glasso_n = 4000;
  c.rho_off = 0.4;
  c.trials = 25;
  c.regularizers = {RegularizerSpec::mcp(0, 1.5)};
  // unbiased penalties apply no shrinkage past b lambda, so lambda must
  // clear the max entrywise noise of Sigma_hat (about 2 sqrt(log p / n))
  // for the off-support entries to threshold to zero
  c.lambda_scale = 2.5;
  c.seed = 20240904;
  return c;
}

}  // namespace ncreg

// ncreg: nonconvex-regularized sparse M-estimation CLI.
//
// Subcommands: gen (synthetic data), solve (composite gradient descent),
// pdw-check (primal-dual witness certificate), glasso (sparse inverse
// covariance), experiment (Monte Carlo studies).

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "ncreg/csv.hpp"
#include "ncreg/datagen.hpp"
#include "ncreg/experiments.hpp"
#include "ncreg/glasso.hpp"
#include "ncreg/pdw.hpp"
#include "ncreg/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ncreg;

namespace {

RegularizerSpec make_reg(const std::string& kind, double lambda, double a, double b) {
  if (kind == "l1") return RegularizerSpec::l1(lambda);
  if (kind == "scad") return RegularizerSpec::scad(lambda, a);
  if (kind == "mcp") return RegularizerSpec::mcp(lambda, b);
  if (kind == "lsp") return RegularizerSpec::lsp(lambda);
  throw CLI::ValidationError("--reg must be one of l1|scad|mcp|lsp");
}

LossModel load_model(const std::string& loss, const std::string& data,
                     const std::string& sigma_w_csv) {
  const auto comma = data.find(',');
  if (comma == std::string::npos)
    throw CLI::ValidationError("--data expects X.csv,y.csv");
  const std::string xpath = data.substr(0, comma);
  const std::string ypath = data.substr(comma + 1);
  Mat X = read_matrix_csv(xpath);
  Vec y = read_vector_csv(ypath);
  if (loss == "ols") return LossModel::ols(std::move(X), std::move(y));
  if (loss == "logistic") return LossModel::logistic(std::move(X), std::move(y));
  if (loss == "corrupted") {
    if (sigma_w_csv.empty())
      throw CLI::ValidationError("--loss corrupted requires --sigma-w Sw.csv");
    const Mat Sw = read_matrix_csv(sigma_w_csv);
    auto [G, g] = corrected_moments(X, y, Sw);
    return LossModel::corrupted_quadratic(std::move(G), std::move(g),
                                          static_cast<int>(y.size()));
  }
  throw CLI::ValidationError("--loss must be one of ols|corrupted|logistic");
}

json solve_result_to_json(const SolveResult& r) {
  json j;
  j["beta"] = std::vector<double>(r.beta.data(), r.beta.data() + r.beta.size());
  j["status"] = r.converged() ? "converged" : "max_iters";
  j["iterations"] = r.iterations;
  j["kkt_residual"] = r.kkt_residual;
  j["eta"] = r.eta;
  j["objective"] = r.objective_trace.back();
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

double json_or_nan(double v) { return std::isfinite(v) ? v : 0.0; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nonconvex-regularized sparse M-estimation"};
  app.require_subcommand(1);

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "generate a synthetic trial dataset");
  std::string g_design = "m1", g_out = ".", g_pattern = "flat", g_response = "linear";
  int g_p = 64, g_k = 8, g_n = 500;
  double g_theta = 0.3125, g_sigma_x = 1.0, g_sigma_eps = 0.1, g_sigma_w = 0.2;
  std::uint64_t g_seed = 1;
  gen->add_option("--design", g_design, "m1|m2|identity");
  gen->add_option("--theta", g_theta, "design parameter");
  gen->add_option("--sigma-x", g_sigma_x, "identity design scale");
  gen->add_option("--p", g_p);
  gen->add_option("--k", g_k);
  gen->add_option("--n", g_n);
  gen->add_option("--pattern", g_pattern, "flat|random-signs");
  gen->add_option("--response", g_response, "linear|logistic");
  gen->add_option("--sigma-eps", g_sigma_eps);
  gen->add_option("--sigma-w", g_sigma_w, "0 = clean covariates");
  gen->add_option("--seed", g_seed);
  gen->add_option("--out", g_out, "output directory");

  // ---- solve ----
  auto* solve = app.add_subcommand("solve", "composite gradient descent solve");
  std::string s_loss = "ols", s_data, s_reg = "scad", s_out = "result.json", s_sigma_w;
  double s_lambda = 0.1, s_a = 2.5, s_b = 1.5;
  double s_R = std::numeric_limits<double>::infinity(), s_tol = 1e-9;
  int s_max_iters = 20000;
  solve->add_option("--loss", s_loss, "ols|corrupted|logistic");
  solve->add_option("--data", s_data, "X.csv,y.csv")->required();
  solve->add_option("--sigma-w", s_sigma_w, "Sigma_w CSV (corrupted loss)");
  solve->add_option("--reg", s_reg, "l1|scad|mcp|lsp");
  solve->add_option("--lambda", s_lambda);
  solve->add_option("--a", s_a, "SCAD parameter");
  solve->add_option("--b", s_b, "MCP parameter");
  solve->add_option("--R", s_R, "l1-ball radius");
  solve->add_option("--tol", s_tol);
  solve->add_option("--max-iters", s_max_iters);
  solve->add_option("--out", s_out);

  // ---- pdw-check ----
  auto* pdw = app.add_subcommand("pdw-check", "primal-dual witness certificate");
  std::string w_loss = "ols", w_data, w_reg = "scad", w_support, w_out = "cert.json";
  std::string w_sigma_w, w_beta_star;
  double w_lambda = 0.1, w_a = 2.5, w_b = 1.5;
  double w_R = std::numeric_limits<double>::infinity(), w_tol = 1e-9;
  int w_max_iters = 20000;
  pdw->add_option("--loss", w_loss, "ols|corrupted|logistic");
  pdw->add_option("--data", w_data, "X.csv,y.csv")->required();
  pdw->add_option("--sigma-w", w_sigma_w, "Sigma_w CSV (corrupted loss)");
  pdw->add_option("--reg", w_reg, "l1|scad|mcp|lsp");
  pdw->add_option("--lambda", w_lambda);
  pdw->add_option("--a", w_a);
  pdw->add_option("--b", w_b);
  pdw->add_option("--R", w_R);
  pdw->add_option("--tol", w_tol);
  pdw->add_option("--max-iters", w_max_iters);
  pdw->add_option("--support", w_support, "CSV of 0-based support indices")->required();
  pdw->add_option("--beta-star", w_beta_star, "optional beta* CSV for diagnostics");
  pdw->add_option("--out", w_out);

  // ---- glasso ----
  auto* gl = app.add_subcommand("glasso", "nonconvex graphical lasso");
  std::string l_sigma, l_reg = "mcp", l_kappa = "auto", l_out = "theta.csv";
  double l_lambda = 0.05, l_a = 2.5, l_b = 1.5, l_eps_pd = 1e-6, l_tol = 1e-9;
  int l_max_iters = 20000;
  gl->add_option("--sigma", l_sigma, "sample covariance CSV")->required();
  gl->add_option("--reg", l_reg, "l1|scad|mcp|lsp");
  gl->add_option("--lambda", l_lambda);
  gl->add_option("--a", l_a);
  gl->add_option("--b", l_b);
  gl->add_option("--kappa", l_kappa, "spectral radius or 'auto' = sqrt(2/mu)");
  gl->add_option("--eps-pd", l_eps_pd);
  gl->add_option("--tol", l_tol);
  gl->add_option("--max-iters", l_max_iters);
  gl->add_option("--out", l_out);

  // ---- experiment ----
  auto* exp = app.add_subcommand("experiment", "Monte Carlo studies");
  exp->require_subcommand(1);
  std::string e_config, e_out = "results.csv", e_summary, e_traces, e_preset = "desk";
  int e_threads = 0;
  std::vector<CLI::App*> studies;
  for (const char* name :
       {"phase-transition", "error-curves", "multistart", "glasso-study"}) {
    auto* sc = exp->add_subcommand(name);
    sc->add_option("--config", e_config, "JSON config (overrides preset)");
    sc->add_option("--preset", e_preset, "desk|full (phase/error studies)");
    sc->add_option("--out", e_out, "results CSV");
    sc->add_option("--summary", e_summary, "summary JSON");
    sc->add_option("--traces", e_traces, "trace CSV (multistart)");
    sc->add_option("--threads", e_threads, "0 = hardware");
    studies.push_back(sc);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      DesignSpec ds;
      if (g_design == "m1")
        ds = DesignSpec::m1(g_p, g_k, g_theta);
      else if (g_design == "m2")
        ds = DesignSpec::m2(g_p, g_theta);
      else
        ds = DesignSpec::identity(g_p, g_sigma_x);
      TrialSpec ts;
      ts.p = g_p;
      ts.k = g_k;
      ts.n = g_n;
      ts.pattern = (g_pattern == "flat") ? BetaPattern::FlatPositive : BetaPattern::RandomSigns;
      ts.sigma_eps = g_sigma_eps;
      ts.sigma_w = g_sigma_w;
      ts.seed = g_seed;
      const TrialData d = sample_trial(
          make_design(ds), ts,
          (g_response == "logistic") ? ResponseKind::Logistic : ResponseKind::Linear);
      fs::create_directories(g_out);
      write_matrix_csv((fs::path(g_out) / "X.csv").string(), d.X);
      if (d.Z) write_matrix_csv((fs::path(g_out) / "Z.csv").string(), *d.Z);
      write_vector_csv((fs::path(g_out) / "y.csv").string(), d.y);
      write_vector_csv((fs::path(g_out) / "beta_star.csv").string(), d.beta_star);
      std::cout << "wrote " << g_out << "/{X.csv" << (d.Z ? ",Z.csv" : "")
                << ",y.csv,beta_star.csv}\n";
      return 0;
    }

    if (*solve) {
      const LossModel model = load_model(s_loss, s_data, s_sigma_w);
      const RegularizerSpec reg = make_reg(s_reg, s_lambda, s_a, s_b);
      SolverConfig cfg;
      cfg.R = s_R;
      cfg.tol = s_tol;
      cfg.max_iters = s_max_iters;
      const SolveResult r = composite_gd(model, reg, cfg, Vec::Zero(model.dim()));
      write_text(s_out, solve_result_to_json(r).dump(2) + "\n");
      std::cout << "status=" << (r.converged() ? "converged" : "max_iters")
                << " iterations=" << r.iterations << " kkt=" << r.kkt_residual << "\n";
      return 0;
    }

    if (*pdw) {
      const LossModel model = load_model(w_loss, w_data, w_sigma_w);
      const RegularizerSpec reg = make_reg(w_reg, w_lambda, w_a, w_b);
      const Vec sraw = read_vector_csv(w_support);
      std::vector<int> S;
      for (Eigen::Index i = 0; i < sraw.size(); ++i)
        S.push_back(static_cast<int>(std::lround(sraw[i])));
      std::optional<Vec> bstar;
      if (!w_beta_star.empty()) bstar = read_vector_csv(w_beta_star);
      SolverConfig cfg;
      cfg.R = w_R;
      cfg.tol = w_tol;
      cfg.max_iters = w_max_iters;
      const PdwCertificate cert =
          construct_witness(model, reg, cfg, S, bstar ? &*bstar : nullptr);
      json j;
      j["beta_hat"] = std::vector<double>(cert.beta_hat.data(),
                                          cert.beta_hat.data() + cert.beta_hat.size());
      j["z_hat"] =
          std::vector<double>(cert.z_hat.data(), cert.z_hat.data() + cert.z_hat.size());
      j["dual_margin"] = cert.dual_margin;
      j["interior"] = cert.interior;
      j["zero_subgrad_residual"] = cert.zero_subgrad_residual;
      j["alpha1_plugin"] = cert.alpha1_plugin;
      j["mu"] = cert.mu;
      j["curvature_gate"] = cert.curvature_gate;
      if (std::isfinite(cert.incoherence)) j["incoherence"] = cert.incoherence;
      if (std::isfinite(cert.betamin_slack)) j["betamin_slack"] = cert.betamin_slack;
      if (std::isfinite(cert.ellinf_term_grad)) {
        j["ellinf_term_grad"] = cert.ellinf_term_grad;
        j["ellinf_term_lambda"] = cert.ellinf_term_lambda;
      }
      j["verdict"] = verdict_name(cert.verdict);
      write_text(w_out, j.dump(2) + "\n");
      std::cout << "verdict=" << verdict_name(cert.verdict)
                << " dual_margin=" << cert.dual_margin << "\n";
      return 0;
    }

    if (*gl) {
      const Mat sigma = read_matrix_csv(l_sigma);
      const RegularizerSpec reg = make_reg(l_reg, l_lambda, l_a, l_b);
      GlassoConfig cfg;
      cfg.kappa = (l_kappa == "auto") ? 0.0 : std::stod(l_kappa);
      cfg.eps_pd = l_eps_pd;
      cfg.tol = l_tol;
      cfg.max_iters = l_max_iters;
      const GlassoResult r =
          glasso_solve(sigma, reg, cfg, Mat::Identity(sigma.rows(), sigma.cols()));
      write_matrix_csv(l_out, r.theta);
      std::cout << "status=" << (r.status == SolveStatus::Converged ? "converged" : "max_iters")
                << " iterations=" << r.iterations << " kkt=" << r.kkt_residual << "\n";
      return 0;
    }

    if (*exp) {
      ExperimentConfig cfg;
      std::string chosen;
      for (size_t i = 0; i < studies.size(); ++i)
        if (*studies[i])
          chosen = std::array{"phase-transition", "error-curves", "multistart",
                              "glasso-study"}[i];
      if (!e_config.empty()) {
        std::ifstream in(e_config);
        if (!in) throw std::runtime_error("cannot read config: " + e_config);
        json j;
        in >> j;
        cfg = experiment_config_from_json(j);
      } else if (chosen == "glasso-study") {
        cfg = desk_glasso_study();
      } else if (chosen == "multistart") {
        cfg = desk_multistart_ols(0.7, RegularizerSpec::scad(0, 2.5));
      } else {
        cfg = (e_preset == "full") ? full_phase_transition() : desk_phase_transition();
      }
      cfg.study = study_from_name(chosen);
      cfg.threads = e_threads;
      if (const char* env = std::getenv("NCREG_SEED"))
        cfg.seed = std::stoull(env);

      const auto t0 = std::chrono::steady_clock::now();
      StudyResult res = run_study(cfg);
      const double wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
              .count();

      write_text(e_out, res.results_csv());
      res.summary["wall_ms"] = wall_ms;
      if (!e_summary.empty()) write_text(e_summary, res.summary.dump(2) + "\n");
      if (!e_traces.empty()) write_text(e_traces, res.traces_csv());
      std::cout << "wrote " << e_out << " (" << wall_ms << " ms)\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

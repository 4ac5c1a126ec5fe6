#include <catch2/catch_amalgamated.hpp>

#include "ncreg/datagen.hpp"
#include "ncreg/pdw.hpp"
#include "ncreg/solver.hpp"

using namespace ncreg;

namespace {

Mat random_matrix(SplitMix64& rng, int r, int c) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.next_gaussian();
  return m;
}

}  // namespace

TEST_CASE("unregularized orthogonal design recovers y") {
  const int n = 12;
  const Mat X = Mat::Identity(n, n);
  SplitMix64 rng(3);
  Vec y(n);
  for (int i = 0; i < n; ++i) y[i] = rng.next_gaussian();
  const LossModel model = LossModel::ols(X, y);

  SolverConfig cfg;
  cfg.tol = 1e-14;
  const SolveResult res =
      composite_gd(model, RegularizerSpec::l1(0.0), cfg, Vec::Zero(n));
  // Gamma = I/n, gamma = y/n: the least-squares solution is y itself
  CHECK(res.converged());
  CHECK((res.beta - y).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK(res.kkt_residual <= 1e-9);
}

TEST_CASE("orthogonal design with l1 is soft-thresholded least squares") {
  const int n = 10;
  SplitMix64 rng(5);
  Vec y(n);
  for (int i = 0; i < n; ++i) y[i] = 2.0 * rng.next_gaussian();
  // X = sqrt(n) I makes Gamma = I and gamma = y / sqrt(n)
  const Mat X = std::sqrt(static_cast<double>(n)) * Mat::Identity(n, n);
  const LossModel model = LossModel::ols(X, y);
  const double lambda = 0.3;

  SolverConfig cfg;
  cfg.tol = 1e-14;
  const SolveResult res =
      composite_gd(model, RegularizerSpec::l1(lambda), cfg, Vec::Zero(n));
  const Vec expected = soft_threshold((y / std::sqrt(static_cast<double>(n))).eval(), lambda);
  CHECK((res.beta - expected).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("golden fixture: SCAD on corrupted M1 design recovers signed support") {
  const int p = 64, k = 8;
  const double theta = 2.5 / k;
  const Mat design = make_design(DesignSpec::m1(p, k, theta));
  TrialSpec ts;
  ts.p = p;
  ts.k = k;
  // SCAD's basin structure at k = 8 needs a deep sample budget before the
  // true-support point dominates; ratio 22 sits past that transition.
  ts.n = static_cast<int>(std::lround(22.0 * k * std::log(static_cast<double>(p))));
  ts.sigma_eps = 0.1;
  ts.sigma_w = 0.2;
  ts.seed = 424242;
  const TrialData d = sample_trial(design, ts, ResponseKind::Linear);
  auto [G, g] = corrected_moments(*d.Z, d.y, 0.04 * Mat::Identity(p, p));
  const LossModel model = LossModel::corrupted_quadratic(G, g, ts.n);

  const double lambda = std::sqrt(std::log(static_cast<double>(p)) / ts.n);
  SolverConfig cfg;
  cfg.R = 1.1 * d.beta_star.lpNorm<1>();
  const SolveResult res =
      composite_gd(model, RegularizerSpec::scad(lambda, 2.5), cfg, Vec::Zero(p));
  CHECK(res.converged());
  CHECK(signed_support_match(res.beta, d.beta_star, 1e-4));
}

TEST_CASE("auto stepsize") {
  SplitMix64 rng(7);
  const int p = 6;
  // Gamma = I via X = sqrt(n) I
  const Mat X = std::sqrt(6.0) * Mat::Identity(p, p);
  Vec y(p);
  for (int i = 0; i < p; ++i) y[i] = rng.next_gaussian();
  const LossModel ols = LossModel::ols(X, y);
  const auto spec = RegularizerSpec::mcp(0.1, 1.5);
  const double mu = amenability_params(spec).mu;
  CHECK(auto_stepsize(ols, spec, Vec::Zero(p)) == Catch::Approx(1.1 + mu).margin(1e-6));

  // M2(0.7) with p = 2: lambda_max = 1.7
  const Mat m2 = make_m2_matrix(2, 0.7);
  const LossModel cq = LossModel::corrupted_quadratic(m2, Vec::Zero(2), 0);
  CHECK(auto_stepsize(cq, RegularizerSpec::l1(0.1), Vec::Zero(2)) ==
        Catch::Approx(1.1 * 1.7).margin(1e-6));

  // logistic: power iteration against the dense eigensolver on the surrogate
  const Mat Xl = random_matrix(rng, 80, 10);
  Vec ybin(80);
  for (int i = 0; i < 80; ++i) ybin[i] = (rng.next_u64() & 1) ? 1.0 : 0.0;
  const LossModel logit = LossModel::logistic(Xl, ybin);
  const double est = auto_stepsize(logit, RegularizerSpec::l1(0.1), Vec::Zero(10));
  const Mat surrogate = 0.25 * Xl.transpose() * Xl / 80.0;
  const double dense = sym_eig(surrogate).values.maxCoeff();
  CHECK(std::abs(est - 1.1 * dense) <= 0.05 * (1.1 * dense));
}

TEST_CASE("feasibility and monotone descent along the trace") {
  SplitMix64 rng(11);
  const int p = 20, n = 40;
  const Mat X = random_matrix(rng, n, p);
  Vec y = X * Vec::Unit(p, 0) + 0.1 * random_matrix(rng, n, 1);
  const LossModel model = LossModel::ols(X, y);
  SolverConfig cfg;
  cfg.R = 2.0;
  cfg.record_trace = true;
  const auto spec = RegularizerSpec::scad(0.2, 2.5);
  const SolveResult res = composite_gd(model, spec, cfg, Vec::Zero(p));
  for (const auto& it : res.iterate_trace)
    CHECK(it.lpNorm<1>() <= cfg.R * (1.0 + 1e-10));
  for (size_t t = 1; t < res.objective_trace.size(); ++t)
    CHECK(res.objective_trace[t] <= res.objective_trace[t - 1] + 1e-10);
}

TEST_CASE("fixed point characterization at convergence") {
  SplitMix64 rng(13);
  const int p = 15, n = 60;
  const Mat X = random_matrix(rng, n, p);
  Vec beta_star = Vec::Zero(p);
  beta_star.head(3) << 1.0, -0.5, 0.75;
  const Vec y = X * beta_star + 0.05 * random_matrix(rng, n, 1);
  const LossModel model = LossModel::ols(X, y);
  SolverConfig cfg;
  cfg.R = 5.0;
  cfg.tol = 1e-12;
  const auto spec = RegularizerSpec::mcp(0.1, 1.5);
  const SolveResult res = composite_gd(model, spec, cfg, Vec::Zero(p));
  REQUIRE(res.converged());
  CHECK(res.kkt_residual <= cfg.tol * 10 + 1e-10);
}

TEST_CASE("infeasible init rejected; NaN gradient raises numerical_failure") {
  const Mat X = Mat::Identity(4, 4);
  const Vec y = Vec::Ones(4);
  const LossModel model = LossModel::ols(X, y);
  SolverConfig cfg;
  cfg.R = 0.5;
  CHECK_THROWS_AS(composite_gd(model, RegularizerSpec::l1(0.1), cfg, Vec::Ones(4)),
                  std::invalid_argument);

  // negative curvature with no l1 ball: iterates diverge past DBL_MAX
  Mat G = -Mat::Identity(2, 2);
  const LossModel bad = LossModel::corrupted_quadratic(G, Vec::Zero(2), 0);
  SolverConfig cfg2;
  cfg2.eta = 1e-3;
  cfg2.max_iters = 1000;
  try {
    composite_gd(bad, RegularizerSpec::l1(0.1), cfg2, (0.5 * Vec::Ones(2)).eval());
    FAIL("expected numerical_failure");
  } catch (const numerical_failure& e) {
    CHECK(e.iterate().size() == 2);
    CHECK(e.iterate().allFinite());
  }
}

TEST_CASE("solve_restricted") {
  SplitMix64 rng(17);
  const int p = 12, n = 80;
  const Mat X = random_matrix(rng, n, p);
  Vec beta_star = Vec::Zero(p);
  beta_star.head(3) << 0.8, -0.6, 0.4;
  const Vec y = X * beta_star + 0.05 * random_matrix(rng, n, 1);
  const LossModel model = LossModel::ols(X, y);
  const std::vector<int> S{0, 1, 2};

  // restricted to the full support equals the unrestricted solve
  std::vector<int> full(p);
  for (int j = 0; j < p; ++j) full[static_cast<size_t>(j)] = j;
  SolverConfig cfg;
  cfg.R = 4.0;
  cfg.tol = 1e-12;
  const auto spec = RegularizerSpec::l1(0.05);
  const SolveResult a = composite_gd(model, spec, cfg, Vec::Zero(p));
  const SolveResult b = solve_restricted(model, spec, cfg, full);
  CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() <= 1e-8);

  // lambda = 0 on the true support matches the oracle
  SolverConfig cfg0;
  cfg0.tol = 1e-14;
  const SolveResult c = solve_restricted(model, RegularizerSpec::l1(0.0), cfg0, S);
  const Vec oracle = oracle_estimator(model, S);
  CHECK((c.beta - oracle).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK_THROWS_AS(solve_restricted(model, spec, cfg, {}), std::invalid_argument);
}

TEST_CASE("restricted SCAD with strong signal matches the oracle") {
  SplitMix64 rng(19);
  const int p = 32, k = 4, n = 1500;
  const Mat design = Mat::Identity(p, p);
  TrialSpec ts;
  ts.p = p;
  ts.k = k;
  ts.n = n;
  ts.sigma_eps = 0.1;
  ts.seed = 777;
  const TrialData d = sample_trial(design, ts, ResponseKind::Linear);
  const LossModel model = LossModel::ols(d.X, d.y);
  std::vector<int> S;
  for (int j = 0; j < k; ++j) S.push_back(j);

  const double lambda = std::sqrt(std::log(static_cast<double>(p)) / n);
  // beta*_min = 1/2 well above gamma lambda ~ 0.12
  SolverConfig cfg;
  cfg.R = 1.1 * d.beta_star.lpNorm<1>();
  cfg.tol = 1e-13;
  const SolveResult res =
      solve_restricted(model, RegularizerSpec::scad(lambda, 2.5), cfg, S);
  const Vec oracle = oracle_estimator(model, S);
  CHECK((res.beta - oracle).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("oracle estimator") {
  SplitMix64 rng(23);
  const int p = 10, n = 50;
  // orthonormal * sqrt(n) design on the support
  Mat X = random_matrix(rng, n, p);
  Eigen::HouseholderQR<Mat> qr(X);
  Mat Q = qr.householderQ() * Mat::Identity(n, p);
  X = std::sqrt(static_cast<double>(n)) * Q;
  const Vec y = random_matrix(rng, n, 1);
  const LossModel model = LossModel::ols(X, y);
  const std::vector<int> S{0, 3, 7};
  const Vec oracle = oracle_estimator(model, S);
  for (int j : S)
    CHECK(oracle[j] == Catch::Approx(X.col(j).dot(y) / n).margin(1e-10));

  // noiseless recovery is exact
  Vec beta_star = Vec::Zero(p);
  beta_star[0] = 1.0;
  beta_star[3] = -2.0;
  const Vec y0 = X * beta_star;
  const Vec o2 = oracle_estimator(LossModel::ols(X, y0), {0, 3});
  CHECK((o2 - beta_star).cwiseAbs().maxCoeff() <= 1e-10);

  // degenerate design raises
  Mat Xdup = X;
  Xdup.col(1) = Xdup.col(0);
  CHECK_THROWS(oracle_estimator(LossModel::ols(Xdup, y), {0, 1}));
}

TEST_CASE("corrupted oracle matches restricted lambda=0 solve") {
  SplitMix64 rng(29);
  const int p = 16, k = 3, n = 400;
  TrialSpec ts;
  ts.p = p;
  ts.k = k;
  ts.n = n;
  ts.sigma_eps = 0.1;
  ts.sigma_w = 0.2;
  ts.seed = 31337;
  const TrialData d = sample_trial(Mat::Identity(p, p), ts, ResponseKind::Linear);
  auto [G, g] = corrected_moments(*d.Z, d.y, 0.04 * Mat::Identity(p, p));
  const LossModel model = LossModel::corrupted_quadratic(G, g, n);
  std::vector<int> S;
  for (int j = 0; j < k; ++j) S.push_back(j);
  SolverConfig cfg;
  cfg.tol = 1e-14;
  const SolveResult res = solve_restricted(model, RegularizerSpec::l1(0.0), cfg, S);
  const Vec oracle = oracle_estimator(model, S);
  CHECK((res.beta - oracle).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("geometric convergence on a convex instance") {
  const int p = 16, k = 4, n = 1000;
  const Mat design = make_design(DesignSpec::m2(p, 0.5));
  TrialSpec ts;
  ts.p = p;
  ts.k = k;
  ts.n = n;
  ts.sigma_eps = 0.1;
  ts.seed = 99;
  const TrialData d = sample_trial(design, ts, ResponseKind::Linear);
  const LossModel model = LossModel::ols(d.X, d.y);
  const double lambda = std::sqrt(std::log(static_cast<double>(p)) / n);
  const auto spec = RegularizerSpec::l1(lambda);

  SolverConfig ref_cfg;
  ref_cfg.R = 1.1 * d.beta_star.lpNorm<1>();
  ref_cfg.tol = 1e-15;
  ref_cfg.max_iters = 200000;
  const Vec ref = composite_gd(model, spec, ref_cfg, Vec::Zero(p)).beta;

  SolverConfig cfg = ref_cfg;
  cfg.max_iters = 20000;
  cfg.tol = 1e-12;
  cfg.record_trace = true;
  const SolveResult res = composite_gd(model, spec, cfg, Vec::Zero(p));

  std::vector<double> ts_axis, logs;
  double emin = std::numeric_limits<double>::infinity();
  for (const auto& it : res.iterate_trace) emin = std::min(emin, (it - ref).norm());
  for (size_t t = 0; t < res.iterate_trace.size(); ++t) {
    const double e = (res.iterate_trace[t] - ref).norm();
    if (e > std::max(10.0 * emin, 1e-13)) {
      ts_axis.push_back(static_cast<double>(t));
      logs.push_back(std::log(e));
    }
  }
  REQUIRE(ts_axis.size() >= 5);
  const LineFit fit = fit_line(ts_axis, logs);
  CHECK(fit.r2 >= 0.95);
  CHECK(std::log(2.0) / (-fit.slope) <= 30.0);
}

TEST_CASE("multistart determinism and clustering") {
  SplitMix64 rng(31);
  const int p = 10, n = 60;
  const Mat X = random_matrix(rng, n, p);
  Vec beta_star = Vec::Zero(p);
  beta_star.head(2) << 1.0, -1.0;
  const Vec y = X * beta_star + 0.05 * random_matrix(rng, n, 1);
  const LossModel model = LossModel::ols(X, y);
  SolverConfig cfg;
  cfg.R = 3.0;
  const auto spec = RegularizerSpec::l1(0.1);

  const MultistartResult one = multistart(model, spec, cfg, 1, 5);
  CHECK(one.cluster_count() == 1);

  const MultistartResult a = multistart(model, spec, cfg, 8, 5);
  const MultistartResult b = multistart(model, spec, cfg, 8, 5);
  for (int r = 0; r < 8; ++r)
    CHECK((a.runs[static_cast<size_t>(r)].beta - b.runs[static_cast<size_t>(r)].beta)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  // convex problem: all inits land in a single cluster
  CHECK(a.cluster_count() == 1);
}

TEST_CASE("multistart dichotomy on the spiked design") {
  const int p = 64, k = 8;
  const Mat design = make_design(DesignSpec::m2(p, 0.7));
  TrialSpec ts;
  ts.p = p;
  ts.k = k;
  ts.n = static_cast<int>(std::lround(20.0 * k * std::log(static_cast<double>(p))));
  ts.sigma_eps = 0.1;
  ts.pattern = BetaPattern::RandomSigns;
  ts.seed = 20240902;
  const TrialData d = sample_trial(design, ts, ResponseKind::Linear);
  const LossModel model = LossModel::ols(d.X, d.y);
  const double lambda = std::sqrt(std::log(static_cast<double>(p)) / ts.n);

  SolverConfig cfg;
  cfg.R = 1.1 * d.beta_star.lpNorm<1>();

  const MultistartResult l1 =
      multistart(model, RegularizerSpec::l1(lambda), cfg, 15, 20240902);
  CHECK(l1.cluster_count() == 1);

  const MultistartResult scad =
      multistart(model, RegularizerSpec::scad(lambda, 2.5), cfg, 15, 20240902);
  CHECK(scad.cluster_count() >= 2);
}

#include <catch2/catch_amalgamated.hpp>

#include "ncreg/datagen.hpp"
#include "ncreg/glasso.hpp"
#include "ncreg/rng.hpp"

using namespace ncreg;

namespace {

Mat sample_covariance(const Mat& sigma, int n, std::uint64_t seed) {
  const int p = static_cast<int>(sigma.rows());
  const Mat L = sigma.llt().matrixL();
  SplitMix64 rng(seed);
  Mat G(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) G(i, j) = rng.next_gaussian();
  const Mat X = G * L.transpose();
  Mat s = X.transpose() * X / static_cast<double>(n);
  return ((s + s.transpose()) / 2.0).eval();
}

}  // namespace

TEST_CASE("project_pd_spectral") {
  Mat th(2, 2);
  th << -1, 0, 0, 5;
  const Mat pr = project_pd_spectral(th, 0.01, 2.0);
  CHECK(pr(0, 0) == Catch::Approx(0.01).margin(1e-12));
  CHECK(pr(1, 1) == Catch::Approx(2.0).margin(1e-12));
  CHECK(std::abs(pr(0, 1)) <= 1e-12);

  // in-range input is untouched
  Mat ok(2, 2);
  ok << 1.0, 0.2, 0.2, 1.0;
  CHECK((project_pd_spectral(ok, 1e-6, 3.0) - ok).cwiseAbs().maxCoeff() == 0.0);

  // idempotence
  SplitMix64 rng(5);
  Mat a(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = rng.next_gaussian();
  a = ((a + a.transpose()) / 2.0).eval();
  const Mat p1 = project_pd_spectral(a, 0.1, 1.5);
  const Mat p2 = project_pd_spectral(p1, 0.1, 1.5);
  CHECK((p1 - p2).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("project_pd_spectral is the Frobenius-nearest clamped matrix (2x2 grid)") {
  // brute-force oracle over matrices sharing the input's eigenvectors
  Mat th(2, 2);
  th << 3.0, 0.4, 0.4, -0.5;
  const double lo = 0.05, hi = 2.0;
  const Mat pr = project_pd_spectral(th, lo, hi);
  const EigResult e = sym_eig(th);
  double best = std::numeric_limits<double>::infinity();
  Mat best_m;
  const int grid = 400;
  for (int i = 0; i <= grid; ++i)
    for (int j = 0; j <= grid; ++j) {
      Vec ev(2);
      ev << lo + (hi - lo) * i / grid, lo + (hi - lo) * j / grid;
      const Mat cand = e.vectors * ev.asDiagonal() * e.vectors.transpose();
      const double dist = (cand - th).norm();
      if (dist < best) {
        best = dist;
        best_m = cand;
      }
    }
  CHECK((pr - best_m).cwiseAbs().maxCoeff() <= 2e-2);
  CHECK((pr - th).norm() <= best + 1e-12);
}

TEST_CASE("edge set bookkeeping") {
  const Mat chain = make_chain_precision(5, 0.3);
  const EdgeSet s = EdgeSet::off_diagonal_support(chain, 1e-12);
  CHECK(s.edges.size() == 4);
  CHECK(s.total_nonzeros() == 5 + 8);
  CHECK(s.max_row_nonzeros() == 3);
  CHECK(s.contains(0, 1));
  CHECK(s.contains(1, 0));
  CHECK_FALSE(s.contains(0, 2));
  CHECK_THROWS_AS(EdgeSet(3, {{0, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(EdgeSet(3, {{0, 1}, {1, 0}}), std::invalid_argument);
}

TEST_CASE("glasso_solve on a diagonal covariance decouples") {
  const int p = 6;
  Vec diag(p);
  diag << 1.0, 2.0, 0.5, 1.5, 0.8, 1.2;
  const Mat sigma = diag.asDiagonal();
  GlassoConfig cfg;
  cfg.kappa = 5.0;
  cfg.tol = 1e-12;
  const GlassoResult r =
      glasso_solve(sigma, RegularizerSpec::mcp(1e-4, 1.5), cfg, Mat::Identity(p, p));
  REQUIRE(r.status == SolveStatus::Converged);
  for (int j = 0; j < p; ++j)
    CHECK(r.theta(j, j) == Catch::Approx(1.0 / diag[j]).epsilon(2e-3));
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (i != j) CHECK(std::abs(r.theta(i, j)) <= 1e-6);
}

TEST_CASE("glasso_solve keeps iterates inside the spectral ball") {
  const int p = 16;
  const Mat theta_star = make_chain_precision(p, 0.3);
  const Mat sigma = sample_covariance(
      theta_star.llt().solve(Mat::Identity(p, p)), 600, 17);
  const auto spec = RegularizerSpec::mcp(0.08, 1.5);
  GlassoConfig cfg;  // kappa auto = sqrt(2 b) = sqrt(3)
  const GlassoResult r = glasso_solve(sigma, spec, cfg, Mat::Identity(p, p));
  const double kappa = cfg.resolve_kappa(spec);
  CHECK(kappa == Catch::Approx(std::sqrt(3.0)).margin(1e-12));
  const Vec ev = sym_eig(r.theta).values;
  CHECK(ev[p - 1] <= kappa + 1e-10);
  CHECK(ev[0] >= cfg.eps_pd - 1e-14);

  // objective monotone under the tracked stepsize
  for (size_t t = 1; t < r.objective_trace.size(); ++t)
    CHECK(r.objective_trace[t] <= r.objective_trace[t - 1] + 1e-10);
}

TEST_CASE("chain fixture with MCP recovers the exact support") {
  const int p = 32;
  const Mat theta_star = make_chain_precision(p, 0.3);
  const Mat sigma = sample_covariance(
      theta_star.llt().solve(Mat::Identity(p, p)), 4000, 4242);
  // lambda above the max entrywise noise of Sigma_hat (MCP shrinks nothing
  // past b lambda, so sub-lambda noise must be thresholded away)
  const double lambda = 2.5 * std::sqrt(std::log(static_cast<double>(p)) / 4000.0);
  GlassoConfig cfg;
  const GlassoResult r =
      glasso_solve(sigma, RegularizerSpec::mcp(lambda, 1.5), cfg, Mat::Identity(p, p));
  REQUIRE(r.status == SolveStatus::Converged);
  const EdgeSet truth = EdgeSet::off_diagonal_support(theta_star, 1e-12);
  const EdgeSet est = EdgeSet::off_diagonal_support(r.theta, 1e-4);
  CHECK(est == truth);
}

TEST_CASE("glasso oracle") {
  const int p = 8;
  SplitMix64 rng(23);
  Mat a(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) a(i, j) = rng.next_gaussian();
  Mat sigma = a * a.transpose() / p + 0.7 * Mat::Identity(p, p);
  sigma = ((sigma + sigma.transpose()) / 2.0).eval();

  // all edges: unconstrained MLE is sigma^{-1}
  std::vector<std::pair<int, int>> all;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) all.emplace_back(i, j);
  const Mat full = glasso_oracle(sigma, EdgeSet(p, all));
  const Mat direct = sigma.llt().solve(Mat::Identity(p, p));
  CHECK((full - direct).cwiseAbs().maxCoeff() <= 1e-7);

  // empty edge set: diagonal MLE
  const Mat diag = glasso_oracle(sigma, EdgeSet(p, {}));
  for (int j = 0; j < p; ++j)
    CHECK(diag(j, j) == Catch::Approx(1.0 / sigma(j, j)).margin(1e-10));
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (i != j) CHECK(diag(i, j) == 0.0);

  // fixed-point residual at the chain support
  const Mat chain = make_chain_precision(p, 0.4);
  const EdgeSet s = EdgeSet::off_diagonal_support(chain, 1e-12);
  const Mat oracle = glasso_oracle(sigma, s);
  const Mat W = oracle.llt().solve(Mat::Identity(p, p));
  double resid = 0.0;
  for (int j = 0; j < p; ++j) resid = std::max(resid, std::abs(sigma(j, j) - W(j, j)));
  for (const auto& [x, y] : s.edges) resid = std::max(resid, std::abs(sigma(x, y) - W(x, y)));
  CHECK(resid <= 1e-8);
}

TEST_CASE("oracle agreement on a fixture where the spectral bound is slack") {
  const int p = 32;
  const Mat theta_star = make_chain_precision(p, 0.3);  // lambda_max ~ 1.6 < sqrt(3)
  const Mat sigma = sample_covariance(
      theta_star.llt().solve(Mat::Identity(p, p)), 4000, 777);
  const double lambda = 2.5 * std::sqrt(std::log(static_cast<double>(p)) / 4000.0);
  GlassoConfig cfg;
  cfg.tol = 1e-12;
  const GlassoResult r =
      glasso_solve(sigma, RegularizerSpec::mcp(lambda, 1.5), cfg, Mat::Identity(p, p));
  const EdgeSet truth = EdgeSet::off_diagonal_support(theta_star, 1e-12);
  const Mat oracle = glasso_oracle(sigma, truth);
  CHECK((r.theta - oracle).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("glasso error norms and the chain inequality") {
  const int p = 10;
  const Mat theta_star = make_chain_precision(p, 0.35);
  const EdgeSet s = EdgeSet::off_diagonal_support(theta_star, 1e-12);

  const GlassoErrorNorms zero = glasso_error_norms(theta_star, theta_star, s);
  CHECK(zero.max_norm == 0.0);
  CHECK(zero.frobenius == 0.0);
  CHECK(zero.spectral == 0.0);
  CHECK(zero.chain_ok);

  // rank-one symmetric perturbation supported everywhere
  SplitMix64 rng(31);
  Vec v(p);
  for (int j = 0; j < p; ++j) v[j] = rng.next_gaussian();
  v.normalize();
  const Mat pert = theta_star + 0.05 * v * v.transpose();
  const GlassoErrorNorms n1 = glasso_error_norms(pert, theta_star, s);
  CHECK(n1.spectral == Catch::Approx(0.05).margin(1e-10));
  CHECK(n1.frobenius == Catch::Approx(0.05).margin(1e-10));
  CHECK(n1.max_norm == Catch::Approx(0.05 * v.cwiseAbs().maxCoeff() *
                                     v.cwiseAbs().maxCoeff()).margin(1e-10));

  // perturbation inside the support: d-chain applies
  Mat on_support = theta_star;
  on_support(0, 1) += 0.03;
  on_support(1, 0) += 0.03;
  on_support(2, 2) += 0.02;
  const GlassoErrorNorms n2 = glasso_error_norms(on_support, theta_star, s);
  CHECK(n2.chain_ok);
}

TEST_CASE("glasso objective is midpoint convex inside the auto spectral ball") {
  const int p = 8;
  const Mat theta_star = make_chain_precision(p, 0.3);
  const Mat sigma = sample_covariance(
      theta_star.llt().solve(Mat::Identity(p, p)), 2000, 99);
  const auto spec = RegularizerSpec::mcp(0.05, 1.5);
  const double kappa = std::sqrt(2.0 / amenability_params(spec).mu);
  const LossModel loss = LossModel::glasso(sigma);

  auto objective = [&](const Mat& th) {
    double pen = 0.0;
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j)
        if (i != j) pen += rho(spec, th(i, j));
    return loss.value(th) + pen;
  };

  SplitMix64 rng(123);
  for (int t = 0; t < 100; ++t) {
    Mat a(p, p), b(p, p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) {
        a(i, j) = rng.next_gaussian();
        b(i, j) = rng.next_gaussian();
      }
    a = project_pd_spectral(((a + a.transpose()) / 2.0).eval(), 0.05, kappa);
    b = project_pd_spectral(((b + b.transpose()) / 2.0).eval(), 0.05, kappa);
    const Mat mid = ((a + b) / 2.0).eval();
    CHECK(objective(mid) <= 0.5 * objective(a) + 0.5 * objective(b) + 1e-9);
  }
}

TEST_CASE("multistart uniqueness inside the convexity radius") {
  const int p = 12;
  const Mat theta_star = make_chain_precision(p, 0.3);
  const Mat sigma = sample_covariance(
      theta_star.llt().solve(Mat::Identity(p, p)), 1500, 2025);
  const auto spec = RegularizerSpec::mcp(0.07, 1.5);
  GlassoConfig cfg;
  cfg.tol = 1e-11;
  const double kappa = cfg.resolve_kappa(spec);

  std::vector<Mat> finals;
  SplitMix64 rng(321);
  for (int r = 0; r < 10; ++r) {
    Mat init(p, p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) init(i, j) = 0.3 * rng.next_gaussian();
    init = project_pd_spectral(((init + init.transpose()) / 2.0).eval(), 0.2, kappa);
    finals.push_back(glasso_solve(sigma, spec, cfg, init).theta);
  }
  double max_dist = 0.0;
  for (size_t i = 0; i < finals.size(); ++i)
    for (size_t j = i + 1; j < finals.size(); ++j)
      max_dist = std::max(max_dist, (finals[i] - finals[j]).cwiseAbs().maxCoeff());
  CHECK(max_dist <= 1e-4);
}

TEST_CASE("glasso input validation") {
  const Mat sigma = Mat::Identity(4, 4);
  GlassoConfig cfg;
  cfg.kappa = 2.0;
  CHECK_THROWS_AS(glasso_solve(sigma, RegularizerSpec::mcp(0.1, 1.5), cfg,
                               (3.0 * Mat::Identity(4, 4)).eval()),
                  std::invalid_argument);
  GlassoConfig bad;
  bad.kappa = 1e-9;
  bad.eps_pd = 1e-6;
  CHECK_THROWS_AS(glasso_solve(sigma, RegularizerSpec::mcp(0.1, 1.5), bad,
                               Mat::Identity(4, 4).eval()),
                  std::invalid_argument);
  // kappa auto requires mu > 0
  GlassoConfig autocfg;
  CHECK_THROWS_AS(glasso_solve(sigma, RegularizerSpec::l1(0.1), autocfg,
                               Mat::Identity(4, 4).eval()),
                  std::invalid_argument);
}

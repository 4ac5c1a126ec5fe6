#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ncreg/losses.hpp"
#include "ncreg/regularizers.hpp"
#include "ncreg/solver.hpp"

namespace ncreg {

struct GlassoConfig {
  double kappa = 0.0;   // spectral-norm radius; 0 means auto = sqrt(2/mu)
  double eps_pd = 1e-6; // eigenvalue floor keeping iterates strictly PD
  int max_iters = 20000;
  double tol = 1e-9;
  bool record_trace = false;

  double resolve_kappa(const RegularizerSpec& spec) const {
    if (kappa > 0.0) return kappa;
    const double mu = amenability_params(spec).mu;
    if (mu <= 0.0)
      throw std::invalid_argument("glasso: kappa=auto needs mu > 0 (got a convex penalty)");
    return std::sqrt(2.0 / mu);
  }
};

struct GlassoResult {
  Mat theta;
  std::vector<double> objective_trace;
  SolveStatus status = SolveStatus::MaxIters;
  int iterations = 0;
  double kkt_residual = std::numeric_limits<double>::quiet_NaN();
  double eta = 0.0;
};

// Off-diagonal support, stored as pairs (j, k) with j < k.
struct EdgeSet {
  int p = 0;
  std::vector<std::pair<int, int>> edges;

  EdgeSet() = default;
  EdgeSet(int p_, std::vector<std::pair<int, int>> e) : p(p_), edges(std::move(e)) {
    for (auto& [j, k] : edges) {
      if (j > k) std::swap(j, k);
      if (j == k || j < 0 || k >= p)
        throw std::invalid_argument("EdgeSet: bad edge");
    }
    std::sort(edges.begin(), edges.end());
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
      throw std::invalid_argument("EdgeSet: duplicate edge");
  }

  static EdgeSet off_diagonal_support(const Mat& theta, double tau = 0.0) {
    std::vector<std::pair<int, int>> e;
    for (int j = 0; j < theta.rows(); ++j)
      for (int k = j + 1; k < theta.cols(); ++k)
        if (std::abs(theta(j, k)) > tau) e.emplace_back(j, k);
    return EdgeSet(static_cast<int>(theta.rows()), std::move(e));
  }

  bool contains(int j, int k) const {
    if (j > k) std::swap(j, k);
    return std::binary_search(edges.begin(), edges.end(), std::make_pair(j, k));
  }

  // s: nonzeros of a matrix supported on edges + diagonal
  int total_nonzeros() const { return p + 2 * static_cast<int>(edges.size()); }

  // d: max nonzeros in any row (diagonal included)
  int max_row_nonzeros() const {
    std::vector<int> deg(static_cast<size_t>(p), 1);
    for (const auto& [j, k] : edges) {
      deg[static_cast<size_t>(j)]++;
      deg[static_cast<size_t>(k)]++;
    }
    return *std::max_element(deg.begin(), deg.end());
  }

  bool operator==(const EdgeSet& o) const { return p == o.p && edges == o.edges; }
};

// Eigendecompose, clamp the spectrum into [eps_pd, kappa], reconstruct.
inline Mat project_pd_spectral(const Mat& theta, double eps_pd, double kappa) {
  require_symmetric(theta, "project_pd_spectral");
  Mat sym = (theta + theta.transpose()) / 2.0;
  EigResult e = sym_eig(sym);
  bool touched = false;
  for (Eigen::Index j = 0; j < e.values.size(); ++j) {
    const double c = std::clamp(e.values[j], eps_pd, kappa);
    if (c != e.values[j]) touched = true;
    e.values[j] = c;
  }
  if (!touched) return sym;
  return e.vectors * e.values.asDiagonal() * e.vectors.transpose();
}

namespace detail {

inline double glasso_objective(const LossModel& loss, const RegularizerSpec& spec,
                               const Mat& theta) {
  double pen = 0.0;
  for (Eigen::Index j = 0; j < theta.rows(); ++j)
    for (Eigen::Index k = 0; k < theta.cols(); ++k)
      if (j != k) pen += rho(spec, theta(j, k));
  return loss.value(theta) + pen;
}

// Gradient step on Lbar = L - sum_{j != k} q(theta_jk), soft-threshold the
// off-diagonal entries, then clamp the spectrum.
inline Mat glasso_step(const LossModel& loss, const RegularizerSpec& spec,
                       const Mat& theta, double eta, double eps_pd, double kappa) {
  Mat g = loss.gradient(theta);
  for (Eigen::Index j = 0; j < g.rows(); ++j)
    for (Eigen::Index k = 0; k < g.cols(); ++k)
      if (j != k) g(j, k) -= q_prime(spec, theta(j, k));
  if (!g.allFinite()) throw std::runtime_error("glasso_solve: non-finite gradient");
  Mat w = theta - g / eta;
  const double thr = spec.lambda / eta;
  for (Eigen::Index j = 0; j < w.rows(); ++j)
    for (Eigen::Index k = 0; k < w.cols(); ++k)
      if (j != k) w(j, k) = soft_threshold(w(j, k), thr);
  return project_pd_spectral(w, eps_pd, kappa);
}

// Stepsize from local curvature: lambda_max of the Hessian theta^{-1} (x)
// theta^{-1} equals lambda_min(theta)^{-2}.
inline double glasso_eta(const Mat& theta, double mu) {
  const double lmin = sym_eig(theta).values[0];
  return 1.1 / (lmin * lmin) + mu;
}

}  // namespace detail

// Composite gradient descent in matrix space for
//   trace(Sigma theta) - log det theta + sum_{j != k} rho(theta_jk)
// over {theta PD symmetric, |||theta|||_2 <= kappa}. The curvature estimate
// is refreshed every 25 iterations and immediately after any objective
// increase (the local estimate can go stale when lambda_min drifts down).
inline GlassoResult glasso_solve(const Mat& Sigma_hat, const RegularizerSpec& spec,
                                 const GlassoConfig& cfg, const Mat& init) {
  LossModel loss = LossModel::glasso(Sigma_hat);
  const double kappa = cfg.resolve_kappa(spec);
  if (!(kappa > cfg.eps_pd)) throw std::invalid_argument("glasso: kappa <= eps_pd");
  require_symmetric(init, "glasso init");
  {
    const EigResult e = sym_eig(init);
    if (e.values[0] <= 0.0 || e.values[e.values.size() - 1] > kappa * (1.0 + 1e-10))
      throw std::invalid_argument("glasso: init must be PD with |||init|||_2 <= kappa");
  }
  const double mu = amenability_params(spec).mu;

  GlassoResult res;
  Mat theta = init;
  res.eta = detail::glasso_eta(theta, mu);
  double phi = detail::glasso_objective(loss, spec, theta);
  res.objective_trace.push_back(phi);

  for (int t = 1; t <= cfg.max_iters; ++t) {
    if (t % 25 == 0) res.eta = detail::glasso_eta(theta, mu);
    Mat next = detail::glasso_step(loss, spec, theta, res.eta, cfg.eps_pd, kappa);
    double phi_next = detail::glasso_objective(loss, spec, next);
    if (phi_next > phi + 1e-12 * std::max(1.0, std::abs(phi))) {
      res.eta = std::max(detail::glasso_eta(theta, mu), 2.0 * res.eta);
      next = detail::glasso_step(loss, spec, theta, res.eta, cfg.eps_pd, kappa);
      phi_next = detail::glasso_objective(loss, spec, next);
    }
    res.objective_trace.push_back(phi_next);
    res.iterations = t;
    const bool done =
        std::abs(phi_next - phi) <= cfg.tol * std::max(1.0, std::abs(phi)) &&
        (next - theta).cwiseAbs().maxCoeff() <= 10.0 * cfg.tol;
    theta = std::move(next);
    phi = phi_next;
    if (done) {
      res.status = SolveStatus::Converged;
      break;
    }
  }
  res.theta = theta;
  res.kkt_residual =
      (theta - detail::glasso_step(loss, spec, theta, res.eta, cfg.eps_pd, kappa))
          .cwiseAbs()
          .maxCoeff();
  return res;
}

// Restricted MLE: minimize trace(Sigma theta) - log det theta subject to
// supp(theta) <= S + diagonal, by damped Newton on the free entries. At the
// optimum Sigma and theta^{-1} agree on S + diagonal (fixed-point residual).
inline Mat glasso_oracle(const Mat& Sigma_hat, const EdgeSet& S,
                         double grad_tol = 1e-9, int max_iters = 100) {
  require_symmetric(Sigma_hat, "glasso_oracle");
  const int p = static_cast<int>(Sigma_hat.rows());
  if (S.p != p) throw std::invalid_argument("glasso_oracle: EdgeSet dimension mismatch");

  // free coordinates: p diagonal entries then the edges
  std::vector<std::pair<int, int>> coords;
  coords.reserve(static_cast<size_t>(p) + S.edges.size());
  for (int j = 0; j < p; ++j) coords.emplace_back(j, j);
  for (const auto& e : S.edges) coords.push_back(e);
  const Eigen::Index m = static_cast<Eigen::Index>(coords.size());

  Mat theta = Mat::Zero(p, p);
  for (int j = 0; j < p; ++j) {
    if (Sigma_hat(j, j) <= 0.0)
      throw std::runtime_error("glasso_oracle: nonpositive diagonal in Sigma");
    theta(j, j) = 1.0 / Sigma_hat(j, j);
  }

  auto objective = [&](const Mat& th) -> double {
    Eigen::LLT<Mat> llt(th);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    double logdet = 0.0;
    for (int j = 0; j < p; ++j) logdet += 2.0 * std::log(llt.matrixLLT()(j, j));
    return (Sigma_hat * th).trace() - logdet;
  };

  for (int it = 0; it < max_iters; ++it) {
    Eigen::LLT<Mat> llt(theta);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("glasso_oracle: iterate left the PD cone");
    const Mat W = llt.solve(Mat::Identity(p, p));  // theta^{-1}
    const Mat G = Sigma_hat - W;

    Vec grad(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto [a, b] = coords[static_cast<size_t>(i)];
      grad[i] = (a == b) ? G(a, a) : 2.0 * G(a, b);
    }
    double fixed_point = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto [a, b] = coords[static_cast<size_t>(i)];
      fixed_point = std::max(fixed_point, std::abs(G(a, b)));
    }
    if (fixed_point <= grad_tol) return theta;

    // restricted Hessian: H[i,i'] = mult_i * (W A_{i'} W)_{a_i b_i}
    Mat H(m, m);
    for (Eigen::Index c = 0; c < m; ++c) {
      const auto [k, l] = coords[static_cast<size_t>(c)];
      for (Eigen::Index r = 0; r < m; ++r) {
        const auto [a, b] = coords[static_cast<size_t>(r)];
        double v = W(a, k) * W(l, b);
        if (k != l) v += W(a, l) * W(k, b);
        if (a != b) v *= 2.0;
        H(r, c) = v;
      }
    }
    H = ((H + H.transpose()) / 2.0).eval();
    Eigen::LLT<Mat> hot(H);
    Vec step;
    if (hot.info() == Eigen::Success) {
      step = hot.solve(grad);
    } else {
      step = grad;  // gradient fallback
    }

    const double f0 = objective(theta);
    double s = 1.0;
    Mat cand;
    for (int bt = 0; bt < 60; ++bt) {
      cand = theta;
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto [a, b] = coords[static_cast<size_t>(i)];
        cand(a, b) -= s * step[i];
        if (a != b) cand(b, a) -= s * step[i];
      }
      if (objective(cand) < f0 + 1e-14 * std::abs(f0) + 1e-14) break;
      s *= 0.5;
    }
    theta = cand;
  }
  throw std::runtime_error("glasso_oracle: did not converge");
}

struct GlassoErrorNorms {
  double max_norm = 0.0;
  double frobenius = 0.0;
  double spectral = 0.0;
  bool chain_ok = false;
};

// The three error norms of theta_hat - theta_star, plus the norm-chain
// check: spectral <= frobenius <= sqrt(s) max, and additionally
// spectral <= d max when the difference is supported on S + diagonal.
inline GlassoErrorNorms glasso_error_norms(const Mat& theta_hat, const Mat& theta_star,
                                           const EdgeSet& S) {
  if (theta_hat.rows() != theta_star.rows() || theta_hat.cols() != theta_star.cols())
    throw std::invalid_argument("glasso_error_norms: dimension mismatch");
  GlassoErrorNorms out;
  const Mat d = theta_hat - theta_star;
  out.max_norm = d.cwiseAbs().maxCoeff();
  out.frobenius = d.norm();
  const Vec ev = sym_eig(((d + d.transpose()) / 2.0).eval()).values;
  out.spectral = std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1]));

  const double eps = 1e-12 * std::max(1.0, out.frobenius);
  bool ok = out.spectral <= out.frobenius + eps;
  ok = ok && out.frobenius <=
                 std::sqrt(static_cast<double>(S.total_nonzeros())) * out.max_norm + eps;
  bool contained = true;
  for (int j = 0; j < d.rows() && contained; ++j)
    for (int k = j + 1; k < d.cols(); ++k)
      if (std::abs(d(j, k)) > 1e-12 && !S.contains(j, k)) {
        contained = false;
        break;
      }
  if (contained)
    ok = ok && out.spectral <=
                   static_cast<double>(S.max_row_nonzeros()) * out.max_norm + eps;
  out.chain_ok = ok;
  return out;
}

}  // namespace ncreg

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ncreg/losses.hpp"
#include "ncreg/regularizers.hpp"
#include "ncreg/rng.hpp"

namespace ncreg {

struct SolverConfig {
  double eta = 0.0;  // 1/eta is the stepsize; 0 means auto
  double R = std::numeric_limits<double>::infinity();
  int max_iters = 20000;
  double tol = 1e-9;  // relative objective-change stopping rule
  bool record_trace = false;
};

enum class SolveStatus { Converged, MaxIters };

struct SolveResult {
  Vec beta;
  std::vector<double> objective_trace;
  std::vector<Vec> iterate_trace;  // populated only when record_trace is set
  SolveStatus status = SolveStatus::MaxIters;
  int iterations = 0;
  double kkt_residual = std::numeric_limits<double>::quiet_NaN();
  double eta = 0.0;  // stepsize parameter actually used

  bool converged() const { return status == SolveStatus::Converged; }
};

// Raised when a gradient turns non-finite mid-run; carries the last iterate.
class numerical_failure : public std::runtime_error {
 public:
  numerical_failure(const std::string& what, Vec iterate)
      : std::runtime_error(what), iterate_(std::move(iterate)) {}
  const Vec& iterate() const { return iterate_; }

 private:
  Vec iterate_;
};

// eta = 1.1 * (lambda_max estimate of the loss Hessian) + mu. The estimate
// uses 30 power iterations on the Hessian (quadratic losses) or on the Gram
// surrogate 0.25 X^T X / n (logistic, a global curvature upper bound).
inline double auto_stepsize(const LossModel& model, const RegularizerSpec& spec,
                            const Vec& probe) {
  const int p = model.dim();
  Vec v = Vec::Ones(p);
  for (int j = 0; j < p; ++j) v[j] += 1e-3 * static_cast<double>(j % 17);
  v.normalize();
  double lmax = 1.0;
  auto apply = [&](const Vec& x) -> Vec {
    if (model.is_quadratic()) return model.quadratic_gamma_matrix() * x;
    if (model.is_logistic()) {
      const auto& l = std::get<LogisticLoss>(model.variant());
      const double n = static_cast<double>(l.X.rows());
      return 0.25 * (l.X.transpose() * (l.X * x)) / n;
    }
    return model.hessian(probe) * x;
  };
  for (int it = 0; it < 30; ++it) {
    Vec w = apply(v);
    const double nw = w.norm();
    if (nw <= 0.0 || !std::isfinite(nw)) break;
    lmax = nw;
    v = w / nw;
  }
  return 1.1 * lmax + amenability_params(spec).mu;
}

namespace detail {

// One composite step: beta - grad(Lbar)/eta, soft-threshold at lambda/eta,
// then exact l1-ball projection. The composition is the constrained prox,
// since projecting a soft-thresholded point just shifts the threshold.
inline Vec composite_step(const LossModel& model, const RegularizerSpec& spec,
                          const Vec& beta, double eta, double R) {
  Vec g = model.gradient(beta) - q_prime_vec(spec, beta);
  if (!g.allFinite())
    throw numerical_failure("composite_gd: non-finite gradient", beta);
  Vec w = beta - g / eta;
  if (!w.allFinite())
    throw numerical_failure("composite_gd: non-finite iterate", beta);
  Vec next = soft_threshold(w, spec.lambda / eta);
  if (next.lpNorm<1>() > R) next = project_l1_ball(next, R);
  return next;
}

}  // namespace detail

inline SolveResult composite_gd(const LossModel& model, const RegularizerSpec& spec,
                                const SolverConfig& cfg, const Vec& init) {
  if (model.is_glasso())
    throw std::invalid_argument("composite_gd: use glasso_solve for the glasso loss");
  require_finite(init, "composite_gd init");
  if (init.size() != model.dim())
    throw std::invalid_argument("composite_gd: init dimension mismatch");
  if (init.lpNorm<1>() > cfg.R * (1.0 + 1e-12))
    throw std::invalid_argument("composite_gd: infeasible init (||init||_1 > R)");
  if (cfg.tol <= 0.0 || cfg.max_iters < 1)
    throw std::invalid_argument("composite_gd: bad config");

  SolveResult res;
  res.eta = (cfg.eta > 0.0) ? cfg.eta : auto_stepsize(model, spec, init);

  Vec beta = init;
  double phi = model.value(beta) + rho_sum(spec, beta);
  res.objective_trace.push_back(phi);
  if (cfg.record_trace) res.iterate_trace.push_back(beta);

  // Converged when the objective stagnates AND the prox-gradient step has
  // shrunk to 10 tol; the objective test alone leaves the fixed-point
  // residual near sqrt(tol).
  for (int t = 1; t <= cfg.max_iters; ++t) {
    Vec next = detail::composite_step(model, spec, beta, res.eta, cfg.R);
    const double phi_next = model.value(next) + rho_sum(spec, next);
    res.objective_trace.push_back(phi_next);
    if (cfg.record_trace) res.iterate_trace.push_back(next);
    res.iterations = t;
    const bool done =
        std::abs(phi_next - phi) <= cfg.tol * std::max(1.0, std::abs(phi)) &&
        (next - beta).cwiseAbs().maxCoeff() <= 10.0 * cfg.tol;
    beta = std::move(next);
    phi = phi_next;
    if (done) {
      res.status = SolveStatus::Converged;
      break;
    }
  }
  res.beta = beta;
  res.kkt_residual =
      (beta - detail::composite_step(model, spec, beta, res.eta, cfg.R))
          .cwiseAbs()
          .maxCoeff();
  return res;
}

inline Vec embed(const Vec& sub, const std::vector<int>& S, int p) {
  Vec full = Vec::Zero(p);
  for (size_t i = 0; i < S.size(); ++i) full[S[i]] = sub[static_cast<Eigen::Index>(i)];
  return full;
}

inline Vec extract(const Vec& full, const std::vector<int>& S) {
  Vec sub(static_cast<Eigen::Index>(S.size()));
  for (size_t i = 0; i < S.size(); ++i) sub[static_cast<Eigen::Index>(i)] = full[S[i]];
  return sub;
}

// Solve with all off-S coordinates pinned to zero; returns the embedded
// p-dimensional result.
inline SolveResult solve_restricted(const LossModel& model, const RegularizerSpec& spec,
                                    const SolverConfig& cfg, const std::vector<int>& S,
                                    const Vec* init_full = nullptr) {
  if (S.empty()) throw std::invalid_argument("solve_restricted: empty support");
  LossModel sub = model.restrict_to(S);
  Vec init = init_full ? extract(*init_full, S)
                       : Vec::Zero(static_cast<Eigen::Index>(S.size()));
  SolveResult res = composite_gd(sub, spec, cfg, init);
  res.beta = embed(res.beta, S, model.dim());
  if (cfg.record_trace)
    for (auto& it : res.iterate_trace) it = embed(it, S, model.dim());
  return res;
}

// Unpenalized minimizer of the loss restricted to S: a direct normal-equation
// solve for quadratic losses, damped Newton for logistic.
inline Vec oracle_estimator(const LossModel& model, const std::vector<int>& S) {
  if (S.empty()) throw std::invalid_argument("oracle_estimator: empty support");
  const int p = model.dim();
  LossModel sub = model.restrict_to(S);
  const Eigen::Index k = static_cast<Eigen::Index>(S.size());

  if (sub.is_quadratic()) {
    Vec bs;
    try {
      bs = spd_solve(sub.quadratic_gamma_matrix(), sub.quadratic_gamma_vector(),
                     "oracle_estimator");
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("oracle_estimator: degenerate design (") +
                               e.what() + ")");
    }
    return embed(bs, S, p);
  }

  Vec b = Vec::Zero(k);
  for (int it = 0; it < 200; ++it) {
    const Vec g = sub.gradient(b);
    if (g.cwiseAbs().maxCoeff() <= 1e-10) break;
    Mat h = sub.hessian(b);
    Vec step;
    try {
      step = spd_solve(h, g, "oracle_estimator");
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("oracle_estimator: degenerate design (") +
                               e.what() + ")");
    }
    double s = 1.0;
    const double f0 = sub.value(b);
    while (s > 1e-12 && sub.value((b - s * step).eval()) > f0) s *= 0.5;
    b -= s * step;
  }
  if (sub.gradient(b).cwiseAbs().maxCoeff() > 1e-8)
    throw std::runtime_error("oracle_estimator: Newton did not converge");
  return embed(b, S, p);
}

inline std::vector<int> support_of(const Vec& v, double tau = 1e-4) {
  std::vector<int> s;
  for (Eigen::Index j = 0; j < v.size(); ++j)
    if (std::abs(v[j]) > tau) s.push_back(static_cast<int>(j));
  return s;
}

struct Cluster {
  int representative = 0;        // index into runs
  std::vector<int> members;
  std::vector<int> support;      // support of the representative at 1e-4
};

struct MultistartResult {
  std::vector<SolveResult> runs;
  std::vector<Cluster> clusters;  // built at l2 distance 1e-3

  int cluster_count() const { return static_cast<int>(clusters.size()); }
};

// Uniform draw from the l1 ball of radius R: Dirichlet weights with random
// signs on the sphere, scaled by u^{1/p}.
inline Vec sample_l1_ball(SplitMix64& rng, int p, double R) {
  Vec e(p);
  for (int j = 0; j < p; ++j) e[j] = -std::log(rng.next_open());
  e /= e.sum();
  for (int j = 0; j < p; ++j)
    if (rng.next_u64() & 1ULL) e[j] = -e[j];
  const double r = R * std::pow(rng.next_open(), 1.0 / static_cast<double>(p));
  return r * e;
}

inline MultistartResult multistart(const LossModel& model, const RegularizerSpec& spec,
                                   const SolverConfig& cfg, int m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("multistart: m >= 1 required");
  if (std::isinf(cfg.R))
    throw std::invalid_argument("multistart: finite R required for init sampling");
  MultistartResult out;
  out.runs.reserve(static_cast<size_t>(m));
  for (int r = 0; r < m; ++r) {
    SplitMix64 rng(split_seed(seed, static_cast<std::uint64_t>(r)));
    const Vec init = sample_l1_ball(rng, model.dim(), cfg.R);
    out.runs.push_back(composite_gd(model, spec, cfg, init));
  }
  for (int r = 0; r < m; ++r) {
    bool placed = false;
    for (auto& c : out.clusters) {
      if ((out.runs[static_cast<size_t>(r)].beta -
           out.runs[static_cast<size_t>(c.representative)].beta)
              .norm() <= 1e-3) {
        c.members.push_back(r);
        placed = true;
        break;
      }
    }
    if (!placed) {
      Cluster c;
      c.representative = r;
      c.members = {r};
      c.support = support_of(out.runs[static_cast<size_t>(r)].beta);
      out.clusters.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace ncreg

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncreg/csv.hpp"

namespace ncreg {

inline void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite())
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

inline void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite())
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

inline bool is_symmetric(const Mat& m, double rtol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rtol * scale;
}

inline void require_symmetric(const Mat& m, const char* what) {
  require_finite(m, what);
  if (!is_symmetric(m))
    throw std::invalid_argument(std::string(what) + ": not symmetric");
}

inline double soft_threshold(double x, double tau) {
  if (x > tau) return x - tau;
  if (x < -tau) return x + tau;
  return 0.0;
}

// S_tau componentwise; sign(0) = 0 so zeros stay exactly zero.
inline Vec soft_threshold(const Vec& v, double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("soft_threshold: tau < 0");
  require_finite(v, "soft_threshold");
  Vec out(v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) out[j] = soft_threshold(v[j], tau);
  return out;
}

// Euclidean projection onto {u : ||u||_1 <= R}. Exact sort-based threshold:
// when v is outside the ball the projection is S_nu(v) for the unique nu > 0
// with ||S_nu(v)||_1 = R.
inline Vec project_l1_ball(const Vec& v, double R) {
  if (!(R > 0.0)) throw std::invalid_argument("project_l1_ball: R <= 0");
  require_finite(v, "project_l1_ball");
  if (std::isinf(R) || v.lpNorm<1>() <= R) return v;
  std::vector<double> a(static_cast<size_t>(v.size()));
  for (Eigen::Index j = 0; j < v.size(); ++j) a[static_cast<size_t>(j)] = std::abs(v[j]);
  std::sort(a.begin(), a.end(), std::greater<double>());
  double cum = 0.0, nu = 0.0;
  for (size_t j = 0; j < a.size(); ++j) {
    cum += a[j];
    const double cand = (cum - R) / static_cast<double>(j + 1);
    if (j + 1 == a.size() || a[j + 1] <= cand) {
      nu = cand;
      break;
    }
  }
  return soft_threshold(v, nu);
}

// Max absolute row sum.
inline double linf_operator_norm(const Mat& m) {
  require_finite(m, "linf_operator_norm");
  double best = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    best = std::max(best, m.row(i).cwiseAbs().sum());
  return best;
}

struct EigResult {
  Vec values;   // ascending
  Mat vectors;  // columns orthonormal, M = V diag(values) V^T
};

inline EigResult sym_eig(const Mat& m) {
  require_symmetric(m, "sym_eig");
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("sym_eig: eigendecomposition failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

// Central differences (f(x+h e_j) - f(x-h e_j)) / (2h).
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                       double h) {
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double xj = x[j];
    xp[j] = xj + h;
    const double fp = f(xp);
    xp[j] = xj - h;
    const double fm = f(xp);
    xp[j] = xj;
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Cholesky solve for SPD systems with a condition-number guard: the factor
// is rejected when lambda_max/lambda_min (power-iteration estimates) exceeds
// 1e12 or when the factorization itself fails.
class SpdSolver {
 public:
  explicit SpdSolver(const Mat& a, const char* what = "spd_solve") {
    require_symmetric(a, what);
    llt_.compute(a);
    if (llt_.info() != Eigen::Success)
      throw std::runtime_error(std::string(what) + ": matrix not positive definite");
    const Eigen::Index p = a.rows();
    Vec v = Vec::Ones(p);
    for (Eigen::Index j = 0; j < p; ++j) v[j] += 1e-3 * static_cast<double>(j % 17);
    v.normalize();
    double lmax = 0.0;
    for (int it = 0; it < 12; ++it) {
      Vec w = a * v;
      lmax = w.norm();
      if (lmax == 0.0) break;
      v = w / lmax;
    }
    Vec u = Vec::Ones(p);
    for (Eigen::Index j = 0; j < p; ++j) u[j] += 1e-3 * static_cast<double>((j + 5) % 13);
    u.normalize();
    double inv_norm = 1.0;
    for (int it = 0; it < 12; ++it) {
      Vec w = llt_.solve(u);
      inv_norm = w.norm();
      if (!std::isfinite(inv_norm) || inv_norm == 0.0) break;
      u = w / inv_norm;
    }
    const double cond = lmax * inv_norm;
    if (!std::isfinite(cond) || cond > 1e12)
      throw std::runtime_error(std::string(what) + ": condition number above 1e12");
  }

  Vec solve(const Vec& b) const { return llt_.solve(b); }
  Mat solve(const Mat& b) const { return llt_.solve(b); }

 private:
  Eigen::LLT<Mat> llt_;
};

inline Vec spd_solve(const Mat& a, const Vec& b, const char* what = "spd_solve") {
  return SpdSolver(a, what).solve(b);
}

inline Mat spd_inverse(const Mat& a, const char* what = "spd_inverse") {
  const Mat id = Mat::Identity(a.rows(), a.cols());
  return SpdSolver(a, what).solve(id);
}

// Least-squares line fit y ~ a + b t, plus R^2.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
};

inline LineFit fit_line(const std::vector<double>& t, const std::vector<double>& y) {
  const size_t n = t.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("fit_line: need >= 2 points");
  double st = 0, sy = 0;
  for (size_t i = 0; i < n; ++i) { st += t[i]; sy += y[i]; }
  const double mt = st / static_cast<double>(n), my = sy / static_cast<double>(n);
  double stt = 0, sty = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    stt += (t[i] - mt) * (t[i] - mt);
    sty += (t[i] - mt) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sty / stt;
  f.intercept = my - f.slope * mt;
  f.r2 = (syy > 0) ? (sty * sty) / (stt * syy) : 1.0;
  return f;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return (n % 2) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace ncreg

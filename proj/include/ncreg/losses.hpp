#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <variant>

#include "ncreg/numerics.hpp"

namespace ncreg {

// Overflow-safe psi(t) = log(1 + exp(t)) and derivatives.
inline double psi(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }
inline double psi_prime(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}
inline double psi_second(double t) {
  const double s = psi_prime(t);
  return s * (1.0 - s);
}

struct OlsLoss {
  Mat X;
  Vec y;
  Mat Gamma;   // X^T X / n
  Vec gamma;   // X^T y / n
};

// Quadratic loss 1/2 b^T Gamma b - gamma^T b; Gamma may be indefinite
// (errors-in-variables correction with n < p).
struct CorruptedQuadraticLoss {
  Mat Gamma;
  Vec gamma;
  int n = 0;  // 0 when unknown (directly constructed moments)
};

struct LogisticLoss {
  Mat X;
  Vec y;  // entries in {0, 1}
};

struct GlassoLoss {
  Mat Sigma_hat;  // symmetric PSD
};

class LossModel {
 public:
  using Variant =
      std::variant<OlsLoss, CorruptedQuadraticLoss, LogisticLoss, GlassoLoss>;

  static LossModel ols(Mat X, Vec y) {
    require_finite(X, "ols X");
    require_finite(y, "ols y");
    if (X.rows() != y.size()) throw std::invalid_argument("ols: X/y dimension mismatch");
    const double n = static_cast<double>(X.rows());
    Mat G = X.transpose() * X / n;
    G = ((G + G.transpose()) / 2.0).eval();
    Vec g = X.transpose() * y / n;
    return LossModel(OlsLoss{std::move(X), std::move(y), std::move(G), std::move(g)});
  }

  static LossModel corrupted_quadratic(Mat Gamma, Vec gamma, int n = 0) {
    require_symmetric(Gamma, "corrupted Gamma");
    require_finite(gamma, "corrupted gamma");
    if (Gamma.rows() != gamma.size())
      throw std::invalid_argument("corrupted: Gamma/gamma dimension mismatch");
    return LossModel(CorruptedQuadraticLoss{std::move(Gamma), std::move(gamma), n});
  }

  static LossModel logistic(Mat X, Vec y) {
    require_finite(X, "logistic X");
    require_finite(y, "logistic y");
    if (X.rows() != y.size())
      throw std::invalid_argument("logistic: X/y dimension mismatch");
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (y[i] != 0.0 && y[i] != 1.0)
        throw std::invalid_argument("logistic: y must be binary");
    return LossModel(LogisticLoss{std::move(X), std::move(y)});
  }

  static LossModel glasso(Mat Sigma_hat) {
    require_symmetric(Sigma_hat, "glasso Sigma");
    const Vec ev = sym_eig(Sigma_hat).values;
    if (ev[0] < -1e-8 * std::max(1.0, std::abs(ev[ev.size() - 1])))
      throw std::invalid_argument("glasso: Sigma not PSD");
    return LossModel(GlassoLoss{std::move(Sigma_hat)});
  }

  const Variant& variant() const { return v_; }
  bool is_glasso() const { return std::holds_alternative<GlassoLoss>(v_); }
  bool is_quadratic() const {
    return std::holds_alternative<OlsLoss>(v_) ||
           std::holds_alternative<CorruptedQuadraticLoss>(v_);
  }
  bool is_logistic() const { return std::holds_alternative<LogisticLoss>(v_); }

  int dim() const {
    if (const auto* o = std::get_if<OlsLoss>(&v_)) return static_cast<int>(o->X.cols());
    if (const auto* c = std::get_if<CorruptedQuadraticLoss>(&v_))
      return static_cast<int>(c->Gamma.rows());
    if (const auto* l = std::get_if<LogisticLoss>(&v_)) return static_cast<int>(l->X.cols());
    return static_cast<int>(std::get<GlassoLoss>(v_).Sigma_hat.rows());
  }

  // Sample size; 0 when the model was built from moments alone.
  int n_samples() const {
    if (const auto* o = std::get_if<OlsLoss>(&v_)) return static_cast<int>(o->X.rows());
    if (const auto* c = std::get_if<CorruptedQuadraticLoss>(&v_)) return c->n;
    if (const auto* l = std::get_if<LogisticLoss>(&v_)) return static_cast<int>(l->X.rows());
    return 0;
  }

  // ---- vector losses ----

  double value(const Vec& beta) const {
    if (const auto* o = std::get_if<OlsLoss>(&v_))
      return 0.5 * beta.dot(o->Gamma * beta) - o->gamma.dot(beta);
    if (const auto* c = std::get_if<CorruptedQuadraticLoss>(&v_))
      return 0.5 * beta.dot(c->Gamma * beta) - c->gamma.dot(beta);
    if (const auto* l = std::get_if<LogisticLoss>(&v_)) {
      const Vec t = l->X * beta;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < t.size(); ++i) acc += psi(t[i]) - l->y[i] * t[i];
      return acc / static_cast<double>(t.size());
    }
    throw std::invalid_argument("glasso loss takes a matrix argument");
  }

  Vec gradient(const Vec& beta) const {
    if (const auto* o = std::get_if<OlsLoss>(&v_)) return o->Gamma * beta - o->gamma;
    if (const auto* c = std::get_if<CorruptedQuadraticLoss>(&v_))
      return c->Gamma * beta - c->gamma;
    if (const auto* l = std::get_if<LogisticLoss>(&v_)) {
      const Vec t = l->X * beta;
      Vec w(t.size());
      for (Eigen::Index i = 0; i < t.size(); ++i) w[i] = psi_prime(t[i]) - l->y[i];
      return l->X.transpose() * w / static_cast<double>(t.size());
    }
    throw std::invalid_argument("glasso loss takes a matrix argument");
  }

  Mat hessian(const Vec& beta) const {
    if (const auto* o = std::get_if<OlsLoss>(&v_)) { (void)beta; return o->Gamma; }
    if (const auto* c = std::get_if<CorruptedQuadraticLoss>(&v_)) { (void)beta; return c->Gamma; }
    if (const auto* l = std::get_if<LogisticLoss>(&v_)) {
      const Vec t = l->X * beta;
      Vec w(t.size());
      for (Eigen::Index i = 0; i < t.size(); ++i) w[i] = psi_second(t[i]);
      Mat h = l->X.transpose() * w.asDiagonal() * l->X / static_cast<double>(t.size());
      return ((h + h.transpose()) / 2.0).eval();
    }
    throw std::invalid_argument("glasso hessian: use the matrix overload");
  }

  // ---- glasso (matrix) losses ----

  double value(const Mat& theta) const {
    const auto* g = std::get_if<GlassoLoss>(&v_);
    if (!g) throw std::invalid_argument("matrix argument requires the glasso loss");
    require_symmetric(theta, "glasso theta");
    Eigen::LLT<Mat> llt(theta);
    if (llt.info() != Eigen::Success)
      throw std::domain_error("glasso loss: theta not positive definite");
    double logdet = 0.0;
    const Mat& L = llt.matrixLLT();
    for (Eigen::Index j = 0; j < theta.rows(); ++j) logdet += 2.0 * std::log(L(j, j));
    return (g->Sigma_hat * theta).trace() - logdet;
  }

  Mat gradient(const Mat& theta) const {
    const auto* g = std::get_if<GlassoLoss>(&v_);
    if (!g) throw std::invalid_argument("matrix argument requires the glasso loss");
    require_symmetric(theta, "glasso theta");
    Eigen::LLT<Mat> llt(theta);
    if (llt.info() != Eigen::Success)
      throw std::domain_error("glasso gradient: theta not positive definite");
    const Mat inv = llt.solve(Mat::Identity(theta.rows(), theta.cols()));
    return g->Sigma_hat - ((inv + inv.transpose()) / 2.0);
  }

  // p^2 x p^2 Kronecker Hessian theta^{-1} (x) theta^{-1}; dense only, so
  // capped at p <= 32.
  Mat hessian(const Mat& theta) const {
    const auto* g = std::get_if<GlassoLoss>(&v_);
    if (!g) throw std::invalid_argument("matrix argument requires the glasso loss");
    const Eigen::Index p = theta.rows();
    if (p > 32)
      throw std::invalid_argument("glasso hessian: Kronecker form capped at p <= 32");
    require_symmetric(theta, "glasso theta");
    Eigen::LLT<Mat> llt(theta);
    if (llt.info() != Eigen::Success)
      throw std::domain_error("glasso hessian: theta not positive definite");
    const Mat inv = llt.solve(Mat::Identity(p, p));
    Mat h(p * p, p * p);
    for (Eigen::Index a = 0; a < p; ++a)
      for (Eigen::Index b = 0; b < p; ++b)
        h.block(a * p, b * p, p, p) = inv(a, b) * inv;
    return h;
  }

  // Dispatch Eigen expressions by compile-time shape so callers may pass
  // temporaries like Vec::Zero(p) or Mat::Identity(p, p) directly.
  template <typename Derived>
  double value(const Eigen::MatrixBase<Derived>& x) const {
    if constexpr (Derived::ColsAtCompileTime == 1) {
      const Vec v = x;
      return value(v);
    } else {
      const Mat m = x;
      return value(m);
    }
  }

  template <typename Derived>
  auto gradient(const Eigen::MatrixBase<Derived>& x) const {
    if constexpr (Derived::ColsAtCompileTime == 1) {
      const Vec v = x;
      return gradient(v);
    } else {
      const Mat m = x;
      return gradient(m);
    }
  }

  template <typename Derived>
  auto hessian(const Eigen::MatrixBase<Derived>& x) const {
    if constexpr (Derived::ColsAtCompileTime == 1) {
      const Vec v = x;
      return hessian(v);
    } else {
      const Mat m = x;
      return hessian(m);
    }
  }

  const Mat& quadratic_gamma_matrix() const {
    if (const auto* o = std::get_if<OlsLoss>(&v_)) return o->Gamma;
    if (const auto* c = std::get_if<CorruptedQuadraticLoss>(&v_)) return c->Gamma;
    throw std::invalid_argument("not a quadratic loss");
  }

  const Vec& quadratic_gamma_vector() const {
    if (const auto* o = std::get_if<OlsLoss>(&v_)) return o->gamma;
    if (const auto* c = std::get_if<CorruptedQuadraticLoss>(&v_)) return c->gamma;
    throw std::invalid_argument("not a quadratic loss");
  }

  // Restriction to a coordinate subset: same loss family on the subspace.
  LossModel restrict_to(const std::vector<int>& S) const {
    const int p = dim();
    for (int j : S)
      if (j < 0 || j >= p) throw std::invalid_argument("restrict_to: index out of range");
    const Eigen::Index k = static_cast<Eigen::Index>(S.size());
    if (const auto* o = std::get_if<OlsLoss>(&v_)) {
      Mat Xs(o->X.rows(), k);
      for (Eigen::Index j = 0; j < k; ++j) Xs.col(j) = o->X.col(S[static_cast<size_t>(j)]);
      return LossModel::ols(std::move(Xs), o->y);
    }
    if (const auto* c = std::get_if<CorruptedQuadraticLoss>(&v_)) {
      Mat Gs(k, k);
      Vec gs(k);
      for (Eigen::Index i = 0; i < k; ++i) {
        gs[i] = c->gamma[S[static_cast<size_t>(i)]];
        for (Eigen::Index j = 0; j < k; ++j)
          Gs(i, j) = c->Gamma(S[static_cast<size_t>(i)], S[static_cast<size_t>(j)]);
      }
      return LossModel::corrupted_quadratic(std::move(Gs), std::move(gs), c->n);
    }
    if (const auto* l = std::get_if<LogisticLoss>(&v_)) {
      Mat Xs(l->X.rows(), k);
      for (Eigen::Index j = 0; j < k; ++j) Xs.col(j) = l->X.col(S[static_cast<size_t>(j)]);
      return LossModel::logistic(std::move(Xs), l->y);
    }
    throw std::invalid_argument("restrict_to: not defined for the glasso loss");
  }

 private:
  explicit LossModel(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

// (Gamma_hat, gamma_hat) = (Z^T Z / n - Sigma_w, Z^T y / n); Gamma_hat is
// symmetrized and may be indefinite when n < p.
inline std::pair<Mat, Vec> corrected_moments(const Mat& Z, const Vec& y,
                                             const Mat& Sigma_w) {
  require_finite(Z, "corrected_moments Z");
  require_finite(y, "corrected_moments y");
  require_symmetric(Sigma_w, "corrected_moments Sigma_w");
  if (Z.rows() != y.size() || Z.cols() != Sigma_w.rows())
    throw std::invalid_argument("corrected_moments: dimension mismatch");
  const double n = static_cast<double>(Z.rows());
  Mat G = Z.transpose() * Z / n - Sigma_w;
  G = ((G + G.transpose()) / 2.0).eval();
  Vec g = Z.transpose() * y / n;
  return {std::move(G), std::move(g)};
}

// Q_hat = int_0^1 hessian(beta_star + t (beta_hat - beta_star)) dt by
// composite Simpson quadrature; exact (one Hessian call) for quadratic
// losses.
inline Mat integrated_hessian(const LossModel& model, const Vec& beta_star,
                              const Vec& beta_hat, int nodes = 33) {
  if (nodes < 3 || nodes % 2 == 0)
    throw std::invalid_argument("integrated_hessian: nodes must be odd and >= 3");
  if (model.is_quadratic()) return model.hessian(beta_star);
  const Vec d = beta_hat - beta_star;
  const double h = 1.0 / static_cast<double>(nodes - 1);
  Mat acc = Mat::Zero(model.dim(), model.dim());
  for (int i = 0; i < nodes; ++i) {
    const double t = static_cast<double>(i) * h;
    double w = (i == 0 || i == nodes - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * model.hessian((beta_star + t * d).eval());
  }
  return acc * (h / 3.0);
}

}  // namespace ncreg

#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "ncreg/losses.hpp"
#include "ncreg/numerics.hpp"
#include "ncreg/rng.hpp"

namespace ncreg {

enum class DesignFamily { M1, M2, Identity };

struct DesignSpec {
  DesignFamily family = DesignFamily::Identity;
  int p = 0;
  double theta = 0.0;   // M1/M2 parameter
  int k = 0;            // M1 block size
  double sigma_x = 1.0; // Identity scale

  static DesignSpec m1(int p, int k, double theta) { return {DesignFamily::M1, p, theta, k, 1.0}; }
  static DesignSpec m2(int p, double theta) { return {DesignFamily::M2, p, theta, 0, 1.0}; }
  static DesignSpec identity(int p, double sigma_x = 1.0) {
    return {DesignFamily::Identity, p, 0.0, 0, sigma_x};
  }

  std::string name() const {
    switch (family) {
      case DesignFamily::M1: return "m1";
      case DesignFamily::M2: return "m2";
      case DesignFamily::Identity: return "identity";
    }
    return "?";
  }
};

// Raw non-incoherent matrix: 1's on the diagonal, theta in the first k
// positions of row/column k+1. No PD check here; eigenvalues are
// 1 +- theta sqrt(k) regardless.
inline Mat make_m1_matrix(int p, int k, double theta) {
  if (k < 1 || p < k + 1) throw std::invalid_argument("M1: requires p >= k + 1");
  Mat m = Mat::Identity(p, p);
  for (int j = 0; j < k; ++j) {
    m(j, k) = theta;
    m(k, j) = theta;
  }
  return m;
}

// Spiked identity theta 11^T + (1 - theta) I.
inline Mat make_m2_matrix(int p, double theta) {
  return theta * Mat::Ones(p, p) + (1.0 - theta) * Mat::Identity(p, p);
}

inline Mat make_design(const DesignSpec& spec) {
  if (spec.p < 1) throw std::invalid_argument("make_design: p >= 1");
  switch (spec.family) {
    case DesignFamily::M1: {
      if (spec.theta * std::sqrt(static_cast<double>(spec.k)) >= 1.0)
        throw std::invalid_argument("make_design: M1 needs theta sqrt(k) < 1 for PD");
      return make_m1_matrix(spec.p, spec.k, spec.theta);
    }
    case DesignFamily::M2: {
      if (spec.theta < 0.0 || spec.theta >= 1.0)
        throw std::invalid_argument("make_design: M2 needs theta in [0, 1)");
      return make_m2_matrix(spec.p, spec.theta);
    }
    case DesignFamily::Identity:
      if (!(spec.sigma_x > 0.0)) throw std::invalid_argument("make_design: sigma_x > 0");
      return spec.sigma_x * spec.sigma_x * Mat::Identity(spec.p, spec.p);
  }
  throw std::invalid_argument("make_design: bad family");
}

enum class BetaPattern { FlatPositive, RandomSigns };

// k nonzeros of magnitude 1/sqrt(k) in the leading positions; unit l2 norm
// by construction.
inline Vec make_beta_star(int p, int k, BetaPattern pattern, std::uint64_t seed = 0) {
  if (k < 1 || k > p) throw std::invalid_argument("make_beta_star: need 1 <= k <= p");
  Vec b = Vec::Zero(p);
  const double v = 1.0 / std::sqrt(static_cast<double>(k));
  SplitMix64 rng(split_seed(seed, 0xB5u));
  for (int j = 0; j < k; ++j) {
    if (pattern == BetaPattern::FlatPositive)
      b[j] = v;
    else
      b[j] = (rng.next_u64() & 1ULL) ? v : -v;
  }
  return b;
}

struct TrialSpec {
  int p = 0;
  int k = 0;
  int n = 0;
  BetaPattern pattern = BetaPattern::FlatPositive;
  double sigma_eps = 0.1;
  double sigma_w = 0.0;  // 0 = clean covariates
  std::uint64_t seed = 0;
};

enum class ResponseKind { Linear, Logistic };

struct TrialData {
  Mat X;
  std::optional<Mat> Z;  // set when sigma_w > 0
  Vec y;
  Vec beta_star;
};

// Draw one trial. The stream order is pinned (X row-major, then the
// response noise, then W row-major) so outputs are bit-identical for a
// given (spec, seed) regardless of thread count.
inline TrialData sample_trial(const Mat& design, const TrialSpec& trial,
                              ResponseKind response) {
  require_symmetric(design, "sample_trial design");
  const int p = trial.p;
  if (design.rows() != p) throw std::invalid_argument("sample_trial: design/p mismatch");
  if (trial.n < 1 || trial.k > p) throw std::invalid_argument("sample_trial: bad dims");
  Eigen::LLT<Mat> llt(design);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("sample_trial: design not positive definite");
  const Mat L = llt.matrixL();

  TrialData out;
  out.beta_star = make_beta_star(p, trial.k, trial.pattern, trial.seed);

  SplitMix64 rng(split_seed(trial.seed, 0x71A1u));
  Mat G(trial.n, p);
  for (int i = 0; i < trial.n; ++i)
    for (int j = 0; j < p; ++j) G(i, j) = rng.next_gaussian();
  out.X = G * L.transpose();

  out.y.resize(trial.n);
  const Vec t = out.X * out.beta_star;
  if (response == ResponseKind::Linear) {
    for (int i = 0; i < trial.n; ++i) out.y[i] = t[i] + trial.sigma_eps * rng.next_gaussian();
  } else {
    for (int i = 0; i < trial.n; ++i)
      out.y[i] = (rng.next_double() < psi_prime(t[i])) ? 1.0 : 0.0;
  }

  if (trial.sigma_w > 0.0) {
    Mat W(trial.n, p);
    for (int i = 0; i < trial.n; ++i)
      for (int j = 0; j < p; ++j) W(i, j) = trial.sigma_w * rng.next_gaussian();
    out.Z = out.X + W;
  }
  return out;
}

// Tridiagonal precision matrix: unit diagonal, rho_off on the two adjacent
// off-diagonals. PD for |rho_off| < 1/2.
inline Mat make_chain_precision(int p, double rho_off) {
  if (p < 1) throw std::invalid_argument("make_chain_precision: p >= 1");
  if (std::abs(rho_off) >= 0.5)
    throw std::invalid_argument("make_chain_precision: |rho_off| < 0.5 required for PD");
  Mat m = Mat::Identity(p, p);
  for (int j = 0; j + 1 < p; ++j) {
    m(j, j + 1) = rho_off;
    m(j + 1, j) = rho_off;
  }
  return m;
}

}  // namespace ncreg

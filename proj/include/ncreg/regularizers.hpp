#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "ncreg/numerics.hpp"

namespace ncreg {

enum class PenaltyKind { L1, Scad, Mcp, Lsp };

inline const char* penalty_name(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::L1: return "l1";
    case PenaltyKind::Scad: return "scad";
    case PenaltyKind::Mcp: return "mcp";
    case PenaltyKind::Lsp: return "lsp";
  }
  return "?";
}

// One of l1 / scad(a) / mcp(b) / lsp with level lambda. lambda = 0 is
// accepted (unpenalized runs, e.g. restricted least squares).
struct RegularizerSpec {
  PenaltyKind kind = PenaltyKind::L1;
  double lambda = 0.0;
  double a = 0.0;  // SCAD only, a > 2
  double b = 0.0;  // MCP only, b > 0

  static RegularizerSpec l1(double lambda) {
    RegularizerSpec s{PenaltyKind::L1, lambda, 0, 0};
    s.validate();
    return s;
  }
  static RegularizerSpec scad(double lambda, double a = 2.5) {
    RegularizerSpec s{PenaltyKind::Scad, lambda, a, 0};
    s.validate();
    return s;
  }
  static RegularizerSpec mcp(double lambda, double b = 1.5) {
    RegularizerSpec s{PenaltyKind::Mcp, lambda, 0, b};
    s.validate();
    return s;
  }
  static RegularizerSpec lsp(double lambda) {
    RegularizerSpec s{PenaltyKind::Lsp, lambda, 0, 0};
    s.validate();
    return s;
  }

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw std::invalid_argument("regularizer: lambda must be >= 0");
    if (kind == PenaltyKind::Scad && !(a > 2.0))
      throw std::invalid_argument("scad: requires a > 2");
    if (kind == PenaltyKind::Mcp && !(b > 0.0))
      throw std::invalid_argument("mcp: requires b > 0");
  }

  RegularizerSpec with_lambda(double l) const {
    RegularizerSpec s = *this;
    s.lambda = l;
    s.validate();
    return s;
  }

  std::string name() const { return penalty_name(kind); }
};

inline RegularizerSpec regularizer_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const double lambda = j.value("lambda", 0.0);
  if (kind == "l1") return RegularizerSpec::l1(lambda);
  if (kind == "scad") return RegularizerSpec::scad(lambda, j.value("a", 2.5));
  if (kind == "mcp") return RegularizerSpec::mcp(lambda, j.value("b", 1.5));
  if (kind == "lsp") return RegularizerSpec::lsp(lambda);
  throw std::invalid_argument("unknown regularizer kind: " + kind);
}

inline nlohmann::json regularizer_to_json(const RegularizerSpec& s) {
  nlohmann::json j;
  j["kind"] = s.name();
  j["lambda"] = s.lambda;
  if (s.kind == PenaltyKind::Scad) j["a"] = s.a;
  if (s.kind == PenaltyKind::Mcp) j["b"] = s.b;
  return j;
}

// rho_lambda(t): the penalty value. MCP uses the closed-form antiderivative
// of its defining integrand.
inline double rho(const RegularizerSpec& s, double t) {
  const double lam = s.lambda;
  const double at = std::abs(t);
  switch (s.kind) {
    case PenaltyKind::L1:
      return lam * at;
    case PenaltyKind::Scad: {
      if (at <= lam) return lam * at;
      if (at <= s.a * lam)
        return -(at * at - 2.0 * s.a * lam * at + lam * lam) / (2.0 * (s.a - 1.0));
      return (s.a + 1.0) * lam * lam / 2.0;
    }
    case PenaltyKind::Mcp: {
      if (at <= s.b * lam) return lam * at - t * t / (2.0 * s.b);
      return lam * lam * s.b / 2.0;
    }
    case PenaltyKind::Lsp:
      return std::log1p(lam * at);
  }
  return 0.0;
}

enum class Side { Auto, FromPositive };

// rho'(t) for t != 0; at t = 0 the one-sided limit lambda is returned when
// requested, otherwise the point is rejected as nondifferentiable.
inline double rho_prime(const RegularizerSpec& s, double t, Side side = Side::Auto) {
  const double lam = s.lambda;
  if (t == 0.0) {
    if (side == Side::FromPositive) return lam;
    throw std::domain_error("rho_prime: nondifferentiable at t = 0");
  }
  const double sg = (t > 0.0) ? 1.0 : -1.0;
  const double at = std::abs(t);
  switch (s.kind) {
    case PenaltyKind::L1:
      return lam * sg;
    case PenaltyKind::Scad: {
      if (at <= lam) return lam * sg;
      if (at <= s.a * lam) return sg * (s.a * lam - at) / (s.a - 1.0);
      return 0.0;
    }
    case PenaltyKind::Mcp: {
      if (at <= s.b * lam) return sg * (lam - at / s.b);
      return 0.0;
    }
    case PenaltyKind::Lsp:
      return sg * lam / (1.0 + lam * at);
  }
  return 0.0;
}

// q_lambda(t) := lambda |t| - rho_lambda(t); q' is defined everywhere with
// q'(0) = 0, and equals lambda sign(t) beyond gamma lambda for SCAD/MCP.
inline double q_prime(const RegularizerSpec& s, double t) {
  if (t == 0.0) return 0.0;
  const double sg = (t > 0.0) ? 1.0 : -1.0;
  return s.lambda * sg - rho_prime(s, t);
}

inline double q_value(const RegularizerSpec& s, double t) {
  return s.lambda * std::abs(t) - rho(s, t);
}

struct Amenability {
  double mu = 0.0;
  std::optional<double> gamma;  // set only for (mu, gamma)-amenable penalties
};

inline Amenability amenability_params(const RegularizerSpec& s) {
  switch (s.kind) {
    case PenaltyKind::L1: return {0.0, std::nullopt};
    case PenaltyKind::Scad: return {1.0 / (s.a - 1.0), s.a};
    case PenaltyKind::Mcp: return {1.0 / s.b, s.b};
    case PenaltyKind::Lsp: return {s.lambda * s.lambda, std::nullopt};
  }
  return {0.0, std::nullopt};
}

// Vectorized penalty helpers used by the solver and PDW.
inline double rho_sum(const RegularizerSpec& s, const Vec& v) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < v.size(); ++j) acc += rho(s, v[j]);
  return acc;
}

inline Vec q_prime_vec(const RegularizerSpec& s, const Vec& v) {
  Vec out(v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) out[j] = q_prime(s, v[j]);
  return out;
}

// Discrete audit of the amenability conditions over a grid of nonzero points.
struct AmenabilityReport {
  bool symmetry = false;
  bool zero_at_zero = false;
  bool nondecreasing = false;        // on R+
  bool ratio_nonincreasing = false;  // rho(t)/t on R+
  bool derivative_bounded = false;   // |rho'| <= lambda
  bool weakly_convex = false;        // rho + mu/2 t^2 convex (second differences)
  bool q_prime_continuous = false;
  std::optional<bool> unbiased;      // rho' = 0 beyond gamma lambda; n/a otherwise

  bool all_pass() const {
    return symmetry && zero_at_zero && nondecreasing && ratio_nonincreasing &&
           derivative_bounded && weakly_convex && q_prime_continuous &&
           (!unbiased.has_value() || *unbiased);
  }
};

inline AmenabilityReport check_amenable(const RegularizerSpec& s,
                                        const std::vector<double>& grid) {
  AmenabilityReport r;
  const auto am = amenability_params(s);
  const double lam = s.lambda;

  r.zero_at_zero = (rho(s, 0.0) == 0.0);
  r.symmetry = true;
  r.derivative_bounded = true;
  for (double t : grid) {
    if (t == 0.0) continue;
    if (rho(s, t) != rho(s, -t)) r.symmetry = false;
    if (std::abs(rho_prime(s, t)) > lam + 1e-12) r.derivative_bounded = false;
  }

  std::vector<double> pos;
  for (double t : grid)
    if (t > 0.0) pos.push_back(t);
  std::sort(pos.begin(), pos.end());

  r.nondecreasing = true;
  r.ratio_nonincreasing = true;
  for (size_t i = 1; i < pos.size(); ++i) {
    if (rho(s, pos[i]) < rho(s, pos[i - 1]) - 1e-12) r.nondecreasing = false;
    const double ra = rho(s, pos[i - 1]) / pos[i - 1];
    const double rb = rho(s, pos[i]) / pos[i];
    if (rb > ra + 1e-12) r.ratio_nonincreasing = false;
  }

  // mu-weak convexity via second differences of rho + mu/2 t^2 on a uniform
  // refinement; tolerance absorbs the kinks of the piecewise-quadratic cases.
  r.weakly_convex = true;
  if (pos.size() >= 2) {
    const double lo = -pos.back(), hi = pos.back();
    const int m = 2001;
    const double h = (hi - lo) / (m - 1);
    auto g = [&](double t) { return rho(s, t) + 0.5 * am.mu * t * t; };
    for (int i = 1; i + 1 < m; ++i) {
      const double t = lo + i * h;
      if (g(t - h) - 2.0 * g(t) + g(t + h) < -1e-8) r.weakly_convex = false;
    }
  }

  r.q_prime_continuous = true;
  for (double t : grid) {
    const double eps = 1e-7 * std::max(1.0, std::abs(t));
    if (std::abs(q_prime(s, t + eps) - q_prime(s, t - eps)) >
        am.mu * 2.0 * eps + 1e-6)
      r.q_prime_continuous = false;
  }

  if (am.gamma.has_value()) {
    bool ok = true;
    const double edge = *am.gamma * lam;
    for (double t : grid) {
      if (std::abs(t) >= edge && t != 0.0 && rho_prime(s, t) != 0.0) ok = false;
    }
    r.unbiased = ok;
  }
  return r;
}

}  // namespace ncreg

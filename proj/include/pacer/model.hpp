#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pacer/numerics.hpp"

namespace pacer {

// Physiological and race constants, all per unit body mass, SI units.
struct RunnerParams {
  double tau;          // velocity decay time constant [s]
  double f_max;        // maximal propulsive force [m/s^2]
  double gamma_motor;  // motor activation rate [1/s]
  double e0;           // initial anaerobic energy [m^2/s^2]
  double v0;           // initial velocity [m/s]
  double alpha;        // motor-control weight [s^3]
  double distance;     // race distance [m]

  void validate() const {
    auto pos = [](double x, const char* name) {
      if (!(x > 0.0)) throw std::invalid_argument(std::string("RunnerParams: ") + name +
                                                  " must be strictly positive");
    };
    pos(tau, "tau");
    pos(f_max, "f_max");
    pos(gamma_motor, "gamma_motor");
    pos(e0, "e0");
    pos(v0, "v0");
    pos(alpha, "alpha");
    pos(distance, "distance");
    if (!(v0 < f_max * tau))
      throw std::invalid_argument("RunnerParams: v0 must be below the force-balance ceiling f_max*tau");
  }
};

enum class SigmaVariant { ThreePiece, FourPiece };

// Piecewise-linear aerobic power curve sigma(e).
struct SigmaProfile {
  SigmaVariant variant = SigmaVariant::ThreePiece;
  double sigma_bar;   // maximal aerobic power [W/kg]
  double sigma_f;     // end-race value [W/kg]
  double sigma_r;     // rest value [W/kg]
  double gamma1;      // critical-energy fraction [-]
  double gamma2;      // ramp-up energy [m^2/s^2]
  double gamma_plus = 0.0;  // FourPiece only: fraction where the bump starts [-]
  double bump = 0.8;        // FourPiece only: local-max excess over sigma_bar [W/kg]

  void validate(double e0) const {
    if (!(sigma_r <= sigma_f && sigma_f <= sigma_bar))
      throw std::invalid_argument("SigmaProfile: need sigma_r <= sigma_f <= sigma_bar");
    if (!(gamma1 > 0.0 && gamma1 < 1.0))
      throw std::invalid_argument("SigmaProfile: gamma1 must lie in (0, 1)");
    if (!(gamma2 > 0.0 && gamma2 < e0 * (1.0 - gamma1)))
      throw std::invalid_argument("SigmaProfile: gamma2 must lie in (0, e0*(1-gamma1))");
    if (variant == SigmaVariant::FourPiece) {
      if (!(gamma1 < gamma_plus && gamma_plus < 1.0 - gamma2 / e0))
        throw std::invalid_argument("SigmaProfile: gamma_plus must lie in (gamma1, 1 - gamma2/e0)");
      if (!(bump >= 0.0)) throw std::invalid_argument("SigmaProfile: bump must be non-negative");
    }
  }
};

// Aerobic power at remaining anaerobic energy e. Branch selection follows the
// model's conditions; continuous across all branch boundaries.
inline double sigma_eval(const SigmaProfile& s, double e, double e0) {
  if (!(e >= 0.0 && e <= e0))
    throw std::domain_error("sigma_eval: e outside [0, e0]");
  if (s.variant == SigmaVariant::ThreePiece) {
    if (e / e0 < s.gamma1)
      return s.sigma_bar * e / (e0 * s.gamma1) + s.sigma_f * (1.0 - e / (e0 * s.gamma1));
    if (e0 - e >= s.gamma2) return s.sigma_bar;
    return (s.sigma_bar - s.sigma_r) * (e0 - e) / s.gamma2 + s.sigma_r;
  }
  // FourPiece: plateau, then a local bump before the initial ramp.
  if (e / e0 < s.gamma1)
    return s.sigma_bar * e / (e0 * s.gamma1) + s.sigma_f * (1.0 - e / (e0 * s.gamma1));
  if (e / e0 <= s.gamma_plus) return s.sigma_bar;
  if (e0 - e >= s.gamma2)
    return s.sigma_bar + s.bump * (e - s.gamma_plus * e0) / (e0 - s.gamma2 - s.gamma_plus * e0);
  return (s.sigma_bar + s.bump - s.sigma_r) * (e0 - e) / s.gamma2 + s.sigma_r;
}

// Same curve written as a sum of hinge terms, with each hinge smoothed over a
// half-width eps (energy units). eps = 0 reproduces sigma_eval exactly. The
// smoothed curve is C2, which gradient-based solvers need.
inline double sigma_eval_smooth(const SigmaProfile& s, double e, double e0, double eps) {
  if (eps <= 0.0) return sigma_eval(s, e, e0);
  double value = s.sigma_bar;
  value -= (s.sigma_bar - s.sigma_f) / (s.gamma1 * e0) * smooth_hinge(s.gamma1 * e0 - e, eps);
  if (s.variant == SigmaVariant::ThreePiece) {
    value -= (s.sigma_bar - s.sigma_r) / s.gamma2 * smooth_hinge(e - (e0 - s.gamma2), eps);
  } else {
    double denom = e0 - s.gamma2 - s.gamma_plus * e0;
    value += s.bump / denom * smooth_hinge(e - s.gamma_plus * e0, eps);
    value -= ((s.sigma_bar + s.bump - s.sigma_r) / s.gamma2 + s.bump / denom) *
             smooth_hinge(e - (e0 - s.gamma2), eps);
  }
  return value;
}

inline double sigma_deriv_smooth(const SigmaProfile& s, double e, double e0, double eps) {
  double d = 0.0;
  d += (s.sigma_bar - s.sigma_f) / (s.gamma1 * e0) * smooth_hinge_deriv(s.gamma1 * e0 - e, eps);
  if (s.variant == SigmaVariant::ThreePiece) {
    d -= (s.sigma_bar - s.sigma_r) / s.gamma2 * smooth_hinge_deriv(e - (e0 - s.gamma2), eps);
  } else {
    double denom = e0 - s.gamma2 - s.gamma_plus * e0;
    d += s.bump / denom * smooth_hinge_deriv(e - s.gamma_plus * e0, eps);
    d -= ((s.sigma_bar + s.bump - s.sigma_r) / s.gamma2 + s.bump / denom) *
         smooth_hinge_deriv(e - (e0 - s.gamma2), eps);
  }
  return d;
}

struct SlopeSegment {
  double x_start;  // [m]
  double x_end;    // [m]
  double delta;    // gradient, positive uphill [-]
};

// Piecewise-constant track gradient beta(x); zero outside all segments.
// Segment membership uses half-open intervals [x_start, x_end).
struct SlopeProfile {
  std::vector<SlopeSegment> segments;
  double g = 9.81;  // gravity [m/s^2]

  void validate() const {
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (!(segments[i].x_start < segments[i].x_end))
        throw std::invalid_argument("SlopeProfile: segment must have x_start < x_end");
      if (i > 0 && segments[i].x_start < segments[i - 1].x_end)
        throw std::invalid_argument("SlopeProfile: segments must be ordered and non-overlapping");
    }
  }

  bool flat() const { return segments.empty(); }

  double beta(double x) const {
    for (const auto& seg : segments)
      if (x >= seg.x_start && x < seg.x_end) return seg.delta;
    return 0.0;
  }

  // C2 blend of width w at every segment edge; w = 0 gives the exact lookup.
  double beta_smooth(double x, double w) const {
    if (w <= 0.0) return beta(x);
    double value = 0.0;
    for (const auto& seg : segments) {
      double rise = smooth_hinge_deriv(x - seg.x_start, w);
      double fall = smooth_hinge_deriv(x - seg.x_end, w);
      value += seg.delta * (rise - fall);
    }
    return value;
  }

  double beta_smooth_deriv(double x, double w) const {
    if (w <= 0.0) return 0.0;
    auto ramp_deriv = [w](double u) {
      if (u <= -w || u >= w) return 0.0;
      double t = (u + w) / (2.0 * w);
      return 6.0 * t * (1.0 - t) / (2.0 * w);
    };
    double value = 0.0;
    for (const auto& seg : segments)
      value += seg.delta * (ramp_deriv(x - seg.x_start) - ramp_deriv(x - seg.x_end));
    return value;
  }
};

struct State {
  double x;  // position [m]
  double v;  // velocity [m/s]
  double f;  // propulsive force per mass [m/s^2]
  double e;  // anaerobic energy per mass [m^2/s^2]
};

// Controlled dynamics right-hand side:
//   x' = v
//   v' = -v/tau + f - g*beta(x)
//   f' = gamma*(u*(F_max - f) - f)
//   e' = sigma(e) - f*v
inline State dynamics_rhs(const State& s, double u, const RunnerParams& p, const SigmaProfile& sp,
                          const SlopeProfile& slope) {
  if (!std::isfinite(u)) throw std::invalid_argument("dynamics_rhs: non-finite control");
  State d;
  d.x = s.v;
  d.v = -s.v / p.tau + s.f - slope.g * slope.beta(s.x);
  d.f = p.gamma_motor * (u * (p.f_max - s.f) - s.f);
  d.e = sigma_eval(sp, s.e, p.e0) - s.f * s.v;
  return d;
}

}  // namespace pacer

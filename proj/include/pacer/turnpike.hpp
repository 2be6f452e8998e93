#pragma once

#include <cmath>
#include <stdexcept>

#include "pacer/model.hpp"
#include "pacer/numerics.hpp"

namespace pacer {

class InfeasibleRace : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything the closed-form three-phase approximation produces.
struct TurnpikeSolution {
  double v_bar_simple;  // mean velocity from the single-plateau balance [m/s]
  double v_bar;         // turnpike velocity, root of the three-phase balance [m/s]
  double f_bar;         // v_bar / tau [m/s^2]
  double u_bar;         // f_bar / (F_max - f_bar) [-]
  double t1;            // end of the start phase [s]
  double t2;            // start of the sprint phase [s]
  double t_f;           // predicted final time [s]
  double t_bar;         // log-form final time of the turnpike trajectory [s]
  double f0;            // initial force [m/s^2]
  double v_max;         // peak start velocity tau*f0 [m/s]
  double d1;            // distance covered in the start phase [m]
  double d_bar;         // distance covered on the turnpike [m]
  double dt_end;        // sprint duration [s]
  double lambda;        // sprint sigmoid shape parameter [-]
  double v_f;           // final velocity [m/s]
};

// Mean velocity when sigma is a single plateau at sigma_bar:
//   v = e0*tau/2d + sqrt(sigma_bar*tau + (e0*tau/2d)^2)
inline double mean_velocity_simple(const RunnerParams& p, double sigma_bar) {
  double a = p.e0 * p.tau / (2.0 * p.distance);
  return a + std::sqrt(sigma_bar * p.tau + a * a);
}

// Residual of the three-phase distance balance at trial velocity v:
// the race distance minus the sum of the distances implied by each
// sigma branch when v and f are held at their turnpike values.
inline double turnpike_distance_residual(double v, const RunnerParams& p, const SigmaProfile& s) {
  double q = v * v / p.tau;
  return v * s.gamma2 / (q - s.sigma_r) +
         v * (p.e0 * (1.0 - s.gamma1) - s.gamma2) / (q - s.sigma_bar) +
         v * p.e0 * s.gamma1 / (q - s.sigma_f) - p.distance;
}

// Turnpike velocity: the unique root of the distance balance in
// (sqrt(sigma_bar*tau), f_max*tau).
inline double turnpike_velocity(const RunnerParams& p, const SigmaProfile& s) {
  if (s.variant != SigmaVariant::ThreePiece)
    throw std::invalid_argument("turnpike_velocity: three-piece sigma required");
  double lo = std::sqrt(s.sigma_bar * p.tau) * (1.0 + 1e-9);
  double hi = p.f_max * p.tau * (1.0 - 1e-12);
  auto residual = [&](double v) { return turnpike_distance_residual(v, p, s); };
  // residual -> +inf as v -> sqrt(sigma_bar*tau)+; walk lo upward until finite
  double f_lo = residual(lo);
  for (int i = 0; i < 60 && !(std::isfinite(f_lo) && f_lo > 0.0); ++i) {
    lo = lo + (hi - lo) * 1e-6;
    f_lo = residual(lo);
  }
  double f_hi = residual(hi);
  if (!(f_lo > 0.0 && f_hi < 0.0))
    throw InfeasibleRace("turnpike_velocity: no sign change on the admissible bracket");
  return find_root(residual, Bracket{lo, hi, f_lo, f_hi}, 1e-12);
}

struct PhaseTimes {
  double t1;           // linearized start-phase duration [s]
  double central;      // turnpike duration estimate t2 - t1 [s]
  double final_phase;  // linearized sprint-phase duration [s]
  double t_bar;        // exact log-form total time of the turnpike trajectory [s]
};

inline PhaseTimes phase_times(const RunnerParams& p, const SigmaProfile& s, double v_bar) {
  double q = v_bar * v_bar / p.tau;
  if (!(q > s.sigma_bar))
    throw InfeasibleRace("phase_times: turnpike velocity below the aerobic balance");
  PhaseTimes pt;
  pt.t1 = s.gamma2 / (q - s.sigma_r);
  pt.central = (p.e0 * (1.0 - s.gamma1) - s.gamma2) / (q - s.sigma_bar);
  pt.final_phase = p.e0 * s.gamma1 / (q - s.sigma_f);
  double arg_r = 1.0 - (s.sigma_bar - s.sigma_r) / (q - s.sigma_r);
  double arg_f = 1.0 - (s.sigma_bar - s.sigma_f) / (q - s.sigma_f);
  if (!(arg_r > 0.0 && arg_f > 0.0))
    throw InfeasibleRace("phase_times: log argument not positive");
  pt.t_bar = pt.central - s.gamma2 / (s.sigma_bar - s.sigma_r) * std::log(arg_r) -
             p.e0 * s.gamma1 / (s.sigma_bar - s.sigma_f) * std::log(arg_f);
  return pt;
}

// Start-phase velocity when the force ramps linearly from f0 to f_bar over
// [0, t1]: v(t) = v0*exp(-t/tau) + tau*f(t)*(1 - exp(-t/tau)).
inline double start_phase_velocity(double t, const RunnerParams& p, double f0, double v_bar,
                                   double t1) {
  double f_bar = v_bar / p.tau;
  double f = f0 + t / t1 * (f_bar - f0);
  double decay = std::exp(-t / p.tau);
  return p.v0 * decay + p.tau * f * (1.0 - decay);
}

namespace detail {

// Left-hand side of the start-phase energy balance at trial initial force f0:
// integral of f*v*exp(A*(t - t1)) over the start phase, A = (sigma_bar - sigma_r)/gamma2.
inline double start_energy_integral(double f0, const RunnerParams& p, const SigmaProfile& s,
                                    double v_bar, double t1) {
  double A = (s.sigma_bar - s.sigma_r) / s.gamma2;
  double f_bar = v_bar / p.tau;
  auto integrand = [&](double t) {
    double f = f0 + t / t1 * (f_bar - f0);
    return f * start_phase_velocity(t, p, f0, v_bar, t1) * std::exp(A * (t - t1));
  };
  return integrate(integrand, 0.0, t1);
}

}  // namespace detail

// Initial force f0 closing the start-phase energy budget.
inline double initial_force(const RunnerParams& p, const SigmaProfile& s, double v_bar,
                            double t1) {
  if (!(t1 > 0.0)) throw std::invalid_argument("initial_force: t1 must be positive");
  double A = (s.sigma_bar - s.sigma_r) / s.gamma2;
  double rhs = s.gamma2 +
               s.sigma_r * s.gamma2 / (s.sigma_bar - s.sigma_r) * (1.0 - std::exp(-A * t1));
  auto residual = [&](double f0) {
    return detail::start_energy_integral(f0, p, s, v_bar, t1) - rhs;
  };
  double lo = v_bar / p.tau * (1.0 + 1e-9);
  double hi = p.f_max * 1.5;
  try {
    return find_root(residual, lo, hi, 1e-11);
  } catch (const std::invalid_argument&) {
    // widen once
    try {
      return find_root(residual, v_bar / p.tau * 0.5, p.f_max * 3.0, 1e-11);
    } catch (const std::invalid_argument&) {
      throw InfeasibleRace("initial_force: no admissible root");
    }
  }
}

inline double start_phase_distance(const RunnerParams& p, double f0, double v_bar, double t1) {
  return integrate([&](double t) { return start_phase_velocity(t, p, f0, v_bar, t1); }, 0.0, t1);
}

// Sprint force sigmoid, anchored at f_bar for t = 0 and saturating at f_max.
inline double sprint_force(double t, double f_max, double f_bar, double gamma_motor,
                           double lambda) {
  return f_max / (1.0 + (f_max / f_bar - 1.0) * std::exp(-gamma_motor * lambda * f_max * t));
}

// Which linear sigma branch supplies the decay constant of the sprint energy
// balance. EndPhase uses (sigma_bar - sigma_f)/(gamma1*e0); the alternative
// Startup constant (sigma_bar - sigma_r)/(gamma1*e0) is kept selectable.
enum class SprintEnergyConstant { EndPhase, Startup };

// Sprint shape parameter lambda: the sigmoid force must spend exactly the
// remaining anaerobic energy gamma1*e0 plus the aerobic supply over dt_end.
inline double sprint_lambda(const RunnerParams& p, const SigmaProfile& s, double f_bar,
                            double dt_end,
                            SprintEnergyConstant which = SprintEnergyConstant::EndPhase) {
  double A = (which == SprintEnergyConstant::EndPhase)
                 ? (s.sigma_bar - s.sigma_f) / (s.gamma1 * p.e0)
                 : (s.sigma_bar - s.sigma_r) / (s.gamma1 * p.e0);
  double rhs = p.tau * s.sigma_f / A * (1.0 - std::exp(-A * dt_end)) + p.tau * s.gamma1 * p.e0;
  auto residual = [&](double lambda) {
    auto integrand = [&](double t) {
      double v = p.tau * sprint_force(t, p.f_max, f_bar, p.gamma_motor, lambda);
      return v * v * std::exp(-A * t);
    };
    return integrate(integrand, 0.0, dt_end) - rhs;
  };
  try {
    return find_root(residual, 1e-9, 20.0, 1e-11);
  } catch (const std::invalid_argument&) {
    throw InfeasibleRace("sprint_lambda: no positive root");
  }
}

// The full three-phase velocity profile.
class TurnpikeProfile {
 public:
  TurnpikeProfile(const TurnpikeSolution& sol, const RunnerParams& p)
      : sol_(sol), params_(p) {}

  const TurnpikeSolution& solution() const { return sol_; }

  // 1 = start, 2 = turnpike, 3 = sprint
  int phase(double t) const {
    if (t < sol_.t1) return 1;
    if (t < sol_.t2) return 2;
    return 3;
  }

  double velocity(double t) const {
    switch (phase(t)) {
      case 1:
        return start_phase_velocity(t, params_, sol_.f0, sol_.v_bar, sol_.t1);
      case 2:
        return sol_.v_bar;
      default:
        return params_.tau * force(t);
    }
  }

  double force(double t) const {
    switch (phase(t)) {
      case 1:
        return sol_.f0 + t / sol_.t1 * (sol_.f_bar - sol_.f0);
      case 2:
        return sol_.f_bar;
      default:
        return sprint_force(t - sol_.t2, params_.f_max, sol_.f_bar, params_.gamma_motor,
                            sol_.lambda);
    }
  }

  double force_rate(double t) const {
    switch (phase(t)) {
      case 1:
        return (sol_.f_bar - sol_.f0) / sol_.t1;
      case 2:
        return 0.0;
      default: {
        double f = force(t);
        double k = params_.gamma_motor * sol_.lambda * params_.f_max;
        return k * f * (1.0 - f / params_.f_max);
      }
    }
  }

  // Neural drive recovered from the force dynamics.
  double control(double t) const {
    double f = force(t);
    return (force_rate(t) / params_.gamma_motor + f) / (params_.f_max - f);
  }

 private:
  TurnpikeSolution sol_;
  RunnerParams params_;
};

// Runs the whole chain: turnpike velocity, phase times, initial force, sprint
// duration and shape, then the central-phase correction that closes the total
// distance exactly.
inline TurnpikeProfile assemble_profile(const RunnerParams& p, const SigmaProfile& s,
                                        SprintEnergyConstant which = SprintEnergyConstant::EndPhase) {
  p.validate();
  s.validate(p.e0);
  if (s.variant != SigmaVariant::ThreePiece)
    throw std::invalid_argument("assemble_profile: three-piece sigma required");

  TurnpikeSolution sol{};
  sol.v_bar_simple = mean_velocity_simple(p, s.sigma_bar);
  sol.v_bar = turnpike_velocity(p, s);
  sol.f_bar = sol.v_bar / p.tau;
  sol.u_bar = sol.f_bar / (p.f_max - sol.f_bar);

  PhaseTimes pt = phase_times(p, s, sol.v_bar);
  sol.t1 = pt.t1;
  sol.t_bar = pt.t_bar;

  sol.f0 = initial_force(p, s, sol.v_bar, sol.t1);
  sol.v_max = p.tau * sol.f0;
  sol.d1 = start_phase_distance(p, sol.f0, sol.v_bar, sol.t1);

  sol.d_bar = sol.v_bar * pt.central;
  sol.dt_end = (p.distance - sol.d1 - sol.d_bar) / sol.v_bar;
  if (!(sol.dt_end > 0.0)) throw InfeasibleRace("assemble_profile: non-positive sprint duration");

  sol.lambda = sprint_lambda(p, s, sol.f_bar, sol.dt_end, which);

  double sprint_distance = integrate(
      [&](double t) {
        return p.tau * sprint_force(t, p.f_max, sol.f_bar, p.gamma_motor, sol.lambda);
      },
      0.0, sol.dt_end);
  sol.t2 = sol.t1 + (p.distance - sol.d1 - sprint_distance) / sol.v_bar;
  sol.t_f = sol.t2 + sol.dt_end;
  sol.v_f = p.tau * sprint_force(sol.dt_end, p.f_max, sol.f_bar, p.gamma_motor, sol.lambda);
  return TurnpikeProfile(sol, p);
}

// Slope-adjusted turnpike velocity for a constant gradient delta over the
// whole race; delta > 0 is uphill.
inline double turnpike_with_slope(const RunnerParams& p, const SigmaProfile& s, double delta,
                                  double g = 9.81) {
  double e_eff = p.e0 - p.distance * g * delta;
  double a = e_eff * p.tau / (2.0 * p.distance);
  double arg = s.sigma_bar * p.tau + a * a;
  if (!(arg >= 0.0)) throw InfeasibleRace("turnpike_with_slope: no real root");
  return a + std::sqrt(arg);
}

}  // namespace pacer

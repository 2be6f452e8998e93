#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pacer/model.hpp"
#include "pacer/ocp.hpp"
#include "pacer/turnpike.hpp"

namespace pacer {

// Conversion from oxygen uptake [ml/min/kg] to aerobic power [W/kg]:
// one milliliter of oxygen yields about 20 J of mechanical-equivalent power,
// so a 66 ml/min/kg athlete sustains sigma_bar = 22 W/kg.
inline double vo2_to_sigma(double vo2max) {
  if (!(vo2max >= 0.0)) throw std::invalid_argument("vo2_to_sigma: negative uptake");
  return vo2max / 60.0 * 20.0;
}

// Time-stamped velocity samples covering one race.
struct VelocitySeries {
  std::vector<double> t;  // [s], strictly increasing
  std::vector<double> v;  // [m/s], positive
  double distance;        // [m]

  void validate() const {
    if (t.size() != v.size() || t.size() < 8)
      throw std::invalid_argument("VelocitySeries: need matching t/v arrays with >= 8 samples");
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i > 0 && !(t[i] > t[i - 1]))
        throw std::invalid_argument("VelocitySeries: times must be strictly increasing");
      if (!(v[i] > 0.0)) throw std::invalid_argument("VelocitySeries: velocities must be positive");
    }
    double integral = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i)
      integral += 0.5 * (v[i] + v[i - 1]) * (t[i] - t[i - 1]);
    if (std::abs(integral - distance) > 0.02 * distance)
      throw std::invalid_argument("VelocitySeries: integrated distance off by more than 2%");
  }
};

class NoPlateau : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FittedParams {
  double tau = 0.0;
  double v_max = 0.0;
  double e0 = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double residual = 0.0;  // RMS velocity error over the fitted segment [m/s]
  bool tau_identifiable = true;
  bool gammas_identifiable = true;
};

struct InferOptions {
  double sigma_f = -1.0;  // default: 10% below sigma_bar
  double sigma_r = 6.0;
  double default_tau = 0.932;      // used when no start transient is present
  double plateau_band = 0.03;      // relative band for plateau membership
  double edge_band = 0.003;        // tighter band for phase-boundary detection
  double smooth_halfwidth = 1.5;   // moving-average halfwidth [s]
  double min_plateau_fraction = 0.30;
};

namespace detail {

inline std::vector<double> moving_average(const std::vector<double>& t,
                                          const std::vector<double>& v, double halfwidth) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double sum = 0.0;
    int count = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (std::abs(t[j] - t[i]) <= halfwidth) {
        sum += v[j];
        ++count;
      }
    }
    out[i] = sum / count;
  }
  return out;
}

inline double median(std::vector<double> vals) {
  std::sort(vals.begin(), vals.end());
  std::size_t n = vals.size();
  return n % 2 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
}

struct PlateauWindow {
  std::size_t first, last;  // inclusive sample range
  double level;             // plateau velocity
};

inline PlateauWindow detect_plateau(const std::vector<double>& t, const std::vector<double>& vs,
                                    double band, double min_fraction) {
  double med = median(vs);
  std::size_t best_first = 0, best_last = 0;
  double best_span = -1.0;
  std::size_t i = 0;
  while (i < vs.size()) {
    if (std::abs(vs[i] - med) <= band * med) {
      std::size_t j = i;
      while (j + 1 < vs.size() && std::abs(vs[j + 1] - med) <= band * med) ++j;
      double span = t[j] - t[i];
      if (span > best_span) {
        best_span = span;
        best_first = i;
        best_last = j;
      }
      i = j + 1;
    } else {
      ++i;
    }
  }
  double total = t.back() - t.front();
  if (best_span < min_fraction * total)
    throw NoPlateau("infer: plateau covers less than the required fraction of the race");
  std::vector<double> window(vs.begin() + best_first, vs.begin() + best_last + 1);
  return PlateauWindow{best_first, best_last, median(window)};
}

// Least-squares fit of (tau, v_max) in the start-phase closed form, with t1
// and the plateau level fixed. Linear in v_max for each trial tau.
inline void fit_start_segment(const std::vector<double>& t, const std::vector<double>& v,
                              std::size_t n_fit, double v0, double v_bar, double t1,
                              double& tau_out, double& vmax_out) {
  auto sse_for_tau = [&](double tau, double& vmax) {
    double a11 = 0.0, b1 = 0.0;
    for (std::size_t i = 0; i < n_fit; ++i) {
      double E = std::exp(-t[i] / tau);
      double basis = (1.0 - E) * (1.0 - t[i] / t1);
      double fixed = v0 * E + (1.0 - E) * (t[i] / t1) * v_bar;
      a11 += basis * basis;
      b1 += basis * (v[i] - fixed);
    }
    vmax = a11 > 0.0 ? b1 / a11 : v_bar;
    double sse = 0.0;
    for (std::size_t i = 0; i < n_fit; ++i) {
      double E = std::exp(-t[i] / tau);
      double model = v0 * E + (vmax + (t[i] / t1) * (v_bar - vmax)) * (1.0 - E);
      sse += (model - v[i]) * (model - v[i]);
    }
    return sse;
  };
  // coarse log-grid then golden-section refinement
  double best_tau = 1.0, best_sse = std::numeric_limits<double>::infinity();
  for (double tau = 0.2; tau <= 3.01; tau *= 1.15) {
    double vm;
    double sse = sse_for_tau(tau, vm);
    if (sse < best_sse) {
      best_sse = sse;
      best_tau = tau;
    }
  }
  double lo = best_tau / 1.15, hi = best_tau * 1.15;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
  double vm;
  double fc = sse_for_tau(c, vm), fd = sse_for_tau(d, vm);
  for (int it = 0; it < 60; ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = sse_for_tau(c, vm);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = sse_for_tau(d, vm);
    }
  }
  tau_out = 0.5 * (lo + hi);
  sse_for_tau(tau_out, vmax_out);
}

}  // namespace detail

// Inverts the three-phase velocity shape: plateau level gives the turnpike
// velocity, the start transient gives tau and v_max, the phase durations give
// gamma2 and gamma1*e0, and the three-phase distance balance gives e0.
inline FittedParams infer(const VelocitySeries& series, double sigma_bar,
                          InferOptions opts = {}) {
  series.validate();
  if (opts.sigma_f < 0.0) opts.sigma_f = 0.9 * sigma_bar;
  const auto& t = series.t;
  std::vector<double> vs = detail::moving_average(t, series.v, opts.smooth_halfwidth);

  auto plateau = detail::detect_plateau(t, vs, opts.plateau_band, opts.min_plateau_fraction);
  const double v_bar = plateau.level;

  FittedParams out;

  // start transient: first local max of the smoothed series before the plateau
  std::size_t peak = 0;
  bool have_peak = false;
  for (std::size_t i = 1; i <= plateau.first && i + 1 < vs.size(); ++i) {
    if (vs[i] >= vs[i - 1] && vs[i] > vs[i + 1] && vs[i] > v_bar * (1.0 + opts.plateau_band)) {
      peak = i;
      have_peak = true;
      break;
    }
  }

  if (!have_peak) {
    // plateau-only input: tau and the gammas are not identifiable
    out.tau = opts.default_tau;
    out.tau_identifiable = false;
    out.gammas_identifiable = false;
    out.gamma1 = std::numeric_limits<double>::quiet_NaN();
    out.gamma2 = std::numeric_limits<double>::quiet_NaN();
    out.v_max = v_bar;
    out.e0 = series.distance * (v_bar * v_bar / out.tau - sigma_bar) / v_bar;
    double sse = 0.0;
    for (double x : vs) sse += (x - v_bar) * (x - v_bar);
    out.residual = std::sqrt(sse / vs.size());
    return out;
  }

  // t1: first entry into the tight band around the plateau after the peak
  std::size_t i1 = plateau.first;
  for (std::size_t i = peak; i < vs.size(); ++i) {
    if (std::abs(vs[i] - v_bar) <= opts.edge_band * v_bar) {
      i1 = i;
      break;
    }
  }
  double t1 = t[i1];

  // t2: last exit from the tight band before the finish
  std::size_t i2 = plateau.last;
  for (std::size_t i = vs.size(); i-- > i1 + 1;) {
    if (std::abs(vs[i] - v_bar) <= opts.edge_band * v_bar) {
      i2 = i;
      break;
    }
  }
  double final_duration = t.back() - t[i2];

  detail::fit_start_segment(t, series.v, peak + 1, series.v.front(), v_bar, t1, out.tau,
                            out.v_max);
  out.v_max = std::max(out.v_max, v_bar);

  double q = v_bar * v_bar / out.tau;
  if (!(q > sigma_bar))
    throw NoPlateau("infer: plateau velocity inconsistent with the aerobic ceiling");
  double D_r = q - opts.sigma_r, D_bar = q - sigma_bar, D_f = q - opts.sigma_f;
  out.gamma2 = t1 * D_r;
  double gamma1_e0 = final_duration * D_f;

  // three-phase distance balance solved for e0
  out.e0 = D_bar * (series.distance / v_bar - out.gamma2 / D_r - gamma1_e0 / D_f) + gamma1_e0 +
           out.gamma2;
  if (!(out.e0 > 0.0)) throw NoPlateau("infer: inferred energy not positive");
  out.gamma1 = gamma1_e0 / out.e0;

  // residual over start + plateau segments against the fitted shape
  double sse = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i <= i2; ++i) {
    double model;
    if (t[i] <= t1) {
      double E = std::exp(-t[i] / out.tau);
      model = series.v.front() * E +
              (out.v_max + (t[i] / t1) * (v_bar - out.v_max)) * (1.0 - E);
    } else {
      model = v_bar;
    }
    sse += (model - series.v[i]) * (model - series.v[i]);
    ++count;
  }
  out.residual = std::sqrt(sse / count);
  return out;
}

struct RefineOptions {
  double f_max = 8.0;
  double gamma_motor = 0.0025;
  double alpha = 1e-5;
  double sigma_f = -1.0;  // default: 10% below sigma_bar
  double sigma_r = 6.0;
  int n_nodes = 100;
  int budget = 40;             // maximum objective evaluations
  double initial_step = 0.05;  // relative coordinate step
  double min_step = 0.005;
  // Coarse meshes stall short of the default stationarity tolerance even when
  // the trajectory itself has converged, so residual evaluations run the
  // solver with a relaxed target.
  double solver_kkt_tol = 1e-4;
};

struct RefineResult {
  FittedParams params;
  std::vector<double> accepted_residuals;  // residual after each accepted step
  int evaluations = 0;
  bool budget_exhausted = false;
};

namespace detail {

inline double rms_against_series(const Trajectory& traj, const VelocitySeries& series) {
  double sse = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < series.t.size(); ++i) {
    double tq = series.t[i];
    if (tq > traj.t_f) break;
    auto it = std::upper_bound(traj.times.begin(), traj.times.end(), tq);
    std::size_t k = std::max<std::ptrdiff_t>(it - traj.times.begin() - 1, 0);
    k = std::min(k, traj.times.size() - 2);
    double w = (tq - traj.times[k]) / (traj.times[k + 1] - traj.times[k]);
    double v = (1.0 - w) * traj.states[k].v + w * traj.states[k + 1].v;
    sse += (v - series.v[i]) * (v - series.v[i]);
    ++count;
  }
  return count ? std::sqrt(sse / count) : std::numeric_limits<double>::infinity();
}

}  // namespace detail

// Local refinement of the inferred parameters against the full solver:
// coordinate descent with shrinking steps; accepted iterates never worsen
// the residual; failed solves reject the trial point.
inline RefineResult refine(const FittedParams& initial, const VelocitySeries& series,
                           double sigma_bar, RefineOptions opts = {}) {
  series.validate();
  if (opts.sigma_f < 0.0) opts.sigma_f = 0.9 * sigma_bar;
  if (!initial.gammas_identifiable)
    throw std::invalid_argument("refine: initial parameters lack identifiable gammas");

  std::array<double, 4> theta{initial.tau, initial.e0, initial.gamma1, initial.gamma2};
  RefineResult result;
  result.params = initial;

  auto evaluate = [&](const std::array<double, 4>& th) -> double {
    ++result.evaluations;
    try {
      RunnerParams p{th[0], opts.f_max, opts.gamma_motor, th[1], series.v.front(), opts.alpha,
                     series.distance};
      SigmaProfile s{SigmaVariant::ThreePiece, sigma_bar, opts.sigma_f, opts.sigma_r, th[2],
                     th[3]};
      Transcription spec;
      spec.n_nodes = opts.n_nodes;
      AugLagOptions solver;
      solver.kkt_tol = opts.solver_kkt_tol;
      Trajectory traj = solve_ocp(p, s, SlopeProfile{}, spec, solver);
      return detail::rms_against_series(traj, series);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  double best = evaluate(theta);
  result.accepted_residuals.push_back(best);
  double step = opts.initial_step;
  while (step >= opts.min_step && result.evaluations < opts.budget) {
    bool improved = false;
    for (int i = 0; i < 4 && result.evaluations < opts.budget; ++i) {
      for (double sign : {+1.0, -1.0}) {
        if (result.evaluations >= opts.budget) break;
        auto trial = theta;
        trial[i] *= 1.0 + sign * step;
        double value = evaluate(trial);
        if (value < best) {
          theta = trial;
          best = value;
          result.accepted_residuals.push_back(best);
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  result.budget_exhausted = result.evaluations >= opts.budget;

  result.params.tau = theta[0];
  result.params.e0 = theta[1];
  result.params.gamma1 = theta[2];
  result.params.gamma2 = theta[3];
  result.params.residual = best;
  return result;
}

}  // namespace pacer

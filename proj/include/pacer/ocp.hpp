#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pacer/model.hpp"
#include "pacer/nlp.hpp"
#include "pacer/numerics.hpp"
#include "pacer/turnpike.hpp"

namespace pacer {

struct Transcription {
  enum class Scheme { Trapezoidal, HermiteSimpson };

  int n_nodes = 400;
  Scheme scheme = Scheme::HermiteSimpson;
  double sigma_smoothing = 1.0;   // C2 half-width on sigma(e), energy units
  double slope_smoothing = 15.0;  // C1 blend width on beta(x), meters

  // characteristic magnitudes used to scale the decision vector
  double scale_v = 10.0;
  double scale_f = 10.0;
  double scale_u = 5.0;
  double scale_t = 300.0;

  void validate() const {
    if (n_nodes < 50) throw std::invalid_argument("Transcription: n_nodes must be >= 50");
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<double> controls;
  double objective = 0.0;
  double t_f = 0.0;
  double kkt_residual = 0.0;
};

class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, Trajectory best, double kkt)
      : std::runtime_error(what), best_iterate(std::move(best)), kkt_residual(kkt) {}
  Trajectory best_iterate;
  double kkt_residual;
};

namespace detail {

// Smoothed dynamics with Jacobians, evaluated in unscaled units.
struct SmoothDynamics {
  const RunnerParams* p;
  const SigmaProfile* s;
  const SlopeProfile* slope;
  double eps_sigma;
  double slope_w;

  // state order: x, v, f, e
  void eval(const std::array<double, 4>& z, double u, std::array<double, 4>& F,
            std::array<std::array<double, 4>, 4>* A, std::array<double, 4>* B) const {
    const double x = z[0], v = z[1], f = z[2], e = z[3];
    double e_cl = std::clamp(e, 0.0, p->e0);  // sigma domain; gradient is zero outside
    double sig = sigma_eval_smooth(*s, e_cl, p->e0, eps_sigma);
    double beta = slope->beta_smooth(x, slope_w);
    F[0] = v;
    F[1] = -v / p->tau + f - slope->g * beta;
    F[2] = p->gamma_motor * (u * (p->f_max - f) - f);
    F[3] = sig - f * v;
    if (A) {
      double dsig = (e == e_cl) ? sigma_deriv_smooth(*s, e_cl, p->e0, eps_sigma) : 0.0;
      double dbeta = slope->beta_smooth_deriv(x, slope_w);
      *A = {{{0.0, 1.0, 0.0, 0.0},
             {-slope->g * dbeta, -1.0 / p->tau, 1.0, 0.0},
             {0.0, 0.0, -p->gamma_motor * (u + 1.0), 0.0},
             {0.0, -f, -v, dsig}}};
    }
    if (B) *B = {0.0, 0.0, p->gamma_motor * (p->f_max - f), 0.0};
  }
};

}  // namespace detail

// Direct transcription of the pacing problem with free final time. Time is
// normalized to [0, 1] and the dynamics are multiplied by t_f. Decision
// vector (scaled): per node (x, v, f, e, u), then t_f.
//
// Constraint layout: 4*(n_nodes - 1) collocation defects followed by the five
// boundary conditions x(0) = 0, v(0) = v0, e(0) = e0, x(1) = d, e(1) = 0, so
// num_constraints = 4*(n_nodes - 1) + 5.
class OcpTranscription : public ConstrainedLsqProblem {
 public:
  OcpTranscription(const RunnerParams& p, const SigmaProfile& s, const SlopeProfile& slope,
                   const Transcription& spec)
      : p_(p), s_(s), slope_(slope), spec_(spec) {
    spec_.validate();
    p_.validate();
    s_.validate(p_.e0);
    slope_.validate();
    N_ = spec_.n_nodes - 1;  // intervals
    dyn_ = {&p_, &s_, &slope_, spec_.sigma_smoothing, spec_.slope_smoothing};
    scale_ = {p_.distance, spec_.scale_v, spec_.scale_f, p_.e0};
    for (int k = 0; k < spec_.n_nodes; ++k) {
      bounds_.emplace_back(var(k, 2), 0.0);  // f >= 0
      bounds_.emplace_back(var(k, 3), 0.0);  // e >= 0
    }
    bounds_.emplace_back(t_index(), 1.0 / spec_.scale_t);  // t_f >= 1 s
  }

  int num_vars() const override { return 5 * spec_.n_nodes + 1; }
  int num_constraints() const override { return 4 * N_ + 5; }
  int num_objective_residuals() const override {
    return 1 + (spec_.scheme == Transcription::Scheme::HermiteSimpson ? 3 * N_ : 2 * N_);
  }

  int var(int node, int field) const { return 5 * node + field; }  // field 4 = u
  int t_index() const { return 5 * spec_.n_nodes; }

  const std::vector<std::pair<int, double>>& lower_bounds() const override { return bounds_; }

  void objective_residuals(const Eigen::VectorXd& x, Eigen::VectorXd& r,
                           std::vector<Eigen::Triplet<double>>* jac) const override {
    const double T = x(t_index()) * spec_.scale_t;
    const double dtau = 1.0 / N_;
    r(0) = std::sqrt(std::max(T, 1e-12));
    if (jac) jac->emplace_back(0, t_index(), spec_.scale_t / (2.0 * r(0)));
    const double su = spec_.scale_u, st = spec_.scale_t;
    if (spec_.scheme == Transcription::Scheme::HermiteSimpson) {
      const double w_end = std::sqrt(p_.alpha * dtau / 12.0);
      const double w_mid = std::sqrt(p_.alpha * dtau / 3.0);
      const double sqT = std::sqrt(T);
      for (int k = 0; k < N_; ++k) {
        double ua = x(var(k, 4)) * su, ub = x(var(k + 1, 4)) * su;
        double um = 0.5 * (ua + ub);
        int row = 1 + 3 * k;
        r(row) = w_end * sqT * ua;
        r(row + 1) = w_mid * sqT * um;
        r(row + 2) = w_end * sqT * ub;
        if (jac) {
          jac->emplace_back(row, var(k, 4), w_end * sqT * su);
          jac->emplace_back(row, t_index(), w_end * ua * st / (2.0 * sqT));
          jac->emplace_back(row + 1, var(k, 4), w_mid * sqT * 0.5 * su);
          jac->emplace_back(row + 1, var(k + 1, 4), w_mid * sqT * 0.5 * su);
          jac->emplace_back(row + 1, t_index(), w_mid * um * st / (2.0 * sqT));
          jac->emplace_back(row + 2, var(k + 1, 4), w_end * sqT * su);
          jac->emplace_back(row + 2, t_index(), w_end * ub * st / (2.0 * sqT));
        }
      }
    } else {
      const double w = std::sqrt(p_.alpha * dtau / 4.0);
      const double sqT = std::sqrt(T);
      for (int k = 0; k < N_; ++k) {
        double ua = x(var(k, 4)) * su, ub = x(var(k + 1, 4)) * su;
        int row = 1 + 2 * k;
        r(row) = w * sqT * ua;
        r(row + 1) = w * sqT * ub;
        if (jac) {
          jac->emplace_back(row, var(k, 4), w * sqT * su);
          jac->emplace_back(row, t_index(), w * ua * st / (2.0 * sqT));
          jac->emplace_back(row + 1, var(k + 1, 4), w * sqT * su);
          jac->emplace_back(row + 1, t_index(), w * ub * st / (2.0 * sqT));
        }
      }
    }
  }

  void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c,
                   std::vector<Eigen::Triplet<double>>* jac) const override {
    const double T = x(t_index()) * spec_.scale_t;
    const double h = T / N_;
    const double dtau = 1.0 / N_;
    std::array<double, 4> za, zb, zm, Fa, Fb, Fm;
    std::array<std::array<double, 4>, 4> Aa, Ab, Am;
    std::array<double, 4> Ba, Bb, Bm;

    for (int k = 0; k < N_; ++k) {
      for (int j = 0; j < 4; ++j) {
        za[j] = x(var(k, j)) * scale_[j];
        zb[j] = x(var(k + 1, j)) * scale_[j];
      }
      double ua = x(var(k, 4)) * spec_.scale_u;
      double ub = x(var(k + 1, 4)) * spec_.scale_u;
      dyn_.eval(za, ua, Fa, jac ? &Aa : nullptr, jac ? &Ba : nullptr);
      dyn_.eval(zb, ub, Fb, jac ? &Ab : nullptr, jac ? &Bb : nullptr);

      if (spec_.scheme == Transcription::Scheme::HermiteSimpson) {
        for (int j = 0; j < 4; ++j) zm[j] = 0.5 * (za[j] + zb[j]) + h / 8.0 * (Fa[j] - Fb[j]);
        double um = 0.5 * (ua + ub);
        dyn_.eval(zm, um, Fm, jac ? &Am : nullptr, jac ? &Bm : nullptr);
        for (int i = 0; i < 4; ++i) {
          double defect = zb[i] - za[i] - h / 6.0 * (Fa[i] + 4.0 * Fm[i] + Fb[i]);
          c(4 * k + i) = defect / scale_[i];
        }
        if (jac) {
          // chain rule through the Hermite midpoint state
          for (int i = 0; i < 4; ++i) {
            int row = 4 * k + i;
            for (int j = 0; j < 4; ++j) {
              double am_dzma = 0.0, am_dzmb = 0.0;
              for (int l = 0; l < 4; ++l) {
                double dzm_l_da_j = (l == j ? 0.5 : 0.0) + h / 8.0 * Aa[l][j];
                double dzm_l_db_j = (l == j ? 0.5 : 0.0) - h / 8.0 * Ab[l][j];
                am_dzma += Am[i][l] * dzm_l_da_j;
                am_dzmb += Am[i][l] * dzm_l_db_j;
              }
              double dCi_daj = -(i == j ? 1.0 : 0.0) - h / 6.0 * (Aa[i][j] + 4.0 * am_dzma);
              double dCi_dbj = (i == j ? 1.0 : 0.0) - h / 6.0 * (Ab[i][j] + 4.0 * am_dzmb);
              jac->emplace_back(row, var(k, j), dCi_daj * scale_[j] / scale_[i]);
              jac->emplace_back(row, var(k + 1, j), dCi_dbj * scale_[j] / scale_[i]);
            }
            // controls
            double am_Ba = 0.0, am_Bb = 0.0;
            for (int l = 0; l < 4; ++l) {
              am_Ba += Am[i][l] * (h / 8.0) * Ba[l];
              am_Bb += Am[i][l] * (-h / 8.0) * Bb[l];
            }
            double dCi_dua = -h / 6.0 * (Ba[i] + 4.0 * (am_Ba + 0.5 * Bm[i]));
            double dCi_dub = -h / 6.0 * (Bb[i] + 4.0 * (am_Bb + 0.5 * Bm[i]));
            jac->emplace_back(row, var(k, 4), dCi_dua * spec_.scale_u / scale_[i]);
            jac->emplace_back(row, var(k + 1, 4), dCi_dub * spec_.scale_u / scale_[i]);
            // final time, through h directly and through the midpoint state
            double am_dzdh = 0.0;
            for (int l = 0; l < 4; ++l) am_dzdh += Am[i][l] * (Fa[l] - Fb[l]) / 8.0;
            double dCi_dT =
                dtau * (-(Fa[i] + 4.0 * Fm[i] + Fb[i]) / 6.0 - h / 6.0 * 4.0 * am_dzdh);
            jac->emplace_back(row, t_index(), dCi_dT * spec_.scale_t / scale_[i]);
          }
        }
      } else {  // trapezoidal
        for (int i = 0; i < 4; ++i) {
          double defect = zb[i] - za[i] - h / 2.0 * (Fa[i] + Fb[i]);
          c(4 * k + i) = defect / scale_[i];
        }
        if (jac) {
          for (int i = 0; i < 4; ++i) {
            int row = 4 * k + i;
            for (int j = 0; j < 4; ++j) {
              double dCi_daj = -(i == j ? 1.0 : 0.0) - h / 2.0 * Aa[i][j];
              double dCi_dbj = (i == j ? 1.0 : 0.0) - h / 2.0 * Ab[i][j];
              jac->emplace_back(row, var(k, j), dCi_daj * scale_[j] / scale_[i]);
              jac->emplace_back(row, var(k + 1, j), dCi_dbj * scale_[j] / scale_[i]);
            }
            jac->emplace_back(row, var(k, 4),
                              -h / 2.0 * Ba[i] * spec_.scale_u / scale_[i]);
            jac->emplace_back(row, var(k + 1, 4),
                              -h / 2.0 * Bb[i] * spec_.scale_u / scale_[i]);
            jac->emplace_back(row, t_index(),
                              -dtau / 2.0 * (Fa[i] + Fb[i]) * spec_.scale_t / scale_[i]);
          }
        }
      }
    }

    // boundary conditions (already in scaled units)
    int base = 4 * N_;
    c(base + 0) = x(var(0, 0));
    c(base + 1) = x(var(0, 1)) - p_.v0 / scale_[1];
    c(base + 2) = x(var(0, 3)) - 1.0;  // e(0)/e0 = 1
    c(base + 3) = x(var(N_, 0)) - 1.0; // x(t_f)/d = 1
    c(base + 4) = x(var(N_, 3));
    if (jac) {
      jac->emplace_back(base + 0, var(0, 0), 1.0);
      jac->emplace_back(base + 1, var(0, 1), 1.0);
      jac->emplace_back(base + 2, var(0, 3), 1.0);
      jac->emplace_back(base + 3, var(N_, 0), 1.0);
      jac->emplace_back(base + 4, var(N_, 3), 1.0);
    }
  }

  // Decision vector filled from the closed-form three-phase profile.
  Eigen::VectorXd initial_guess(const TurnpikeProfile& profile) const {
    const TurnpikeSolution& sol = profile.solution();
    const int n = spec_.n_nodes;
    Eigen::VectorXd x(num_vars());
    double T = sol.t_f;
    double xpos = 0.0;
    double t_prev = 0.0;
    for (int k = 0; k < n; ++k) {
      double t = T * k / (n - 1.0);
      if (k > 0)
        xpos += integrate([&](double tt) { return profile.velocity(tt); }, t_prev, t,
                          QuadratureSpec{1e-8, 1e-8, 30});
      t_prev = t;
      double v = profile.velocity(t);
      double f = std::min(profile.force(t), 0.985 * p_.f_max);
      double e = energy_guess(t, sol);
      double u = std::clamp(profile.control(std::min(t, sol.t_f * 0.9999)), -50.0, 50.0);
      if (profile.force(t) >= 0.985 * p_.f_max) u = std::clamp(u, -50.0, 10.0);
      x(var(k, 0)) = std::min(xpos, p_.distance) / scale_[0];
      x(var(k, 1)) = v / scale_[1];
      x(var(k, 2)) = f / scale_[2];
      x(var(k, 3)) = e / scale_[3];
      x(var(k, 4)) = u / spec_.scale_u;
    }
    x(var(0, 0)) = 0.0;
    x(var(n - 1, 0)) = 1.0;
    x(var(0, 3)) = 1.0;
    x(var(n - 1, 3)) = 0.0;
    x(t_index()) = T / spec_.scale_t;
    return x;
  }

  Trajectory unpack(const Eigen::VectorXd& x, double kkt) const {
    Trajectory traj;
    const int n = spec_.n_nodes;
    double T = x(t_index()) * spec_.scale_t;
    traj.t_f = T;
    traj.kkt_residual = kkt;
    traj.objective = objective_value(x);
    traj.times.resize(n);
    traj.states.resize(n);
    traj.controls.resize(n);
    for (int k = 0; k < n; ++k) {
      traj.times[k] = T * k / (n - 1.0);
      traj.states[k] = State{x(var(k, 0)) * scale_[0], x(var(k, 1)) * scale_[1],
                             x(var(k, 2)) * scale_[2], x(var(k, 3)) * scale_[3]};
      traj.controls[k] = x(var(k, 4)) * spec_.scale_u;
    }
    return traj;
  }

  const Transcription& spec() const { return spec_; }
  const RunnerParams& params() const { return p_; }

 private:
  double energy_guess(double t, const TurnpikeSolution& sol) const {
    // piecewise-linear energy consistent with the phase boundaries
    double e1 = p_.e0 - s_.gamma2;
    double e2 = s_.gamma1 * p_.e0;
    if (t <= sol.t1) return p_.e0 + (e1 - p_.e0) * t / sol.t1;
    if (t <= sol.t2) return e1 + (e2 - e1) * (t - sol.t1) / (sol.t2 - sol.t1);
    double w = std::min((t - sol.t2) / (sol.t_f - sol.t2), 1.0);
    return e2 * (1.0 - w);
  }

  RunnerParams p_;
  SigmaProfile s_;
  SlopeProfile slope_;
  Transcription spec_;
  detail::SmoothDynamics dyn_;
  std::array<double, 4> scale_;
  int N_;
  std::vector<std::pair<int, double>> bounds_;
};

inline SigmaProfile three_piece_equivalent(const SigmaProfile& s) {
  SigmaProfile out = s;
  out.variant = SigmaVariant::ThreePiece;
  out.gamma_plus = 0.0;
  out.bump = 0.0;
  return out;
}

// Solves the full pacing problem, initialized at the turnpike profile.
inline Trajectory solve_ocp(const RunnerParams& p, const SigmaProfile& s,
                            const SlopeProfile& slope, const Transcription& spec = {},
                            const AugLagOptions& opts = {}) {
  OcpTranscription nlp(p, s, slope, spec);
  TurnpikeProfile profile = assemble_profile(p, three_piece_equivalent(s));
  Eigen::VectorXd x0 = nlp.initial_guess(profile);
  AugLagResult res = augmented_lagrangian_minimize(nlp, std::move(x0), opts);
  Trajectory traj = nlp.unpack(res.x, res.kkt_residual);
  if (!res.converged)
    throw SolverFailure("solve_ocp: iteration cap reached (constraint violation " +
                            std::to_string(res.constraint_violation) + ", kkt " +
                            std::to_string(res.kkt_residual) + ")",
                        traj, res.kkt_residual);
  return traj;
}

struct PlateauStats {
  double v_mean = 0.0;
  double f_mean = 0.0;
  double u_mean = 0.0;
  int samples = 0;
};

// Averages over the middle band of the race by distance. The final 1% of the
// race time is always excluded from metrics.
inline PlateauStats plateau_stats(const Trajectory& traj, double distance, double lo_frac = 0.25,
                                  double hi_frac = 0.75) {
  PlateauStats st;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    if (traj.times[k] > 0.99 * traj.t_f) break;
    double x = traj.states[k].x;
    if (x < lo_frac * distance || x > hi_frac * distance) continue;
    st.v_mean += traj.states[k].v;
    st.f_mean += traj.states[k].f;
    st.u_mean += traj.controls[k];
    ++st.samples;
  }
  if (st.samples > 0) {
    st.v_mean /= st.samples;
    st.f_mean /= st.samples;
    st.u_mean /= st.samples;
  }
  return st;
}

struct AuditResult {
  double position_drift;  // |x(t_f) - d| when re-simulated on unsmoothed sigma [m]
  double energy_drift;    // |e(t_f)| under the same re-simulation [m^2/s^2]
};

// Re-integrates the exact (unsmoothed) dynamics under the solved control to
// audit the effect of the solver-side smoothing.
inline AuditResult audit_trajectory(const Trajectory& traj, const RunnerParams& p,
                                    const SigmaProfile& s, const SlopeProfile& slope,
                                    double dt = 0.01) {
  auto u_of_t = [&](double t) {
    const auto& ts = traj.times;
    if (t <= ts.front()) return traj.controls.front();
    if (t >= ts.back()) return traj.controls.back();
    auto it = std::upper_bound(ts.begin(), ts.end(), t);
    std::size_t k = static_cast<std::size_t>(it - ts.begin()) - 1;
    double w = (t - ts[k]) / (ts[k + 1] - ts[k]);
    return (1.0 - w) * traj.controls[k] + w * traj.controls[k + 1];
  };
  OdeRhs rhs = [&](double t, const std::vector<double>& y) {
    State st{y[0], y[1], y[2], std::clamp(y[3], 0.0, p.e0)};
    State d = dynamics_rhs(st, u_of_t(t), p, s, slope);
    return std::vector<double>{d.x, d.v, d.f, d.e};
  };
  const State& s0 = traj.states.front();
  OdePath path = integrate_ode(rhs, {s0.x, s0.v, s0.f, s0.e}, 0.0, traj.t_f, dt);
  const auto& yf = path.y.back();
  return AuditResult{std::abs(yf[0] - p.distance), std::abs(yf[3])};
}

// ---------------------------------------------------------------------------
// Reduced end-of-race problem: minimize the motor cost subject to the force
// dynamics and the integral energy constraint, over a fixed horizon.
// ---------------------------------------------------------------------------

struct EndPhaseSolution {
  std::vector<double> times;
  std::vector<double> force;
  std::vector<double> control;
  std::vector<double> velocity;  // reconstructed from the velocity equation
  double objective = 0.0;
  double kkt_residual = 0.0;
};

class EndPhaseTranscription : public ConstrainedLsqProblem {
 public:
  EndPhaseTranscription(const RunnerParams& p, const SigmaProfile& s, double f_bar,
                        double dt_end, int n_nodes,
                        SprintEnergyConstant which = SprintEnergyConstant::EndPhase)
      : p_(p), s_(s), f_bar_(f_bar), dt_end_(dt_end), n_(n_nodes) {
    if (n_ < 10) throw std::invalid_argument("EndPhaseTranscription: need at least 10 nodes");
    N_ = n_ - 1;
    h_ = dt_end_ / N_;
    A_ = (which == SprintEnergyConstant::EndPhase)
             ? (s_.sigma_bar - s_.sigma_f) / (s_.gamma1 * p_.e0)
             : (s_.sigma_bar - s_.sigma_r) / (s_.gamma1 * p_.e0);
    rhs_ = s_.sigma_f / A_ * (1.0 - std::exp(-A_ * dt_end_)) + s_.gamma1 * p_.e0;
    for (int k = 0; k < n_; ++k) bounds_.emplace_back(fvar(k), 0.0);
  }

  int num_vars() const override { return 2 * n_; }
  int num_constraints() const override { return N_ + 2; }  // defects + f(0) + energy
  int num_objective_residuals() const override { return 3 * N_; }

  int fvar(int k) const { return 2 * k; }
  int uvar(int k) const { return 2 * k + 1; }

  const std::vector<std::pair<int, double>>& lower_bounds() const override { return bounds_; }

  double energy_constant() const { return A_; }

  void objective_residuals(const Eigen::VectorXd& x, Eigen::VectorXd& r,
                           std::vector<Eigen::Triplet<double>>* jac) const override {
    const double w_end = std::sqrt(h_ / 6.0), w_mid = std::sqrt(2.0 * h_ / 3.0);
    for (int k = 0; k < N_; ++k) {
      double ua = x(uvar(k)) * su_, ub = x(uvar(k + 1)) * su_;
      double um = 0.5 * (ua + ub);
      int row = 3 * k;
      r(row) = w_end * ua;
      r(row + 1) = w_mid * um;
      r(row + 2) = w_end * ub;
      if (jac) {
        jac->emplace_back(row, uvar(k), w_end * su_);
        jac->emplace_back(row + 1, uvar(k), 0.5 * w_mid * su_);
        jac->emplace_back(row + 1, uvar(k + 1), 0.5 * w_mid * su_);
        jac->emplace_back(row + 2, uvar(k + 1), w_end * su_);
      }
    }
  }

  void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c,
                   std::vector<Eigen::Triplet<double>>* jac) const override {
    auto fdot = [&](double f, double u) {
      return p_.gamma_motor * (u * (p_.f_max - f) - f);
    };
    // integral of tau*f^2*exp(-A t) accumulated with Hermite-Simpson panels
    double integral = 0.0;
    std::vector<Eigen::Triplet<double>> int_jac;
    const double e_scale = rhs_;
    for (int k = 0; k < N_; ++k) {
      double fa = x(fvar(k)) * sf_, fb = x(fvar(k + 1)) * sf_;
      double ua = x(uvar(k)) * su_, ub = x(uvar(k + 1)) * su_;
      double um = 0.5 * (ua + ub);
      double Fa = fdot(fa, ua), Fb = fdot(fb, ub);
      double fm = 0.5 * (fa + fb) + h_ / 8.0 * (Fa - Fb);
      double Fm = fdot(fm, um);
      double defect = fb - fa - h_ / 6.0 * (Fa + 4.0 * Fm + Fb);
      c(k) = defect / sf_;

      double ta = k * h_, tm = ta + 0.5 * h_, tb = ta + h_;
      double ga = p_.tau * fa * fa * std::exp(-A_ * ta);
      double gm = p_.tau * fm * fm * std::exp(-A_ * tm);
      double gb = p_.tau * fb * fb * std::exp(-A_ * tb);
      integral += h_ / 6.0 * (ga + 4.0 * gm + gb);

      if (jac) {
        double dFa_df = -p_.gamma_motor * (ua + 1.0), dFb_df = -p_.gamma_motor * (ub + 1.0);
        double dFa_du = p_.gamma_motor * (p_.f_max - fa), dFb_du = p_.gamma_motor * (p_.f_max - fb);
        double dFm_df = -p_.gamma_motor * (um + 1.0), dFm_du = p_.gamma_motor * (p_.f_max - fm);
        double dfm_dfa = 0.5 + h_ / 8.0 * dFa_df;
        double dfm_dfb = 0.5 - h_ / 8.0 * dFb_df;
        double dfm_dua = h_ / 8.0 * dFa_du;
        double dfm_dub = -h_ / 8.0 * dFb_du;
        double dC_dfa = -1.0 - h_ / 6.0 * (dFa_df + 4.0 * dFm_df * dfm_dfa);
        double dC_dfb = 1.0 - h_ / 6.0 * (dFb_df + 4.0 * dFm_df * dfm_dfb);
        double dC_dua = -h_ / 6.0 * (dFa_du + 4.0 * (dFm_df * dfm_dua + 0.5 * dFm_du));
        double dC_dub = -h_ / 6.0 * (dFb_du + 4.0 * (dFm_df * dfm_dub + 0.5 * dFm_du));
        jac->emplace_back(k, fvar(k), dC_dfa);
        jac->emplace_back(k, fvar(k + 1), dC_dfb);
        jac->emplace_back(k, uvar(k), dC_dua * su_ / sf_);
        jac->emplace_back(k, uvar(k + 1), dC_dub * su_ / sf_);

        double wq = h_ / 6.0 * p_.tau;
        double dI_dfa = wq * (2.0 * fa * std::exp(-A_ * ta) + 8.0 * fm * std::exp(-A_ * tm) * dfm_dfa);
        double dI_dfb = wq * (2.0 * fb * std::exp(-A_ * tb) + 8.0 * fm * std::exp(-A_ * tm) * dfm_dfb);
        double dI_dua = wq * 8.0 * fm * std::exp(-A_ * tm) * dfm_dua;
        double dI_dub = wq * 8.0 * fm * std::exp(-A_ * tm) * dfm_dub;
        int_jac.emplace_back(N_ + 1, fvar(k), dI_dfa * sf_ / e_scale);
        int_jac.emplace_back(N_ + 1, fvar(k + 1), dI_dfb * sf_ / e_scale);
        int_jac.emplace_back(N_ + 1, uvar(k), dI_dua * su_ / e_scale);
        int_jac.emplace_back(N_ + 1, uvar(k + 1), dI_dub * su_ / e_scale);
      }
    }
    c(N_) = x(fvar(0)) - f_bar_ / sf_;
    c(N_ + 1) = (integral - rhs_) / rhs_;
    if (jac) {
      jac->emplace_back(N_, fvar(0), 1.0);
      for (const auto& t : int_jac) jac->emplace_back(t.row(), t.col(), t.value());
    }
  }

  EndPhaseSolution unpack(const Eigen::VectorXd& x, double kkt) const {
    EndPhaseSolution sol;
    sol.kkt_residual = kkt;
    sol.objective = objective_value(x);
    sol.times.resize(n_);
    sol.force.resize(n_);
    sol.control.resize(n_);
    for (int k = 0; k < n_; ++k) {
      sol.times[k] = k * h_;
      sol.force[k] = x(fvar(k)) * sf_;
      sol.control[k] = x(uvar(k)) * su_;
    }
    // velocity from dv/dt = -v/tau + f, v(0) = tau*f_bar
    auto f_of_t = [&](double t) {
      double s = std::clamp(t / h_, 0.0, static_cast<double>(N_));
      int k = std::min(static_cast<int>(s), N_ - 1);
      double w = s - k;
      return (1.0 - w) * sol.force[k] + w * sol.force[k + 1];
    };
    OdeRhs rhs = [&](double t, const std::vector<double>& y) {
      return std::vector<double>{-y[0] / p_.tau + f_of_t(t)};
    };
    OdePath path = integrate_ode(rhs, {p_.tau * f_bar_}, 0.0, dt_end_, h_ / 8.0);
    sol.velocity.resize(n_);
    for (int k = 0; k < n_; ++k) {
      std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(k) * 8, path.y.size() - 1);
      sol.velocity[k] = path.y[idx][0];
    }
    return sol;
  }

  Eigen::VectorXd initial_guess(double lambda) const {
    Eigen::VectorXd x(num_vars());
    double k_rate = p_.gamma_motor * lambda * p_.f_max;
    for (int k = 0; k < n_; ++k) {
      double t = k * h_;
      double f = sprint_force(t, p_.f_max, f_bar_, p_.gamma_motor, lambda);
      double fdot = k_rate * f * (1.0 - f / p_.f_max);
      double u = (fdot / p_.gamma_motor + f) / (p_.f_max - f);
      x(fvar(k)) = f / sf_;
      x(uvar(k)) = std::clamp(u, -50.0, 50.0) / su_;
    }
    return x;
  }

 private:
  RunnerParams p_;
  SigmaProfile s_;
  double f_bar_, dt_end_, h_, A_, rhs_;
  int n_, N_;
  double sf_ = 10.0, su_ = 5.0;
  std::vector<std::pair<int, double>> bounds_;
};

inline EndPhaseSolution solve_end_phase(const RunnerParams& p, const SigmaProfile& s,
                                        double f_bar, double dt_end, int n_nodes = 200,
                                        SprintEnergyConstant which = SprintEnergyConstant::EndPhase,
                                        const AugLagOptions& opts = {}) {
  EndPhaseTranscription nlp(p, s, f_bar, dt_end, n_nodes, which);
  double lambda;
  try {
    lambda = sprint_lambda(p, s, f_bar, dt_end, which);
  } catch (const InfeasibleRace&) {
    lambda = 0.1;
  }
  AugLagResult res = augmented_lagrangian_minimize(nlp, nlp.initial_guess(lambda), opts);
  EndPhaseSolution sol = nlp.unpack(res.x, res.kkt_residual);
  if (!res.converged)
    throw SolverFailure("solve_end_phase: iteration cap reached", Trajectory{}, res.kkt_residual);
  return sol;
}

// ---------------------------------------------------------------------------
// Sigmoid force arcs from the stationarity condition of the simplified motor
// control problem (constant co-state approximation).
// ---------------------------------------------------------------------------

struct PmpSigmoid {
  double p_f;   // co-state (constant approximation)
  double f1;    // larger root of p_f*gamma*(F_max - f)^2 - f = 0
  double f2;    // smaller root
  double mu;    // rate p_f*gamma^2*(f1 - f2)
  double anchor_time;
  double anchor_force;
  double gamma;
  double f_max;

  double force(double t) const {
    double ratio = (anchor_force - f1) / (anchor_force - f2);
    return f2 + (f1 - f2) / (1.0 - ratio * std::exp(mu * (t - anchor_time)));
  }

  // tangent at the anchor
  double force_linearized(double t) const {
    double slope = mu * (anchor_force - f1) * (anchor_force - f2) / (f1 - f2);
    return anchor_force + slope * (t - anchor_time);
  }
};

inline PmpSigmoid pmp_sigmoid(double p_f, double gamma, double f_max, double anchor_time,
                              double anchor_force) {
  double a = p_f * gamma;
  double b = -(2.0 * p_f * gamma * f_max + 1.0);
  double cc = p_f * gamma * f_max * f_max;
  double disc = b * b - 4.0 * a * cc;
  if (!(disc > 0.0) || a == 0.0)
    throw std::domain_error("pmp_sigmoid: no real sigmoid regime (complex roots)");
  double sq = std::sqrt(disc);
  double r1 = (-b + sq) / (2.0 * a);
  double r2 = (-b - sq) / (2.0 * a);
  PmpSigmoid out;
  out.p_f = p_f;
  out.f1 = std::max(r1, r2);
  out.f2 = std::min(r1, r2);
  out.mu = p_f * gamma * gamma * (out.f1 - out.f2);
  out.anchor_time = anchor_time;
  out.anchor_force = anchor_force;
  out.gamma = gamma;
  out.f_max = f_max;
  return out;
}

}  // namespace pacer

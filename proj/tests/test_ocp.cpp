#include <doctest.h>

#include <array>
#include <cmath>
#include <random>

#include "pacer/fixtures.hpp"
#include "pacer/ocp.hpp"
#include "pacer/turnpike.hpp"

using namespace pacer;

namespace {

const ModelConfig& flat_config() {
  static ModelConfig cfg = find_fixture("flat1500").config;
  return cfg;
}

const TurnpikeProfile& flat_profile() {
  static TurnpikeProfile prof = assemble_profile(flat_config().runner, flat_config().sigma);
  return prof;
}

}  // namespace

TEST_CASE("transcription bookkeeping") {
  Transcription spec;
  spec.n_nodes = 120;
  OcpTranscription nlp(flat_config().runner, flat_config().sigma, SlopeProfile{}, spec);
  // 5 fields per node plus the free final time
  CHECK(nlp.num_vars() == 5 * 120 + 1);
  // 4 defect rows per interval plus 5 boundary conditions
  CHECK(nlp.num_constraints() == 4 * 119 + 5);

  Transcription bad;
  bad.n_nodes = 10;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("defects vanish on an integrated steady trajectory") {
  // Fill the decision vector from a high-accuracy RK4 integration of the
  // smoothed dynamics at the constant turnpike control; the collocation
  // defects then measure only the scheme's own quadrature error, which must
  // shrink at fourth order with the mesh.
  const RunnerParams& p = flat_config().runner;
  const SigmaProfile& s = flat_config().sigma;
  const TurnpikeSolution& sol = flat_profile().solution();

  auto max_defect = [&](int n_nodes) {
    Transcription ds;
    ds.n_nodes = n_nodes;
    OcpTranscription nlp(p, s, SlopeProfile{}, ds);
    SlopeProfile flat_slope;
    detail::SmoothDynamics dyn{&p, &s, &flat_slope, ds.sigma_smoothing, ds.slope_smoothing};
    double T = 150.0;
    int N = n_nodes - 1;
    double h = T / N;
    Eigen::VectorXd x(nlp.num_vars());
    std::array<double, 4> z{0.0, sol.v_bar, sol.f_bar, 0.9 * p.e0};
    double u = sol.u_bar;
    auto f_of = [&](const std::array<double, 4>& y) {
      std::array<double, 4> F;
      dyn.eval(y, u, F, nullptr, nullptr);
      return F;
    };
    for (int k = 0; k < n_nodes; ++k) {
      x(nlp.var(k, 0)) = z[0] / p.distance;
      x(nlp.var(k, 1)) = z[1] / ds.scale_v;
      x(nlp.var(k, 2)) = z[2] / ds.scale_f;
      x(nlp.var(k, 3)) = z[3] / p.e0;
      x(nlp.var(k, 4)) = u / ds.scale_u;
      if (k < N) {
        int sub = 64;
        double hh = h / sub;
        for (int q = 0; q < sub; ++q) {
          auto k1 = f_of(z);
          std::array<double, 4> z2, z3, z4;
          for (int j = 0; j < 4; ++j) z2[j] = z[j] + 0.5 * hh * k1[j];
          auto k2 = f_of(z2);
          for (int j = 0; j < 4; ++j) z3[j] = z[j] + 0.5 * hh * k2[j];
          auto k3 = f_of(z3);
          for (int j = 0; j < 4; ++j) z4[j] = z[j] + hh * k3[j];
          auto k4 = f_of(z4);
          for (int j = 0; j < 4; ++j) z[j] += hh / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
        }
      }
    }
    x(nlp.t_index()) = T / ds.scale_t;
    Eigen::VectorXd c(nlp.num_constraints());
    nlp.constraints(x, c, nullptr);
    double worst = 0.0;
    for (int i = 0; i < 4 * N; ++i) worst = std::max(worst, std::abs(c(i)));
    return worst;
  };

  double d100 = max_defect(100);
  double d200 = max_defect(200);
  CHECK(d100 < 1e-4);
  CHECK(d200 < d100 / 8.0);  // fourth-order: nominally a factor 16
}

TEST_CASE("objective at the turnpike initialization matches the plug-in value") {
  const RunnerParams& p = flat_config().runner;
  Transcription spec;
  spec.n_nodes = 200;
  OcpTranscription nlp(p, flat_config().sigma, SlopeProfile{}, spec);
  Eigen::VectorXd x0 = nlp.initial_guess(flat_profile());
  const TurnpikeSolution& sol = flat_profile().solution();
  double predicted = sol.t_f + 0.5 * p.alpha * sol.u_bar * sol.u_bar * sol.t_f;
  CHECK(nlp.objective_value(x0) == doctest::Approx(predicted).epsilon(0.01));
}

TEST_CASE("analytic Jacobians match central finite differences") {
  // random perturbations around the turnpike initialization, directional
  // derivatives of both residual blocks
  Transcription spec;
  spec.n_nodes = 60;
  OcpTranscription nlp(flat_config().runner, flat_config().sigma,
                       find_fixture("periodic2").config.slope, spec);
  Eigen::VectorXd base = nlp.initial_guess(flat_profile());
  std::mt19937 rng(42);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int no = nlp.num_objective_residuals(), m = nlp.num_constraints();
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x = base;
    for (int i = 0; i < x.size(); ++i) x(i) += 0.01 * nd(rng);
    Eigen::VectorXd dir(x.size());
    for (int i = 0; i < dir.size(); ++i) dir(i) = nd(rng);
    dir.normalize();
    Eigen::VectorXd r0(no), c0(m), rp(no), rm(no), cp(m), cm(m);
    std::vector<Eigen::Triplet<double>> jo, jc;
    nlp.objective_residuals(x, r0, &jo);
    nlp.constraints(x, c0, &jc);
    Eigen::SparseMatrix<double> Jo(no, x.size()), Jc(m, x.size());
    Jo.setFromTriplets(jo.begin(), jo.end());
    Jc.setFromTriplets(jc.begin(), jc.end());
    const double h = 1e-6;
    nlp.objective_residuals(x + h * dir, rp, nullptr);
    nlp.objective_residuals(x - h * dir, rm, nullptr);
    nlp.constraints(x + h * dir, cp, nullptr);
    nlp.constraints(x - h * dir, cm, nullptr);
    double eo = ((rp - rm) / (2.0 * h) - Jo * dir).norm() /
                std::max(1.0, (Jo * dir).norm());
    double ec = ((cp - cm) / (2.0 * h) - Jc * dir).norm() /
                std::max(1.0, (Jc * dir).norm());
    worst = std::max({worst, eo, ec});
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("solve_ocp reaches the reference optimum") {
  const ModelConfig& cfg = flat_config();
  Transcription spec;
  spec.n_nodes = 150;
  Trajectory traj = solve_ocp(cfg.runner, cfg.sigma, cfg.slope, spec);

  CHECK(traj.t_f == doctest::Approx(244.0).epsilon(2.0 / 244.0));
  CHECK(traj.kkt_residual <= 1e-6);

  PlateauStats st = plateau_stats(traj, cfg.runner.distance);
  CHECK(st.v_mean == doctest::Approx(6.04).epsilon(0.02));
  CHECK(st.f_mean == doctest::Approx(6.48).epsilon(0.02));
  CHECK(st.u_mean == doctest::Approx(4.26).epsilon(0.02));

  // structural invariants along the optimum
  CHECK(traj.times.front() == 0.0);
  CHECK(traj.times.back() == doctest::Approx(traj.t_f));
  CHECK(std::abs(traj.states.back().x - cfg.runner.distance) <= 1e-6 * cfg.runner.distance);
  CHECK(std::abs(traj.states.back().e) <= 1e-6 * cfg.runner.e0);
  double prev_e = traj.states.front().e;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const State& s = traj.states[k];
    CHECK(s.f < cfg.runner.f_max);            // never hits the ceiling
    CHECK(s.e >= -1e-8 * cfg.runner.e0);      // energy stays admissible
    CHECK(s.e <= prev_e + 1e-6 * cfg.runner.e0);  // non-increasing store
    prev_e = s.e;
    if (k > 0) CHECK(traj.times[k] > traj.times[k - 1]);
  }

  // turnpike closeness over the middle half of the horizon
  const TurnpikeSolution& sol = flat_profile().solution();
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    double t = traj.times[k];
    if (t < 0.25 * traj.t_f || t > 0.75 * traj.t_f) continue;
    CHECK(std::abs(traj.states[k].v - sol.v_bar) <= 0.02 * sol.v_bar);
  }

  // re-simulating with the exact, unsmoothed dynamics stays on target
  AuditResult audit = audit_trajectory(traj, cfg.runner, cfg.sigma, cfg.slope);
  CHECK(audit.position_drift <= 2.0);
  CHECK(audit.energy_drift <= 0.01 * cfg.runner.e0);
}

TEST_CASE("solver failure carries the best iterate") {
  const ModelConfig& cfg = flat_config();
  Transcription spec;
  spec.n_nodes = 80;
  AugLagOptions opts;
  opts.max_outer = 1;
  opts.max_inner = 2;
  try {
    solve_ocp(cfg.runner, cfg.sigma, cfg.slope, spec, opts);
    FAIL("expected SolverFailure");
  } catch (const SolverFailure& e) {
    CHECK(e.best_iterate.states.size() == 80);
    CHECK(e.kkt_residual > 0.0);
  }
}

TEST_CASE("end-phase problem tracks the sigmoid approximation") {
  const RunnerParams& p = flat_config().runner;
  const SigmaProfile& s = flat_config().sigma;
  const TurnpikeSolution& sol = flat_profile().solution();

  EndPhaseSolution ep = solve_end_phase(p, s, sol.f_bar, sol.dt_end, 200);
  CHECK(ep.force.front() == doctest::Approx(sol.f_bar).epsilon(1e-6));

  // within 3% of the closed-form sigmoid away from the terminal boundary
  // layer (the collocation endpoint enforces u(T) -> 0, the sigmoid does not)
  double worst = 0.0;
  for (std::size_t k = 0; k < ep.times.size(); ++k) {
    if (ep.times[k] > 0.95 * sol.dt_end) break;
    double fs = sprint_force(ep.times[k], p.f_max, sol.f_bar, p.gamma_motor, sol.lambda);
    worst = std::max(worst, std::abs(ep.force[k] - fs) / fs);
  }
  CHECK(worst <= 0.03);

  // quasi-static force balance: f tracks v/tau after the initial layer
  for (std::size_t k = 0; k < ep.times.size(); ++k) {
    if (ep.times[k] < 5.0 || ep.times[k] > 0.95 * sol.dt_end) continue;
    CHECK(std::abs(ep.force[k] - ep.velocity[k] / p.tau) <= 0.02 * ep.velocity[k] / p.tau);
  }
}

TEST_CASE("pmp sigmoid satisfies its defining differential equation") {
  double gamma = 0.0025, f_max = 8.0, p_f = 150.0;
  PmpSigmoid sig = pmp_sigmoid(p_f, gamma, f_max, 34.42, 6.5);
  CHECK(sig.f1 > sig.f2);
  CHECK(sig.mu == doctest::Approx(p_f * gamma * gamma * (sig.f1 - sig.f2)));
  CHECK(sig.force(34.42) == doctest::Approx(6.5).epsilon(1e-12));
  CHECK(sig.force_linearized(34.42) == doctest::Approx(6.5).epsilon(1e-12));

  // roots satisfy p_f*gamma*(F - f)^2 - f = 0
  for (double root : {sig.f1, sig.f2}) {
    CHECK(p_f * gamma * (f_max - root) * (f_max - root) - root ==
          doctest::Approx(0.0).epsilon(1e-9));
  }

  // residual of f' = gamma*(p_f*gamma*(F - f)^2 - f) along the curve
  double worst = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    double t = 34.42 * i / 1000.0;
    double f = sig.force(t);
    double ratio = (sig.anchor_force - sig.f1) / (sig.anchor_force - sig.f2);
    double E = ratio * std::exp(sig.mu * (t - sig.anchor_time));
    double fdot = (sig.f1 - sig.f2) * sig.mu * E / ((1.0 - E) * (1.0 - E));
    double rhs = gamma * (p_f * gamma * (f_max - f) * (f_max - f) - f);
    worst = std::max(worst, std::abs(fdot - rhs));
  }
  CHECK(worst <= 1e-10);

  // complex-root regime is rejected
  CHECK_THROWS_AS(pmp_sigmoid(-20.0, gamma, f_max, 0.0, 6.5), std::domain_error);
}

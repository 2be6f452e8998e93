#include <doctest.h>

#include <cmath>
#include <random>

#include "pacer/numerics.hpp"
#include "pacer/turnpike.hpp"

using namespace pacer;

namespace {

RunnerParams reference_params() { return {0.932, 8.0, 0.0025, 4651.0, 3.0, 1e-5, 1500.0}; }

SigmaProfile three_piece() { return {SigmaVariant::ThreePiece, 22.0, 20.0, 6.0, 0.15, 566.0}; }

}  // namespace

TEST_CASE("mean_velocity_simple closed form") {
  RunnerParams p = reference_params();
  CHECK(mean_velocity_simple(p, 22.0) == doctest::Approx(6.2).epsilon(0.008));

  RunnerParams no_store = p;
  no_store.e0 = 1e-300;
  CHECK(mean_velocity_simple(no_store, 22.0) ==
        doctest::Approx(std::sqrt(22.0 * p.tau)).epsilon(1e-9));

  // approaches sqrt(sigma_bar*tau) from above as the distance grows
  double prev = mean_velocity_simple(p, 22.0);
  for (double d : {3000.0, 6000.0, 12000.0, 24000.0}) {
    RunnerParams longer = p;
    longer.distance = d;
    double v = mean_velocity_simple(longer, 22.0);
    CHECK(v < prev);
    CHECK(v > std::sqrt(22.0 * p.tau));
    prev = v;
  }
}

TEST_CASE("turnpike_velocity reproduces the reference root") {
  RunnerParams p = reference_params();
  SigmaProfile s = three_piece();
  double v_bar = turnpike_velocity(p, s);
  CHECK(v_bar == doctest::Approx(6.06).epsilon(0.01 / 6.06));

  // with vanishing transition energies the distance balance collapses to the
  // simple mean-velocity formula
  SigmaProfile tiny = s;
  tiny.gamma1 = 1e-9;
  tiny.gamma2 = 1e-6;
  CHECK(turnpike_velocity(p, tiny) ==
        doctest::Approx(mean_velocity_simple(p, s.sigma_bar)).epsilon(1e-6));

  // more anaerobic energy means a faster turnpike (modest increase, so the
  // turnpike force stays below F_max and the race remains admissible)
  RunnerParams big = p;
  big.e0 *= 1.2;
  CHECK(turnpike_velocity(big, s) > v_bar);
}

TEST_CASE("distance residual is strictly decreasing on the bracket") {
  RunnerParams p = reference_params();
  SigmaProfile s = three_piece();
  double lo = std::sqrt(s.sigma_bar * p.tau) * 1.0001, hi = p.f_max * p.tau * 0.9999;
  double prev = turnpike_distance_residual(lo, p, s);
  for (int i = 1; i <= 200; ++i) {
    double v = lo + (hi - lo) * i / 200.0;
    double r = turnpike_distance_residual(v, p, s);
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("turnpike velocity stays below the simple estimate") {
  RunnerParams p = reference_params();
  SigmaProfile s = three_piece();
  CHECK(turnpike_velocity(p, s) < mean_velocity_simple(p, s.sigma_bar));

  std::mt19937 rng(99);
  std::uniform_real_distribution<double> pert(0.8, 1.2);
  for (int trial = 0; trial < 50; ++trial) {
    RunnerParams q = p;
    q.tau = p.tau * pert(rng);
    q.e0 = p.e0 * pert(rng);
    q.distance = p.distance * pert(rng);
    SigmaProfile t = s;
    t.gamma2 = s.gamma2 * pert(rng);
    t.gamma1 = s.gamma1 * pert(rng);
    try {
      CHECK(turnpike_velocity(q, t) < mean_velocity_simple(q, t.sigma_bar));
    } catch (const InfeasibleRace&) {
      // a perturbation may push the root outside the bracket; not under test
    }
  }
}

TEST_CASE("simple mean velocity monotonicities") {
  RunnerParams p = reference_params();
  RunnerParams q = p;
  q.e0 *= 1.1;
  CHECK(mean_velocity_simple(q, 22.0) > mean_velocity_simple(p, 22.0));
  q = p;
  q.tau *= 1.1;
  CHECK(mean_velocity_simple(q, 22.0) > mean_velocity_simple(p, 22.0));
  CHECK(mean_velocity_simple(p, 24.0) > mean_velocity_simple(p, 22.0));
  q = p;
  q.f_max *= 2.0;  // no effect
  CHECK(mean_velocity_simple(q, 22.0) == mean_velocity_simple(p, 22.0));
}

TEST_CASE("phase_times reproduces the reference durations") {
  RunnerParams p = reference_params();
  SigmaProfile s = three_piece();
  double v_bar = turnpike_velocity(p, s);
  PhaseTimes pt = phase_times(p, s, v_bar);
  CHECK(pt.t1 == doctest::Approx(16.95).epsilon(0.05 / 16.95));
  CHECK(pt.central == doctest::Approx(194.64).epsilon(0.5 / 194.64));
  CHECK(pt.final_phase == doctest::Approx(35.96).epsilon(0.5 / 35.96));
  CHECK_THROWS_AS(phase_times(p, s, 1.0), InfeasibleRace);
}

TEST_CASE("initial_force and the start-phase distance") {
  RunnerParams p = reference_params();
  SigmaProfile s = three_piece();
  double v_bar = turnpike_velocity(p, s);
  double t1 = phase_times(p, s, v_bar).t1;
  double f0 = initial_force(p, s, v_bar, t1);
  CHECK(f0 == doctest::Approx(8.2).epsilon(0.1 / 8.2));
  CHECK(start_phase_distance(p, f0, v_bar, t1) == doctest::Approx(111.84).epsilon(1.0 / 111.84));
}

TEST_CASE("steady start satisfies the energy balance to first order") {
  // With v0 = v_bar, a constant force f = v_bar/tau rides the turnpike from
  // t = 0, and gamma2 = t1*(v_bar^2/tau - sigma_r) holds by construction of
  // t1, so f0 -> v_bar/tau as the linearization constant A*t1 =
  // (sigma_bar - sigma_r)/(v_bar^2/tau - sigma_r) -> 0. Use a profile with
  // sigma_r close to sigma_bar to make that constant small.
  RunnerParams p = reference_params();
  SigmaProfile s = three_piece();
  s.sigma_r = 21.5;
  s.sigma_f = 21.8;
  double v_bar = turnpike_velocity(p, s);
  RunnerParams q = p;
  q.v0 = v_bar;
  double t1 = phase_times(q, s, v_bar).t1;
  double f0 = initial_force(q, s, v_bar, t1);
  double A_t1 = (s.sigma_bar - s.sigma_r) / (v_bar * v_bar / q.tau - s.sigma_r);
  CHECK(A_t1 < 0.05);
  CHECK(f0 == doctest::Approx(v_bar / q.tau).epsilon(2.0 * A_t1));
}

TEST_CASE("sprint_lambda reproduces the reference shape parameter") {
  RunnerParams p = reference_params();
  SigmaProfile s = three_piece();
  double f_bar = turnpike_velocity(p, s) / p.tau;
  double lambda = sprint_lambda(p, s, f_bar, 34.42);
  CHECK(lambda == doctest::Approx(0.39).epsilon(0.01 / 0.39));

  // the sigmoid spends exactly the budgeted energy: check the identity
  double A = (s.sigma_bar - s.sigma_f) / (s.gamma1 * p.e0);
  double rhs = p.tau * s.sigma_f / A * (1.0 - std::exp(-A * 34.42)) + p.tau * s.gamma1 * p.e0;
  double lhs = integrate(
      [&](double t) {
        double v = p.tau * sprint_force(t, p.f_max, f_bar, p.gamma_motor, lambda);
        return v * v * std::exp(-A * t);
      },
      0.0, 34.42);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
}

TEST_CASE("sprint_lambda grows with the residual energy and vanishes below it") {
  RunnerParams p = reference_params();
  SigmaProfile s = three_piece();
  double f_bar = turnpike_velocity(p, s) / p.tau;
  double prev = 0.0;
  for (double g1 : {0.15, 0.18, 0.22}) {
    SigmaProfile t = s;
    t.gamma1 = g1;
    double lambda = sprint_lambda(p, t, f_bar, 34.42);
    CHECK(lambda > prev);
    prev = lambda;
  }
  // with little residual energy the aerobic supply already covers the final
  // phase and no accelerating sigmoid exists
  SigmaProfile t = s;
  t.gamma1 = 0.10;
  CHECK_THROWS_AS(sprint_lambda(p, t, f_bar, 34.42), InfeasibleRace);
}

TEST_CASE("sprint_force anchors at f_bar and saturates at f_max") {
  double f = sprint_force(0.0, 8.0, 6.5, 0.0025, 0.39);
  CHECK(f == doctest::Approx(6.5).epsilon(1e-12));
  CHECK(sprint_force(1e7, 8.0, 6.5, 0.0025, 0.39) == doctest::Approx(8.0).epsilon(1e-6));
  for (double t : {0.0, 10.0, 20.0, 34.0})
    CHECK(sprint_force(t + 1.0, 8.0, 6.5, 0.0025, 0.39) > sprint_force(t, 8.0, 6.5, 0.0025, 0.39));
}

TEST_CASE("assemble_profile reproduces the reference chain") {
  RunnerParams p = reference_params();
  SigmaProfile s = three_piece();
  TurnpikeProfile profile = assemble_profile(p, s);
  const TurnpikeSolution& sol = profile.solution();

  CHECK(sol.f_bar == doctest::Approx(6.5).epsilon(0.02 / 6.5));
  CHECK(sol.u_bar == doctest::Approx(4.34).epsilon(0.05 / 4.34));
  CHECK(sol.dt_end == doctest::Approx(34.42).epsilon(0.5 / 34.42));
  CHECK(sol.lambda == doctest::Approx(0.39).epsilon(0.01 / 0.39));
  CHECK(sol.t2 == doctest::Approx(210.76).epsilon(0.5 / 210.76));
  CHECK(sol.t_f == doctest::Approx(245.19).epsilon(0.5 / 245.19));
  CHECK(sol.v_f == doctest::Approx(6.33).epsilon(0.05 / 6.33));
  CHECK(sol.t2 - sol.t1 == doctest::Approx(193.81).epsilon(0.5 / 193.81));

  // ordering invariant
  CHECK(0.0 < sol.t1);
  CHECK(sol.t1 < sol.t2);
  CHECK(sol.t2 < sol.t_f);
  CHECK(std::sqrt(s.sigma_bar * p.tau) < sol.v_bar);
  CHECK(sol.v_bar < p.f_max * p.tau);
}

TEST_CASE("assembled velocity is continuous and closes the distance") {
  RunnerParams p = reference_params();
  SigmaProfile s = three_piece();
  TurnpikeProfile profile = assemble_profile(p, s);
  const TurnpikeSolution& sol = profile.solution();

  CHECK(profile.velocity(sol.t1 - 1e-9) == doctest::Approx(sol.v_bar).epsilon(1e-6));
  CHECK(profile.velocity(sol.t1 + 1e-9) == doctest::Approx(sol.v_bar).epsilon(1e-6));
  CHECK(profile.velocity(sol.t2 - 1e-9) == doctest::Approx(sol.v_bar).epsilon(1e-6));
  CHECK(profile.velocity(sol.t2 + 1e-9) == doctest::Approx(sol.v_bar).epsilon(1e-6));

  double d = integrate([&](double t) { return profile.velocity(t); }, 0.0, sol.t1) +
             sol.v_bar * (sol.t2 - sol.t1) +
             integrate([&](double t) { return profile.velocity(t); }, sol.t2, sol.t_f);
  CHECK(std::abs(d - p.distance) <= 1e-6 * p.distance);
}

TEST_CASE("turnpike_with_slope shifts the estimate with the gradient sign") {
  RunnerParams p = reference_params();
  SigmaProfile s = three_piece();
  double flat = turnpike_with_slope(p, s, 0.0);
  CHECK(flat == doctest::Approx(mean_velocity_simple(p, s.sigma_bar)).epsilon(1e-12));
  CHECK(turnpike_with_slope(p, s, 0.03) < flat);
  CHECK(turnpike_with_slope(p, s, -0.03) > flat);

  // first-order sensitivity matches a central difference quotient
  double h = 1e-3;
  double slope_fd =
      (turnpike_with_slope(p, s, h) - turnpike_with_slope(p, s, -h)) / (2.0 * h);
  double h2 = 1e-5;
  double slope_fd2 =
      (turnpike_with_slope(p, s, h2) - turnpike_with_slope(p, s, -h2)) / (2.0 * h2);
  CHECK(slope_fd == doctest::Approx(slope_fd2).epsilon(1e-4));
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "pacer/model.hpp"
#include "pacer/numerics.hpp"

using namespace pacer;

namespace {

RunnerParams reference_params() { return {0.932, 8.0, 0.0025, 4651.0, 3.0, 1e-5, 1500.0}; }

SigmaProfile three_piece() { return {SigmaVariant::ThreePiece, 22.0, 20.0, 6.0, 0.15, 566.0}; }

SigmaProfile four_piece() {
  return {SigmaVariant::FourPiece, 22.0, 20.0, 6.0,
          0.15,                    2000.0, 1.0 - 2000.0 / 4651.0 - 400.0 / 4651.0, 0.8};
}

}  // namespace

TEST_CASE("parameter validation rejects bad inputs") {
  RunnerParams p = reference_params();
  CHECK_NOTHROW(p.validate());
  p.tau = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = reference_params();
  p.v0 = 10.0;  // exceeds f_max * tau
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);

  SigmaProfile s = three_piece();
  CHECK_NOTHROW(s.validate(4651.0));
  s.gamma1 = 1.5;
  CHECK_THROWS_AS(s.validate(4651.0), std::invalid_argument);
  s = three_piece();
  s.gamma2 = 4651.0;  // >= e0*(1-gamma1)
  CHECK_THROWS_AS(s.validate(4651.0), std::invalid_argument);
  s = three_piece();
  s.sigma_f = 30.0;  // above sigma_bar
  CHECK_THROWS_AS(s.validate(4651.0), std::invalid_argument);
}

TEST_CASE("sigma_eval reproduces the branch values") {
  SigmaProfile s = three_piece();
  double e0 = 4651.0;
  CHECK(sigma_eval(s, e0, e0) == doctest::Approx(6.0));      // full store: ramp-up branch
  CHECK(sigma_eval(s, 0.0, e0) == doctest::Approx(20.0));    // depleted: end-race branch
  CHECK(sigma_eval(s, 2000.0, e0) == doctest::Approx(22.0)); // mid race: maximum
  CHECK_THROWS_AS(sigma_eval(s, -1.0, e0), std::domain_error);
  CHECK_THROWS_AS(sigma_eval(s, e0 + 1.0, e0), std::domain_error);

  SigmaProfile s4 = four_piece();
  double mid = 0.5 * (s4.gamma1 + s4.gamma_plus) * e0;
  CHECK(sigma_eval(s4, mid, e0) == doctest::Approx(22.0));
  // local maximum of the extra piece exceeds sigma_bar by the bump
  CHECK(sigma_eval(s4, e0 - s4.gamma2, e0) == doctest::Approx(22.0 + s4.bump));
}

TEST_CASE("sigma is continuous and bounded on random profiles") {
  std::mt19937 rng(1234);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    double e0 = 2000.0 + 6000.0 * unif(rng);
    SigmaProfile s;
    s.variant = trial % 2 ? SigmaVariant::FourPiece : SigmaVariant::ThreePiece;
    s.sigma_bar = 15.0 + 15.0 * unif(rng);
    s.sigma_r = 2.0 + 4.0 * unif(rng);
    s.sigma_f = s.sigma_r + (s.sigma_bar - s.sigma_r) * unif(rng);
    s.gamma1 = 0.05 + 0.3 * unif(rng);
    s.gamma2 = e0 * (1.0 - s.gamma1) * (0.05 + 0.5 * unif(rng));
    s.gamma_plus = s.gamma1 + (1.0 - s.gamma2 / e0 - s.gamma1) * (0.2 + 0.6 * unif(rng));
    s.bump = 0.8;
    s.validate(e0);

    std::vector<double> edges{s.gamma1 * e0, e0 - s.gamma2};
    if (s.variant == SigmaVariant::FourPiece) edges.push_back(s.gamma_plus * e0);
    for (double edge : edges) {
      double below = sigma_eval(s, std::nextafter(edge, 0.0), e0);
      double above = sigma_eval(s, std::nextafter(edge, e0), e0);
      CHECK(std::abs(below - above) <= 1e-9);
    }
    double cap = s.sigma_bar + (s.variant == SigmaVariant::FourPiece ? s.bump : 0.0);
    for (int i = 0; i <= 50; ++i) {
      double v = sigma_eval(s, e0 * (i / 50.0), e0);
      CHECK(v >= s.sigma_r - 1e-12);
      CHECK(v <= cap + 1e-12);
    }
  }
}

TEST_CASE("smoothed sigma agrees with the exact curve away from the kinks") {
  SigmaProfile s = three_piece();
  double e0 = 4651.0, eps = 1.0;
  CHECK(sigma_eval_smooth(s, 2000.0, e0, 0.0) == sigma_eval(s, 2000.0, e0));
  for (double e : {50.0, 400.0, 2000.0, 3900.0, 4600.0}) {
    CHECK(sigma_eval_smooth(s, e, e0, eps) ==
          doctest::Approx(sigma_eval(s, e, e0)).epsilon(1e-12));
  }
  // derivative matches a central difference everywhere, including the blends
  for (double e : {697.0, 697.8, 2000.0, 4084.5, 4085.5}) {
    double h = 1e-5;
    double fd = (sigma_eval_smooth(s, e + h, e0, eps) - sigma_eval_smooth(s, e - h, e0, eps)) /
                (2.0 * h);
    CHECK(sigma_deriv_smooth(s, e, e0, eps) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("slope profile lookup uses half-open segments") {
  SlopeProfile slope;
  slope.segments = {{700.0, 1000.0, 0.03}};
  slope.validate();
  CHECK(slope.beta(699.9) == 0.0);
  CHECK(slope.beta(700.0) == 0.03);
  CHECK(slope.beta(999.9) == 0.03);
  CHECK(slope.beta(1000.0) == 0.0);
  CHECK(SlopeProfile{}.flat());

  SlopeProfile bad;
  bad.segments = {{0.0, 100.0, 0.01}, {50.0, 200.0, 0.02}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("dynamics_rhs matches direct substitution") {
  RunnerParams p = reference_params();
  SigmaProfile s = three_piece();
  SlopeProfile flat;

  State st{0.0, 3.0, 0.0, 4651.0};
  State d = dynamics_rhs(st, 0.0, p, s, flat);
  CHECK(d.x == doctest::Approx(3.0));
  CHECK(d.v == doctest::Approx(-3.0 / 0.932));
  CHECK(d.f == doctest::Approx(0.0));
  CHECK(d.e == doctest::Approx(6.0));  // sigma at a full store is sigma_r
}

TEST_CASE("dynamics_rhs equilibrium and slope shift") {
  RunnerParams p = reference_params();
  SigmaProfile s = three_piece();
  SlopeProfile flat;

  double f = 6.5, v = p.tau * f, u = f / (p.f_max - f);
  State st{100.0, v, f, 2000.0};
  State d = dynamics_rhs(st, u, p, s, flat);
  CHECK(d.v == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d.f == doctest::Approx(0.0).epsilon(1e-12));

  SlopeProfile hill;
  hill.segments = {{0.0, 1500.0, 0.03}};
  State dh = dynamics_rhs(st, u, p, s, hill);
  CHECK(dh.v - d.v == doctest::Approx(-9.81 * 0.03));
}

TEST_CASE("dynamics_rhs is linear in the control") {
  RunnerParams p = reference_params();
  SigmaProfile s = three_piece();
  SlopeProfile flat;
  State st{50.0, 5.5, 6.0, 3000.0};
  State d0 = dynamics_rhs(st, 0.0, p, s, flat);
  State d1 = dynamics_rhs(st, 1.0, p, s, flat);
  State d5 = dynamics_rhs(st, 5.0, p, s, flat);
  CHECK(d5.f - d0.f == doctest::Approx(5.0 * (d1.f - d0.f)).epsilon(1e-12));
  CHECK(d5.v == doctest::Approx(d0.v));
  CHECK(d5.e == doctest::Approx(d0.e));
}

TEST_CASE("force cannot cross f_max under the motor dynamics") {
  RunnerParams p = reference_params();
  // adversarial large oscillating control, f starting at f_max
  OdeRhs rhs = [&](double t, const std::vector<double>& y) {
    double u = 500.0 + 400.0 * std::sin(3.0 * t);
    return std::vector<double>{p.gamma_motor * (u * (p.f_max - y[0]) - y[0])};
  };
  OdePath path = integrate_ode(rhs, {p.f_max}, 0.0, 200.0, 0.001);
  for (const auto& y : path.y) CHECK(y[0] <= p.f_max + 1e-9);
}

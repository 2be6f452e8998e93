#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace pacer {

// A sign-changing interval for a scalar root-find.
struct Bracket {
  double lo;
  double hi;
  double f_lo;
  double f_hi;

  static Bracket make(const std::function<double(double)>& f, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("Bracket: lo must be < hi");
    Bracket b{lo, hi, f(lo), f(hi)};
    if (!(b.f_lo * b.f_hi <= 0.0))
      throw std::invalid_argument("Bracket: no sign change on [" + std::to_string(lo) + ", " +
                                  std::to_string(hi) + "]");
    return b;
  }
};

// Brent's method with a bisection safeguard. Guaranteed to converge for
// continuous f on a valid bracket.
inline double find_root(const std::function<double(double)>& f, Bracket br, double tol = 1e-10,
                        int max_iter = 200) {
  double a = br.lo, b = br.hi, fa = br.f_lo, fb = br.f_hi;
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (fa * fb > 0.0) throw std::invalid_argument("find_root: invalid bracket");

  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 0; iter < max_iter; ++iter) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double eps = std::numeric_limits<double>::epsilon();
    double tol1 = 2.0 * eps * std::abs(b) + 0.5 * tol;
    double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || fb == 0.0) return b;
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      // inverse quadratic interpolation / secant
      double s = fb / fa, p, q;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        double q2 = fa / fc, r = fb / fc;
        p = s * (2.0 * xm * q2 * (q2 - r) - (b - a) * (r - 1.0));
        q2 = (q2 - 1.0) * (r - 1.0) * (s - 1.0);
        q = q2;
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
    fb = f(b);
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
  }
  return b;
}

inline double find_root(const std::function<double(double)>& f, double lo, double hi,
                        double tol = 1e-10) {
  return find_root(f, Bracket::make(f, lo, hi), tol);
}

struct QuadratureSpec {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_depth = 40;
};

// Thrown when adaptive subdivision bottoms out; carries the best estimate.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double best)
      : std::runtime_error(what), best_estimate(best) {}
  double best_estimate;
};

namespace detail {

inline double simpson(double fa, double fm, double fb, double h) {
  return h / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double fa, double fm, double fb, double whole, double tol,
                               int depth, const QuadratureSpec& spec, bool& failed) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson(fa, flm, fm, m - a);
  double right = simpson(fm, frm, fb, b - m);
  double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol || depth >= spec.max_depth) {
    if (depth >= spec.max_depth && std::abs(delta) > 15.0 * tol) failed = true;
    return left + right + delta / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, spec, failed) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, spec, failed);
}

}  // namespace detail

// Adaptive Simpson quadrature of f over [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        const QuadratureSpec& spec = {}) {
  if (!(a <= b)) throw std::invalid_argument("integrate: requires a <= b");
  if (a == b) return 0.0;
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = detail::simpson(fa, fm, fb, b - a);
  double tol = std::max(spec.abs_tol, spec.rel_tol * std::abs(whole));
  bool failed = false;
  double value = detail::adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 0, spec, failed);
  if (failed) throw QuadratureError("integrate: max_depth exceeded", value);
  return value;
}

struct OdePath {
  std::vector<double> t;
  std::vector<std::vector<double>> y;  // one state vector per time sample
};

using OdeRhs = std::function<std::vector<double>(double, const std::vector<double>&)>;

// Classical fixed-step RK4. Used as the reproducible oracle integrator.
inline OdePath integrate_ode(const OdeRhs& rhs, std::vector<double> y0, double t0, double t1,
                             double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate_ode: dt must be positive");
  const std::size_t n = y0.size();
  OdePath path;
  path.t.push_back(t0);
  path.y.push_back(y0);
  double t = t0;
  std::vector<double> y = std::move(y0);
  std::vector<double> k1, k2, k3, k4, tmp(n);
  auto check_finite = [&](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x))
        throw std::runtime_error("integrate_ode: non-finite state at t=" + std::to_string(t));
  };
  while (t < t1 - 1e-14 * std::max(1.0, std::abs(t1))) {
    double h = std::min(dt, t1 - t);
    k1 = rhs(t, y);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    k2 = rhs(t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    k3 = rhs(t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
    k4 = rhs(t + h, tmp);
    for (std::size_t i = 0; i < n; ++i)
      y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    t += h;
    check_finite(y);
    path.t.push_back(t);
    path.y.push_back(y);
  }
  return path;
}

// C2 smoothed hinge: equals max(0, x) outside [-eps, eps].
inline double smooth_hinge(double x, double eps) {
  if (eps <= 0.0) return x > 0.0 ? x : 0.0;
  if (x <= -eps) return 0.0;
  if (x >= eps) return x;
  double t = (x + eps) / (2.0 * eps);
  double t3 = t * t * t;
  return 2.0 * eps * (t3 - 0.5 * t3 * t);
}

inline double smooth_hinge_deriv(double x, double eps) {
  if (eps <= 0.0) return x > 0.0 ? 1.0 : 0.0;
  if (x <= -eps) return 0.0;
  if (x >= eps) return 1.0;
  double t = (x + eps) / (2.0 * eps);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace pacer

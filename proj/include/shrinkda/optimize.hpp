#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <utility>

#include "ensemble.hpp"

namespace shrinkda {

struct ScalarMinimum {
  double x;
  double fx;
  int iterations;
  bool converged;
  double lower;  // final bracket
  double upper;
};

/// Brent's method on [a, b]: golden-section steps with parabolic refinement.
///
/// Stops when the bracket is narrower than `tol` (absolute, plus a relative
/// term near roundoff).  The endpoint b is also evaluated so a minimum on the
/// closed upper bound is found.
inline ScalarMinimum minimize_bounded(const std::function<double(double)>& f, double a, double b,
                                      double tol = 1e-10, int max_iter = 500) {
  detail::require(a < b, "minimize_bounded: empty interval");
  constexpr double kGold = 0.3819660112501051;  // (3 - sqrt 5) / 2
  const double eps = std::sqrt(std::numeric_limits<double>::epsilon());

  double x = a + kGold * (b - a);
  double w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  double lo = a, hi = b;
  int it = 0;
  bool converged = false;

  for (; it < max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double tol1 = eps * std::abs(x) + tol / 3.0;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - mid) <= tol2 - 0.5 * (hi - lo) || hi - lo < tol) {
      converged = true;
      break;
    }
    bool golden = true;
    if (std::abs(e) > tol1) {
      // parabola through (v, fv), (w, fw), (x, fx)
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (lo - x) && p < q * (hi - x)) {
        d = p / q;
        const double u = x + d;
        if (u - lo < tol2 || hi - u < tol2) d = (mid >= x) ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x >= mid) ? lo - x : hi - x;
      d = kGold * e;
    }
    const double u = (std::abs(d) >= tol1) ? x + d : x + (d > 0 ? tol1 : -tol1);
    const double fu = f(u);
    if (fu <= fx) {
      if (u >= x) lo = x; else hi = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) lo = u; else hi = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  const double fb = f(b);
  if (fb < fx) {
    x = b;
    fx = fb;
  }
  return {x, fx, it, converged, lo, hi};
}

/// Objective returning value and gradient at a point.
using GradientObjective = std::function<double(const Vector&, Vector&)>;

struct VectorMinimum {
  Vector x;
  double fx;
  double grad_norm;
  int iterations;
  bool converged;
};

/// BFGS with an Armijo backtracking line search on a smooth objective.
inline VectorMinimum minimize_bfgs(const GradientObjective& f, Vector x, double grad_tol = 1e-8,
                                   int max_iter = 500) {
  const Index n = x.size();
  Vector g(n);
  double fx = f(x, g);
  Matrix hinv = Matrix::Identity(n, n);
  int it = 0;
  for (; it < max_iter; ++it) {
    if (g.norm() < grad_tol) return {x, fx, g.norm(), it, true};
    Vector dir = -hinv * g;
    double slope = g.dot(dir);
    if (slope >= 0.0) {
      hinv.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double step = 1.0;
    Vector xn(n), gn(n);
    double fn = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + step * dir;
      fn = f(xn, gn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const Vector s = xn - x;
    const Vector y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm()) {
      if (it == 0) hinv *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Vector hy = hinv * y;
      hinv += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) -
              rho * (hy * s.transpose() + s * hy.transpose());
    }
    x = std::move(xn);
    g = std::move(gn);
    fx = fn;
  }
  return {x, fx, g.norm(), it, g.norm() < grad_tol};
}

}  // namespace shrinkda

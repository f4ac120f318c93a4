#pragma once

#include <functional>

#include "../ensemble.hpp"

namespace shrinkda {

using Tendency = std::function<Vector(const Vector&)>;

/// Classical fourth-order Runge-Kutta step.
inline Vector rk4_step(const Tendency& f, const Vector& x, double dt) {
  detail::require(dt > 0.0, "rk4_step: dt must be positive");
  const Vector k1 = f(x);
  const Vector k2 = f(x + 0.5 * dt * k1);
  const Vector k3 = f(x + 0.5 * dt * k2);
  const Vector k4 = f(x + dt * k3);
  Vector out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!k1.allFinite() || !k2.allFinite() || !k3.allFinite() || !k4.allFinite() || !out.allFinite())
    throw NumericalError("model blow-up");
  return out;
}

inline Vector rk4_integrate(const Tendency& f, Vector x, double dt, int steps) {
  for (int s = 0; s < steps; ++s) x = rk4_step(f, x, dt);
  return x;
}

}  // namespace shrinkda

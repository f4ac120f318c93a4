#pragma once

#include "../ensemble.hpp"

namespace shrinkda {

/// dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F, indices cyclic.
inline Vector lorenz96_tendency(const Vector& x, double forcing) {
  const Index n = x.size();
  detail::require(n >= 4, "lorenz96: state length must be at least 4");
  Vector dx(n);
  for (Index i = 0; i < n; ++i) {
    const Index ip1 = (i + 1) % n;
    const Index im1 = (i + n - 1) % n;
    const Index im2 = (i + n - 2) % n;
    dx[i] = (x[ip1] - x[im2]) * x[im1] - x[i] + forcing;
  }
  return dx;
}

}  // namespace shrinkda

#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "../ensemble.hpp"
#include "rk4.hpp"

namespace shrinkda {

/// Interior nodes of the unit square; boundary nodes are not part of the state.
///
/// Node (i, j) sits at x = (i + 1) dx, y = (j + 1) dy and is stored at
/// state index i + d1 * j.
struct QgGrid {
  Index d1 = 31;
  Index d2 = 31;
  double lx = 1.0;
  double ly = 1.0;

  QgGrid() = default;
  QgGrid(Index nx, Index ny, double lx_ = 1.0, double ly_ = 1.0) : d1(nx), d2(ny), lx(lx_), ly(ly_) {
    detail::require(d1 >= 3 && d2 >= 3, "QgGrid: at least 3 interior nodes per direction");
    detail::require(lx > 0.0 && ly > 0.0, "QgGrid: domain lengths must be positive");
  }

  double dx() const { return lx / static_cast<double>(d1 + 1); }
  double dy() const { return ly / static_cast<double>(d2 + 1); }
  Index size() const { return d1 * d2; }
  double x(Index i) const { return static_cast<double>(i + 1) * dx(); }
  double y(Index j) const { return static_cast<double>(j + 1) * dy(); }
  Index index(Index i, Index j) const { return i + d1 * j; }
};

using GridField = Eigen::Map<const Matrix>;

namespace detail {

inline void check_field(const Vector& f, const QgGrid& g, const char* what) {
  if (f.size() != g.size()) throw InvalidArgument(std::string(what) + ": field does not match grid");
}

inline Matrix as_grid(const Vector& f, const QgGrid& g) {
  return Eigen::Map<const Matrix>(f.data(), g.d1, g.d2);
}

inline Vector as_state(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

/// Field surrounded by a ring of zeros (homogeneous Dirichlet ghosts).
inline Matrix zero_padded(const Vector& f, const QgGrid& g) {
  Matrix p = Matrix::Zero(g.d1 + 2, g.d2 + 2);
  p.block(1, 1, g.d1, g.d2) = as_grid(f, g);
  return p;
}

}  // namespace detail

/// Arakawa Jacobian on padded arrays; returns the interior nodes only.
///
/// Average of the three second-order forms (++ , +x, x+); with a zero ring
/// on psi this conserves sum(psi J) and sum(omega J) exactly.
inline Matrix arakawa_jacobian_padded(const Matrix& p, const Matrix& w, double dx, double dy) {
  if (p.rows() != w.rows() || p.cols() != w.cols()) throw InvalidArgument("arakawa_jacobian: shape mismatch");
  detail::require(p.rows() >= 3 && p.cols() >= 3, "arakawa_jacobian: padded field too small");
  const Index n1 = p.rows() - 2, n2 = p.cols() - 2;
  Matrix j(n1, n2);
  const double scale = 1.0 / (12.0 * dx * dy);
  for (Index b = 1; b <= n2; ++b) {
    for (Index a = 1; a <= n1; ++a) {
      const double j1 = (p(a + 1, b) - p(a - 1, b)) * (w(a, b + 1) - w(a, b - 1)) -
                        (p(a, b + 1) - p(a, b - 1)) * (w(a + 1, b) - w(a - 1, b));
      const double j2 = p(a + 1, b) * (w(a + 1, b + 1) - w(a + 1, b - 1)) -
                        p(a - 1, b) * (w(a - 1, b + 1) - w(a - 1, b - 1)) -
                        p(a, b + 1) * (w(a + 1, b + 1) - w(a - 1, b + 1)) +
                        p(a, b - 1) * (w(a + 1, b - 1) - w(a - 1, b - 1));
      const double j3 = w(a, b + 1) * (p(a + 1, b + 1) - p(a - 1, b + 1)) -
                        w(a, b - 1) * (p(a + 1, b - 1) - p(a - 1, b - 1)) -
                        w(a + 1, b) * (p(a + 1, b + 1) - p(a + 1, b - 1)) +
                        w(a - 1, b) * (p(a - 1, b + 1) - p(a - 1, b - 1));
      j(a - 1, b - 1) = (j1 + j2 + j3) * scale;
    }
  }
  return j;
}

/// J(psi, omega) = psi_x omega_y - psi_y omega_x with zero boundary values.
inline Vector arakawa_jacobian(const Vector& psi, const Vector& omega, const QgGrid& g) {
  if (psi.size() != omega.size()) throw InvalidArgument("arakawa_jacobian: shape mismatch");
  detail::check_field(psi, g, "arakawa_jacobian");
  return detail::as_state(
      arakawa_jacobian_padded(detail::zero_padded(psi, g), detail::zero_padded(omega, g), g.dx(), g.dy()));
}

/// 5-point Laplacian with zero ghost values.
inline Vector laplacian(const Vector& f, const QgGrid& g) {
  detail::check_field(f, g, "laplacian");
  const Matrix p = detail::zero_padded(f, g);
  const double ix2 = 1.0 / (g.dx() * g.dx()), iy2 = 1.0 / (g.dy() * g.dy());
  const Index n1 = g.d1, n2 = g.d2;
  const Matrix c = p.block(1, 1, n1, n2);
  const Matrix out = ix2 * (p.block(2, 1, n1, n2) + p.block(0, 1, n1, n2) - 2.0 * c) +
                     iy2 * (p.block(1, 2, n1, n2) + p.block(1, 0, n1, n2) - 2.0 * c);
  return detail::as_state(out);
}

/// Central difference in x with zero ghosts.
inline Vector ddx(const Vector& f, const QgGrid& g) {
  detail::check_field(f, g, "ddx");
  const Matrix p = detail::zero_padded(f, g);
  const Matrix out = (p.block(2, 1, g.d1, g.d2) - p.block(0, 1, g.d1, g.d2)) / (2.0 * g.dx());
  return detail::as_state(out);
}

inline constexpr double kPoissonResidualTolerance = 1e-10;

/// Exact inverse of the Dirichlet 5-point Laplacian by sine-transform diagonalization.
///
/// The DST-I matrix S_ik = sqrt(2/(n+1)) sin(pi (i+1)(k+1)/(n+1)) is symmetric
/// and orthogonal and diagonalizes the 1-D second difference, so
/// psi = Sx [ (Sx omega Sy) / (lx_k + ly_l) ] Sy.
class PoissonSolver {
 public:
  explicit PoissonSolver(const QgGrid& g) : grid_(g), sx_(sine(g.d1)), sy_(sine(g.d2)), inv_(g.d1, g.d2) {
    const Vector ex = eigenvalues(g.d1, g.dx());
    const Vector ey = eigenvalues(g.d2, g.dy());
    for (Index j = 0; j < g.d2; ++j)
      for (Index i = 0; i < g.d1; ++i) inv_(i, j) = 1.0 / (ex[i] + ey[j]);
  }

  const QgGrid& grid() const { return grid_; }

  /// Throws NumericalError when the residual check fails.
  Vector solve(const Vector& omega) const {
    detail::check_field(omega, grid_, "poisson_solve");
    if (!omega.allFinite()) throw NumericalError("poisson_solve: non-finite vorticity");
    const Matrix w = detail::as_grid(omega, grid_);
    const Matrix hat = (sx_ * w * sy_).cwiseProduct(inv_);
    Vector psi = detail::as_state(sx_ * hat * sy_);
    const double scale = omega.lpNorm<Eigen::Infinity>();
    const double res = (laplacian(psi, grid_) - omega).lpNorm<Eigen::Infinity>();
    if (!(res <= kPoissonResidualTolerance * scale + 1e-300))
      throw NumericalError("poisson_solve: residual " + std::to_string(res) + " exceeds tolerance");
    return psi;
  }

 private:
  static Matrix sine(Index n) {
    Matrix s(n, n);
    const double c = std::sqrt(2.0 / static_cast<double>(n + 1));
    for (Index k = 0; k < n; ++k)
      for (Index i = 0; i < n; ++i)
        s(i, k) = c * std::sin(std::numbers::pi * static_cast<double>((i + 1) * (k + 1)) / static_cast<double>(n + 1));
    return s;
  }

  static Vector eigenvalues(Index n, double h) {
    Vector e(n);
    for (Index k = 0; k < n; ++k) {
      const double s = std::sin(std::numbers::pi * static_cast<double>(k + 1) / (2.0 * static_cast<double>(n + 1)));
      e[k] = -4.0 * s * s / (h * h);
    }
    return e;
  }

  QgGrid grid_;
  Matrix sx_, sy_, inv_;
};

inline Vector poisson_solve(const Vector& omega, const QgGrid& g) { return PoissonSolver(g).solve(omega); }

/// Coefficients of the single-layer vorticity equation
///   omega_t = -s_J r J(psi, omega) - beta psi_x + s_v v lap^2 psi - mu lap psi + tau sin(2 pi y / ly).
///
/// lap^2 psi equals lap omega here, so s_v = +1 is ordinary (dissipative)
/// viscosity.  The defaults keep dt = 1.27 stable on grids up to 127^2.
struct QgParams {
  double r = 0.02;
  double beta = 1.0;
  double v = 1e-5;
  double mu = 1e-2;
  double tau = 1e-2;
  double dt = 1.27;
  double jacobian_sign = 1.0;
  double viscosity_sign = 1.0;

  void validate() const {
    detail::require(dt > 0.0, "QgParams: dt must be positive");
    detail::require(std::isfinite(r) && std::isfinite(beta) && std::isfinite(v) && std::isfinite(mu) &&
                        std::isfinite(tau),
                    "QgParams: coefficients must be finite");
    detail::require(jacobian_sign == 1.0 || jacobian_sign == -1.0, "QgParams: jacobian_sign must be +1 or -1");
    detail::require(viscosity_sign == 1.0 || viscosity_sign == -1.0, "QgParams: viscosity_sign must be +1 or -1");
  }
};

class QgModel {
 public:
  QgModel(const QgGrid& g, const QgParams& p) : grid_(g), params_(p), poisson_(g), forcing_(g.size()) {
    params_.validate();
    for (Index j = 0; j < g.d2; ++j)
      for (Index i = 0; i < g.d1; ++i)
        forcing_[g.index(i, j)] = params_.tau * std::sin(2.0 * std::numbers::pi * g.y(j) / g.ly);
  }

  const QgGrid& grid() const { return grid_; }
  const QgParams& params() const { return params_; }
  const PoissonSolver& poisson() const { return poisson_; }

  Vector tendency(const Vector& omega) const {
    detail::check_field(omega, grid_, "qg_tendency");
    const Vector psi = poisson_.solve(omega);
    const Vector lap_psi = laplacian(psi, grid_);
    Vector out = forcing_ - params_.mu * lap_psi;
    if (params_.r != 0.0)
      out -= (params_.jacobian_sign * params_.r) * arakawa_jacobian(psi, omega, grid_);
    if (params_.beta != 0.0) out -= params_.beta * ddx(psi, grid_);
    if (params_.v != 0.0) out += (params_.viscosity_sign * params_.v) * laplacian(lap_psi, grid_);
    return out;
  }

  Vector step(const Vector& omega) const {
    return rk4_step([this](const Vector& w) { return tendency(w); }, omega, params_.dt);
  }

 private:
  QgGrid grid_;
  QgParams params_;
  PoissonSolver poisson_;
  Vector forcing_;
};

inline Vector qg_tendency(const Vector& omega, const QgGrid& g, const QgParams& p) {
  return QgModel(g, p).tendency(omega);
}

/// omega_0 = sin(4xy) cos(2xy) + sin(2xy) + cos(4xy) at the interior nodes.
inline double qg_initial_vorticity_at(double x, double y) {
  const double s = x * y;
  return std::sin(4.0 * s) * std::cos(2.0 * s) + std::sin(2.0 * s) + std::cos(4.0 * s);
}

inline Vector qg_initial_vorticity(const QgGrid& g) {
  Vector out(g.size());
  for (Index j = 0; j < g.d2; ++j)
    for (Index i = 0; i < g.d1; ++i) out[g.index(i, j)] = qg_initial_vorticity_at(g.x(i), g.y(j));
  return out;
}

}  // namespace shrinkda

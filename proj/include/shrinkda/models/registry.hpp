#pragma once

#include <charconv>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "lorenz96.hpp"
#include "qg.hpp"
#include "rk4.hpp"

namespace shrinkda {

/// Uniform interface over the forward models.
struct ModelDefinition {
  std::string name;
  Index nstate = 0;
  double dt = 0.0;
  Tendency tendency;
  /// One time step of length dt.
  std::function<Vector(const Vector&)> step;
  std::function<Vector()> initial_state;
  std::optional<QgGrid> grid;
  std::optional<QgParams> qg_params;
  std::optional<double> forcing;

  Vector advance(Vector x, int steps) const {
    for (int s = 0; s < steps; ++s) x = step(x);
    if (x.size() != nstate) throw NumericalError("model step changed the state length");
    return x;
  }

  /// Euclidean distance between state components: grid coordinates for QG,
  /// cyclic index distance for Lorenz-96.
  double distance(Index a, Index b) const {
    if (grid) {
      const double dxv = std::abs(static_cast<double>(a % grid->d1 - b % grid->d1)) * grid->dx();
      const double dyv = std::abs(static_cast<double>(a / grid->d1 - b / grid->d1)) * grid->dy();
      return std::hypot(dxv, dyv);
    }
    const Index d = std::abs(a - b);
    return static_cast<double>(std::min(d, nstate - d));
  }
};

inline constexpr double kLorenz96Dt = 0.05;

inline ModelDefinition make_lorenz96(Index n, double forcing = 8.0, double dt = kLorenz96Dt) {
  detail::require(n >= 4, "lorenz96: state length must be at least 4");
  detail::require(dt > 0.0, "lorenz96: dt must be positive");
  ModelDefinition m;
  m.name = "l96-" + std::to_string(n);
  m.nstate = n;
  m.dt = dt;
  m.forcing = forcing;
  m.tendency = [forcing](const Vector& x) { return lorenz96_tendency(x, forcing); };
  m.step = [f = m.tendency, dt](const Vector& x) { return rk4_step(f, x, dt); };
  m.initial_state = [n, forcing] {
    Vector x = Vector::Constant(n, forcing);
    x[0] += 0.01;
    return x;
  };
  return m;
}

inline ModelDefinition make_qg(const QgGrid& g, const QgParams& p) {
  auto model = std::make_shared<const QgModel>(g, p);
  ModelDefinition m;
  m.name = "qg-" + std::to_string(g.d1 + 2);
  m.nstate = g.size();
  m.dt = p.dt;
  m.grid = g;
  m.qg_params = p;
  m.tendency = [model](const Vector& w) { return model->tendency(w); };
  m.step = [model](const Vector& w) { return model->step(w); };
  m.initial_state = [g] { return qg_initial_vorticity(g); };
  return m;
}

namespace detail {

inline std::optional<Index> parse_suffix(const std::string& key, const std::string& prefix) {
  if (key.rfind(prefix, 0) != 0) return std::nullopt;
  const char* first = key.data() + prefix.size();
  const char* last = key.data() + key.size();
  Index value = 0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last) return std::nullopt;
  return value;
}

}  // namespace detail

/// "l96-<n>" (F = 8) or "qg-<n>" with n - 2 interior nodes per direction.
/// The named instances are l96-40, qg-33, qg-65 and qg-129.
inline ModelDefinition make_model(const std::string& key, const QgParams& qg = {}) {
  if (auto n = detail::parse_suffix(key, "l96-")) {
    if (*n < 4) throw InvalidArgument("unknown model '" + key + "' (lorenz96 needs n >= 4)");
    return make_lorenz96(*n);
  }
  if (auto n = detail::parse_suffix(key, "qg-")) {
    if (*n < 5) throw InvalidArgument("unknown model '" + key + "' (qg needs n >= 5)");
    return make_qg(QgGrid(*n - 2, *n - 2), qg);
  }
  throw InvalidArgument("unknown model '" + key + "'");
}

}  // namespace shrinkda

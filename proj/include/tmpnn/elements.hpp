#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tmpnn/error.hpp"
#include "tmpnn/taylor_map.hpp"

namespace tmpnn {

enum class ElementKind { drift, quadrupole, sbend, sextupole, hcorrector, vcorrector, monitor, marker };

inline const char* to_string(ElementKind k) {
  switch (k) {
    case ElementKind::drift: return "drift";
    case ElementKind::quadrupole: return "quadrupole";
    case ElementKind::sbend: return "sbend";
    case ElementKind::sextupole: return "sextupole";
    case ElementKind::hcorrector: return "hcorrector";
    case ElementKind::vcorrector: return "vcorrector";
    case ElementKind::monitor: return "monitor";
    case ElementKind::marker: return "marker";
  }
  return "?";
}

inline bool element_kind_from_string(const std::string& s, ElementKind& out) {
  for (auto k : {ElementKind::drift, ElementKind::quadrupole, ElementKind::sbend,
                 ElementKind::sextupole, ElementKind::hcorrector, ElementKind::vcorrector,
                 ElementKind::monitor, ElementKind::marker}) {
    if (s == to_string(k)) {
      out = k;
      return true;
    }
  }
  return false;
}

// One lattice element.  `strength` is k1 [1/m^2] for quadrupoles, k2 [1/m^3]
// for sextupoles, the bending angle for sbends and the kick for correctors.
// `at` positions a monitor inside the preceding drift (negative: unset).
struct ElementSpec {
  std::string name;
  ElementKind kind = ElementKind::drift;
  double length = 0.0;
  double strength = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  bool parametric = false;
  double at = -1.0;

  friend bool operator==(const ElementSpec&, const ElementSpec&) = default;
};

// Right-hand side F of dX/ds = F(X), a polynomial field with constant
// coefficients.  `field` maps the n coordinates to their derivatives.
struct OdeRhs {
  TaylorMap field;
};

enum class SliceScheme { midpoint, yoshida4 };

struct SextupoleOptions {
  int slices = 4;
  SliceScheme scheme = SliceScheme::yoshida4;
};

namespace detail {

inline void check_dim(int n, const char* who) {
  if (n != 2 && n != 4) throw ShapeError(std::string(who) + ": n must be 2 or 4");
}

// 2x2 transfer matrix of x'' = -k x over length L.
inline Eigen::Matrix2d plane_matrix(double L, double k) {
  Eigen::Matrix2d m;
  if (k > 0) {
    const double s = std::sqrt(k);
    m << std::cos(s * L), std::sin(s * L) / s, -s * std::sin(s * L), std::cos(s * L);
  } else if (k < 0) {
    const double s = std::sqrt(-k);
    m << std::cosh(s * L), std::sinh(s * L) / s, s * std::sinh(s * L), std::cosh(s * L);
  } else {
    m << 1.0, L, 0.0, 1.0;
  }
  return m;
}

inline TaylorMap linear_map(int n, int order, const Eigen::Matrix2d& mx, const Eigen::Matrix2d& my) {
  auto m = TaylorMap::identity(n, order);
  auto w1 = m.weights(1);
  w1.block<2, 2>(0, 0) = mx;
  if (n == 4) w1.block<2, 2>(2, 2) = my;
  return m;
}

inline void check_length(double L, const char* who) {
  if (!(L >= 0.0) || !std::isfinite(L))
    throw BuildError(std::string(who) + ": length must be finite and non-negative");
}

}  // namespace detail

inline TaylorMap drift_map(double L, int n, int order) {
  detail::check_dim(n, "drift_map");
  detail::check_length(L, "drift_map");
  const Eigen::Matrix2d d = detail::plane_matrix(L, 0.0);
  return detail::linear_map(n, order, d, d);
}

// Positive k1 focuses horizontally and defocuses vertically.
inline TaylorMap quad_map(double L, double k1, int n, int order) {
  detail::check_dim(n, "quad_map");
  detail::check_length(L, "quad_map");
  if (!std::isfinite(k1)) throw BuildError("quad_map: strength must be finite");
  return detail::linear_map(n, order, detail::plane_matrix(L, k1), detail::plane_matrix(L, -k1));
}

// Quadrupole with its strength k as an extra input after the phase-space
// coordinates.  The series in k is kept to total degree `order`.  With
// `zero_xp_k` the second-order coefficient of x'*k in the x row is left at
// zero instead of -L^3/6.
inline TaylorMap parametric_quad_map(double L, int n, int order, bool zero_xp_k = false) {
  detail::check_dim(n, "parametric_quad_map");
  detail::check_length(L, "parametric_quad_map");
  if (order < 2) throw ShapeError("parametric_quad_map: order must be at least 2");
  const int n_in = n + 1;
  TaylorMap m(n_in, n, order);
  std::vector<int> e(static_cast<std::size_t>(n_in), 0);
  auto put = [&](int row, int var, int kpow, double value) {
    std::fill(e.begin(), e.end(), 0);
    e[static_cast<std::size_t>(var)] = 1;
    e[static_cast<std::size_t>(n)] = kpow;
    m.coefficient(row, e) = value;
  };
  for (int plane = 0; plane < n / 2; ++plane) {
    const double sign = plane == 0 ? -1.0 : 1.0;  // (-k)^m for x, (+k)^m for y
    const int xi = 2 * plane;
    const int pi = xi + 1;
    double cpow = 1.0;
    double fact = 1.0;  // (2m)!
    double lpow = 1.0;  // L^(2m)
    for (int mm = 0; mm + 1 <= order; ++mm) {
      if (mm > 0) {
        cpow *= sign;
        fact *= (2.0 * mm - 1.0) * (2.0 * mm);
        lpow *= L * L;
      }
      const double c = cpow * lpow / fact;                 // x <- x0
      const double s = cpow * lpow * L / (fact * (2.0 * mm + 1.0));  // x <- x0'
      put(xi, xi, mm, c);
      put(xi, pi, mm, s);
      put(pi, pi, mm, c);
      // x' <- x0 picks up one more factor of the signed strength
      if (mm + 2 <= order) put(pi, xi, mm + 1, sign * s);
    }
    if (zero_xp_k && order >= 2) put(xi, pi, 1, 0.0);
  }
  return m;
}

// Horizontal weak focusing with k = (angle/L)^2; vertical plane is a drift.
inline TaylorMap sbend_map(double L, double angle, int n, int order) {
  detail::check_dim(n, "sbend_map");
  if (!(L > 0.0) || !std::isfinite(L)) throw BuildError("sbend_map: length must be positive");
  if (!std::isfinite(angle)) throw BuildError("sbend_map: angle must be finite");
  const double h = angle / L;
  return detail::linear_map(n, order, detail::plane_matrix(L, h * h), detail::plane_matrix(L, 0.0));
}

// Thin zero-length kicks added to x' and y'.
inline TaylorMap corrector_map(double kick_x, double kick_y, int n, int order = 1) {
  detail::check_dim(n, "corrector_map");
  if (!std::isfinite(kick_x) || !std::isfinite(kick_y))
    throw BuildError("corrector_map: kicks must be finite");
  if (n == 2 && kick_y != 0.0) throw ShapeError("corrector_map: vertical kick needs n = 4");
  auto m = TaylorMap::identity(n, order);
  m.weights(0)(1, 0) = kick_x;
  if (n == 4) m.weights(0)(3, 0) = kick_y;
  return m;
}

namespace detail {

// Thin sextupole kick of integrated strength k2*ell.
inline TaylorMap sextupole_kick(double k2l, int order) {
  auto m = TaylorMap::identity(4, order);
  m.coefficient(1, {2, 0, 0, 0}) = -0.5 * k2l;
  m.coefficient(1, {0, 0, 2, 0}) = 0.5 * k2l;
  m.coefficient(3, {1, 0, 1, 0}) = k2l;
  return m;
}

inline TaylorMap dkd(double h, double k2, int order) {
  const Eigen::Matrix2d d = plane_matrix(0.5 * h, 0.0);  // h < 0 for the middle Yoshida step
  const auto half = linear_map(4, order, d, d);
  return compose(compose(half, sextupole_kick(k2 * h, order)), half);
}

}  // namespace detail

inline TaylorMap sextupole_map(double L, double k2, int n, int order, SextupoleOptions opt = {}) {
  detail::check_dim(n, "sextupole_map");
  detail::check_length(L, "sextupole_map");
  if (!std::isfinite(k2)) throw BuildError("sextupole_map: strength must be finite");
  if (opt.slices < 1) throw BuildError("sextupole_map: slices must be at least 1");
  if (k2 == 0.0 || L == 0.0) return drift_map(L, n, order);
  if (n != 4) throw ShapeError("sextupole_map: a sextupole couples the planes and needs n = 4");
  if (order < 2) throw ShapeError("sextupole_map: order must be at least 2");
  const double ell = L / opt.slices;
  TaylorMap step;
  if (opt.scheme == SliceScheme::midpoint) {
    step = detail::dkd(ell, k2, order);
  } else {
    const double cbrt2 = std::cbrt(2.0);
    const double w1 = 1.0 / (2.0 - cbrt2);
    const double w0 = -cbrt2 / (2.0 - cbrt2);
    const auto outer = detail::dkd(w1 * ell, k2, order);
    step = compose(compose(outer, detail::dkd(w0 * ell, k2, order)), outer);
  }
  auto m = step;
  for (int i = 1; i < opt.slices; ++i) m = compose(m, step);
  return m;
}

// Integrates dW/ds = F(M(s)) from the identity at s = 0 to s = L with fixed
// step classical RK4.  F is the field of `rhs`, lifted to `order`.
inline TaylorMap ode_to_map(const OdeRhs& rhs, double L, int order, int rk4_steps) {
  const auto& f = rhs.field;
  if (f.n_in() != f.n_out()) throw ShapeError("ode_to_map: field must be square");
  if (f.order() > order) throw ShapeError("ode_to_map: field degree exceeds map order");
  if (rk4_steps < 1) throw BuildError("ode_to_map: step count must be at least 1");
  detail::check_length(L, "ode_to_map");
  const int n = f.n_in();
  TaylorMap field(n, n, order);
  field.coefficients().leftCols(f.coefficients().cols()) = f.coefficients();

  auto m = TaylorMap::identity(n, order);
  const double h = L / rk4_steps;
  auto deriv = [&](const Eigen::MatrixXd& w) {
    return compose(TaylorMap(n, n, order, w), field).coefficients();
  };
  for (int s = 0; s < rk4_steps; ++s) {
    const Eigen::MatrixXd& w = m.coefficients();
    const Eigen::MatrixXd k1 = deriv(w);
    const Eigen::MatrixXd k2 = deriv(w + 0.5 * h * k1);
    const Eigen::MatrixXd k3 = deriv(w + 0.5 * h * k2);
    const Eigen::MatrixXd k4 = deriv(w + h * k3);
    m.coefficients() += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!m.is_finite()) throw DivergenceError("ode_to_map: non-finite weights", static_cast<std::size_t>(s + 1));
  }
  return m;
}

// Field of x'' = -k x (and y'' = +k y when n = 4).
inline OdeRhs quad_rhs(double k1, int n) {
  detail::check_dim(n, "quad_rhs");
  TaylorMap f(n, n, 1);
  auto w1 = f.weights(1);
  w1(0, 1) = 1.0;
  w1(1, 0) = -k1;
  if (n == 4) {
    w1(2, 3) = 1.0;
    w1(3, 2) = k1;
  }
  return {f};
}

inline OdeRhs sextupole_rhs(double k2) {
  TaylorMap f(4, 4, 2);
  f.weights(1)(0, 1) = 1.0;
  f.weights(1)(2, 3) = 1.0;
  f.coefficient(1, {2, 0, 0, 0}) = -0.5 * k2;
  f.coefficient(1, {0, 0, 2, 0}) = 0.5 * k2;
  f.coefficient(3, {1, 0, 1, 0}) = k2;
  return {f};
}

// shift(+d) o map o shift(-d), exact: affine substitution keeps degrees.
// Extra parameter inputs of `map` are left untouched.
inline TaylorMap apply_misalignment(const TaylorMap& map, double dx, double dy) {
  if (dx == 0.0 && dy == 0.0) return map;
  const int n = map.n_out();
  detail::check_dim(n, "apply_misalignment");
  if (n == 2 && dy != 0.0) throw ShapeError("apply_misalignment: vertical offset needs n = 4");
  auto in = TaylorMap::identity(map.n_in(), map.order());
  auto out = TaylorMap::identity(n, map.order());
  in.weights(0)(0, 0) = -dx;
  out.weights(0)(0, 0) = dx;
  if (n == 4) {
    in.weights(0)(2, 0) = -dy;
    out.weights(0)(2, 0) = dy;
  }
  return compose(compose(in, map), out);
}

}  // namespace tmpnn

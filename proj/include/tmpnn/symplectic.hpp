#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "tmpnn/error.hpp"
#include "tmpnn/polynomial.hpp"
#include "tmpnn/taylor_map.hpp"

namespace tmpnn {

// Symplectic form for coordinates ordered as (x, x', y, y', ...): one
// [[0, 1], [-1, 0]] block per plane.  This is the canonical [[0, I], [-I, 0]]
// with rows and columns permuted to match the interleaved storage.
class SymplecticForm {
 public:
  explicit SymplecticForm(int dim) : dim_(dim) {
    if (dim < 2 || dim % 2 != 0) throw ShapeError("SymplecticForm: dimension must be even");
  }

  int dim() const { return dim_; }

  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(dim_, dim_);
    for (int p = 0; p < dim_; p += 2) {
      j(p, p + 1) = 1.0;
      j(p + 1, p) = -1.0;
    }
    return j;
  }

  // Only nonzero of row i: J(i, partner(i)) = sign(i).
  static int partner(int i) { return i % 2 == 0 ? i + 1 : i - 1; }
  static double sign(int i) { return i % 2 == 0 ? 1.0 : -1.0; }

 private:
  int dim_;
};

namespace detail {

inline void check_symplectic_shape(const TaylorMap& map) {
  if (map.n_out() % 2 != 0) throw ShapeError("symplectic: odd phase-space dimension");
  if (map.n_in() < map.n_out())
    throw ShapeError("symplectic: map has fewer inputs than phase-space outputs");
}

// G = J * DM, where DM holds derivatives with respect to the first n_out inputs.
inline PolyMatrix j_times(const PolyMatrix& dm) {
  PolyMatrix g = dm;
  for (int i = 0; i < dm.rows(); ++i) {
    const int p = SymplecticForm::partner(i);
    for (int b = 0; b < dm.cols(); ++b) {
      g(i, b) = dm(p, b);
      g(i, b) *= SymplecticForm::sign(i);
    }
  }
  return g;
}

inline PolyMatrix phase_jacobian(const TaylorMap& map) {
  const PolyMatrix full = jacobian(map);
  const int n = map.n_out();
  PolyMatrix dm(n, n, map.n_in(), map.order() - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) dm(i, j) = full(i, j);
  return dm;
}

}  // namespace detail

// DM^T J DM - J as polynomials of degree 2(k-1) over all map inputs.  Extra
// parameter inputs are carried inside the coefficients; DM only
// differentiates with respect to the phase-space coordinates.
inline PolyMatrix symplectic_residual(const TaylorMap& map) {
  detail::check_symplectic_shape(map);
  const int n = map.n_out();
  const PolyMatrix dm = detail::phase_jacobian(map);
  const PolyMatrix g = detail::j_times(dm);
  const int deg = 2 * (map.order() - 1);
  PolyMatrix r(n, n, map.n_in(), deg);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      auto& rab = r(a, b);
      for (int i = 0; i < n; ++i) rab += dm(i, a) * g(i, b);
      if (b == SymplecticForm::partner(a)) rab.coefficients()[0] -= SymplecticForm::sign(a);
    }
  }
  return r;
}

// Sum of squares of every residual coefficient, both antisymmetric halves
// included.
inline double symplectic_penalty(const TaylorMap& map) {
  const PolyMatrix r = symplectic_residual(map);
  double s = 0.0;
  for (int a = 0; a < r.rows(); ++a)
    for (int b = 0; b < r.cols(); ++b) s += r(a, b).coefficients().squaredNorm();
  return s;
}

// dS/dW for every coefficient of the map, same shape as map.coefficients().
//   dS/dc(l, mu) = 4 sum_{a,b} < R_ab , d_a m_mu * G_lb >
// where <,> is the coefficient inner product and G = J DM.
inline Eigen::MatrixXd penalty_gradient(const TaylorMap& map) {
  detail::check_symplectic_shape(map);
  const int n = map.n_out();
  const PolyMatrix dm = detail::phase_jacobian(map);
  const PolyMatrix g = detail::j_times(dm);
  const PolyMatrix r = symplectic_residual(map);
  const auto& big = r(0, 0).basis();
  const auto& small = dm(0, 0).basis();
  const std::size_t ns = small.size();

  // h[a][l](nu) = sum_b sum_rho G_lb(rho) R_ab(nu * rho)
  std::vector<Eigen::VectorXd> h(static_cast<std::size_t>(n * n), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ns)));
  for (int a = 0; a < n; ++a) {
    for (int l = 0; l < n; ++l) {
      auto& out = h[static_cast<std::size_t>(a * n + l)];
      for (int b = 0; b < n; ++b) {
        const auto& rc = r(a, b).coefficients();
        const auto& gc = g(l, b).coefficients();
        for (std::size_t rho = 0; rho < ns; ++rho) {
          const double gv = gc[static_cast<Eigen::Index>(rho)];
          if (gv == 0.0) continue;
          for (std::size_t nu = 0; nu < ns; ++nu)
            out[static_cast<Eigen::Index>(nu)] += gv * rc[static_cast<Eigen::Index>(big.product(nu, rho))];
        }
      }
    }
  }

  const auto& basis = map.basis();
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(map.n_out(), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t mu = 1; mu < basis.size(); ++mu) {
    for (int a = 0; a < n; ++a) {
      const auto d = basis.derivative(mu, a);
      if (d.factor == 0) continue;
      for (int l = 0; l < n; ++l)
        grad(l, static_cast<Eigen::Index>(mu)) +=
            4.0 * d.factor * h[static_cast<std::size_t>(a * n + l)][static_cast<Eigen::Index>(d.index)];
    }
  }
  return grad;
}

}  // namespace tmpnn

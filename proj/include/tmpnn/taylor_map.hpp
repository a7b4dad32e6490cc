#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tmpnn/error.hpp"
#include "tmpnn/monomial_basis.hpp"
#include "tmpnn/parallel.hpp"
#include "tmpnn/polynomial.hpp"

namespace tmpnn {

// Transverse phase-space state.  n = 2 is (x, x'), n = 4 is (x, x', y, y');
// parameter-extended inputs append parameter values after the coordinates.
using PhaseVector = Eigen::VectorXd;

// Particles as rows.
using PhaseBatch = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Truncated polynomial map X1 = W0 + W1 X0 + W2 X0^[2] + ... + Wk X0^[k].
//
// The weight blocks are stored side by side in one n_out x N matrix whose
// columns follow the graded MonomialBasis(n_in, order); column 0 is W0.
class TaylorMap {
 public:
  TaylorMap() = default;

  TaylorMap(int n_in, int n_out, int order)
      : n_in_(n_in), n_out_(n_out), order_(order) {
    if (n_in < 1 || n_out < 1) throw ShapeError("TaylorMap: dimensions must be positive");
    if (order < 1 || order > kMaxMapOrder)
      throw ShapeError("TaylorMap: order must be in [1, " + std::to_string(kMaxMapOrder) + "]");
    basis_ = shared_basis(n_in, order);
    coeffs_ = Eigen::MatrixXd::Zero(n_out, static_cast<Eigen::Index>(basis_->size()));
  }

  TaylorMap(int n_in, int n_out, int order, Eigen::MatrixXd coefficients)
      : TaylorMap(n_in, n_out, order) {
    if (coefficients.rows() != coeffs_.rows() || coefficients.cols() != coeffs_.cols())
      throw ShapeError("TaylorMap: coefficient matrix has wrong shape");
    coeffs_ = std::move(coefficients);
  }

  static TaylorMap identity(int n, int order);

  int n_in() const { return n_in_; }
  int n_out() const { return n_out_; }
  int order() const { return order_; }
  const MonomialBasis& basis() const { return *basis_; }

  const Eigen::MatrixXd& coefficients() const { return coeffs_; }
  Eigen::MatrixXd& coefficients() { return coeffs_; }

  // Weight block W_d: n_out x C(n_in + d - 1, d).
  auto weights(int d) const {
    check_degree(d);
    return coeffs_.middleCols(static_cast<Eigen::Index>(basis_->block_offset(d)),
                              static_cast<Eigen::Index>(basis_->block_size(d)));
  }
  auto weights(int d) {
    check_degree(d);
    return coeffs_.middleCols(static_cast<Eigen::Index>(basis_->block_offset(d)),
                              static_cast<Eigen::Index>(basis_->block_size(d)));
  }

  double& coefficient(int row, std::span<const int> exponents) {
    return coeffs_(row, static_cast<Eigen::Index>(basis_->index_of(exponents)));
  }
  double coefficient(int row, std::span<const int> exponents) const {
    return coeffs_(row, static_cast<Eigen::Index>(basis_->index_of(exponents)));
  }
  double& coefficient(int row, std::initializer_list<int> exponents) {
    return coefficient(row, std::span<const int>(exponents.begin(), exponents.size()));
  }
  double coefficient(int row, std::initializer_list<int> exponents) const {
    return coefficient(row, std::span<const int>(exponents.begin(), exponents.size()));
  }

  bool is_finite() const { return coeffs_.allFinite(); }

  friend bool operator==(const TaylorMap& a, const TaylorMap& b) {
    return a.n_in_ == b.n_in_ && a.n_out_ == b.n_out_ && a.order_ == b.order_ &&
           a.coeffs_ == b.coeffs_;
  }

 private:
  void check_degree(int d) const {
    if (d < 0 || d > order_) throw ShapeError("TaylorMap: weight degree out of range");
  }

  int n_in_ = 0;
  int n_out_ = 0;
  int order_ = 0;
  std::shared_ptr<const MonomialBasis> basis_;
  Eigen::MatrixXd coeffs_;
};

inline TaylorMap TaylorMap::identity(int n, int order) {
  TaylorMap m(n, n, order);
  m.weights(1).setIdentity();
  return m;
}

// Monomials of exact degree d of x, in enumerate_monomials order.  Degree 0
// yields the single value 1.
inline Eigen::VectorXd kron_power(std::span<const double> x, int degree) {
  if (x.empty()) throw ShapeError("kron_power: empty vector");
  if (degree < 0) throw ShapeError("kron_power: negative degree");
  const auto basis = shared_basis(static_cast<int>(x.size()), degree);
  std::vector<double> m(basis->size());
  basis->monomials(x, m);
  const auto off = static_cast<Eigen::Index>(basis->block_offset(degree));
  const auto len = static_cast<Eigen::Index>(basis->block_size(degree));
  return Eigen::Map<const Eigen::VectorXd>(m.data() + off, len);
}

inline Eigen::VectorXd kron_power(const Eigen::VectorXd& x, int degree) {
  return kron_power(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), degree);
}

namespace detail {

// out = coeffs * monomials(x); scratch must hold basis.size() values.
inline void evaluate_into(const TaylorMap& map, const double* x, double* out, double* scratch) {
  const auto& basis = map.basis();
  const std::size_t n = basis.size();
  basis.monomials(std::span<const double>(x, static_cast<std::size_t>(map.n_in())),
                  std::span<double>(scratch, n));
  const auto& c = map.coefficients();
  for (int r = 0; r < map.n_out(); ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += c(r, static_cast<Eigen::Index>(j)) * scratch[j];
    out[r] = acc;
  }
}

}  // namespace detail

inline PhaseVector evaluate(const TaylorMap& map, std::span<const double> x0) {
  if (static_cast<int>(x0.size()) != map.n_in())
    throw ShapeError("evaluate: input has length " + std::to_string(x0.size()) + ", map expects " +
                     std::to_string(map.n_in()));
  PhaseVector out(map.n_out());
  std::vector<double> scratch(map.basis().size());
  detail::evaluate_into(map, x0.data(), out.data(), scratch.data());
  return out;
}

inline PhaseVector evaluate(const TaylorMap& map, const Eigen::VectorXd& x0) {
  return evaluate(map, std::span<const double>(x0.data(), static_cast<std::size_t>(x0.size())));
}

// Row-wise evaluate.  Each row goes through exactly the same arithmetic as the
// single-vector path, so results are bit-identical.
inline PhaseBatch evaluate_batch(const TaylorMap& map, const PhaseBatch& rows) {
  if (rows.rows() > 0 && rows.cols() != map.n_in())
    throw ShapeError("evaluate_batch: rows have length " + std::to_string(rows.cols()) +
                     ", map expects " + std::to_string(map.n_in()));
  PhaseBatch out(rows.rows(), map.n_out());
  parallel_for(static_cast<std::size_t>(rows.rows()), [&](std::size_t begin, std::size_t end) {
    std::vector<double> scratch(map.basis().size());
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      detail::evaluate_into(map, rows.row(r).data(), out.row(r).data(), scratch.data());
    }
  });
  return out;
}

namespace detail {

// r += a * b truncated to basis order; a and b are coefficient rows.
inline void truncated_mul_add(const MonomialBasis& basis, const double* a, const double* b,
                              double* r) {
  const std::size_t n = basis.size();
  const int k = basis.max_order();
  for (std::size_t i = 0; i < n; ++i) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    const int di = basis.degree_of(i);
    const std::size_t limit = basis.block_offset(k - di) + basis.block_size(k - di);
    for (std::size_t j = 0; j < limit; ++j) {
      const double bj = b[j];
      if (bj == 0.0) continue;
      r[basis.product(i, j)] += ai * bj;
    }
  }
}

}  // namespace detail

// Map of second∘first (first applied to the input, then second), truncated at
// the common order k.  Both maps must share the same order.
inline TaylorMap compose(const TaylorMap& first, const TaylorMap& second) {
  if (first.n_out() != second.n_in())
    throw ShapeError("compose: first map has " + std::to_string(first.n_out()) +
                     " outputs, second expects " + std::to_string(second.n_in()));
  if (first.order() != second.order()) throw ShapeError("compose: maps have different orders");
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto& in_basis = first.basis();
  const auto& mid_basis = second.basis();
  const auto n_in = static_cast<Eigen::Index>(in_basis.size());
  const auto n_mid = static_cast<Eigen::Index>(mid_basis.size());

  const RowMat inner = first.coefficients();
  // powers.row(mu) holds the polynomial for the mu-th monomial of first's
  // outputs, built from its parent monomial times one output component.
  RowMat powers = RowMat::Zero(n_mid, n_in);
  powers(0, 0) = 1.0;
  for (Eigen::Index mu = 1; mu < n_mid; ++mu) {
    const auto parent = static_cast<Eigen::Index>(mid_basis.parent(static_cast<std::size_t>(mu)));
    const auto var = mid_basis.parent_var(static_cast<std::size_t>(mu));
    detail::truncated_mul_add(in_basis, powers.row(parent).data(), inner.row(var).data(),
                              powers.row(mu).data());
  }
  Eigen::MatrixXd result = second.coefficients() * powers;
  return TaylorMap(first.n_in(), second.n_out(), first.order(), std::move(result));
}

// Jacobian d(out_i)/d(in_j) as polynomials of degree order-1 over the input
// variables.
inline PolyMatrix jacobian(const TaylorMap& map) {
  const int k = map.order();
  PolyMatrix jac(map.n_out(), map.n_in(), map.n_in(), k - 1);
  const auto& basis = map.basis();
  const auto& c = map.coefficients();
  for (int j = 0; j < map.n_in(); ++j) {
    for (std::size_t mu = 0; mu < basis.size(); ++mu) {
      const auto d = basis.derivative(mu, j);
      if (d.factor == 0) continue;
      for (int i = 0; i < map.n_out(); ++i)
        jac(i, j).coefficients()[static_cast<Eigen::Index>(d.index)] +=
            d.factor * c(i, static_cast<Eigen::Index>(mu));
    }
  }
  return jac;
}

// Numerical Jacobian of the map at x (exact derivative of the polynomial).
inline Eigen::MatrixXd jacobian_at(const TaylorMap& map, std::span<const double> x) {
  const auto& basis = map.basis();
  std::vector<double> m(basis.size());
  basis.monomials(x, m);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(map.n_out(), map.n_in());
  const auto& c = map.coefficients();
  for (std::size_t mu = 1; mu < basis.size(); ++mu) {
    for (int j = 0; j < map.n_in(); ++j) {
      const auto d = basis.derivative(mu, j);
      if (d.factor == 0) continue;
      const double dm = d.factor * m[d.index];
      for (int i = 0; i < map.n_out(); ++i) jac(i, j) += c(i, static_cast<Eigen::Index>(mu)) * dm;
    }
  }
  return jac;
}

}  // namespace tmpnn

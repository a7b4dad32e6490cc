#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tmpnn/error.hpp"
#include "tmpnn/monomial_basis.hpp"

namespace tmpnn {

// Scalar multivariate polynomial over a graded monomial basis.  Used for the
// entries of Jacobian matrices and symplectic residuals, where products must
// not be truncated.
class Polynomial {
 public:
  Polynomial() = default;

  Polynomial(int n_vars, int order)
      : basis_(shared_basis(n_vars, order)),
        coeffs_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis_->size()))) {}

  Polynomial(std::shared_ptr<const MonomialBasis> basis, Eigen::VectorXd coeffs)
      : basis_(std::move(basis)), coeffs_(std::move(coeffs)) {
    if (static_cast<std::size_t>(coeffs_.size()) != basis_->size())
      throw ShapeError("Polynomial: coefficient count does not match basis");
  }

  static Polynomial constant(int n_vars, double value) {
    Polynomial p(n_vars, 0);
    p.coeffs_[0] = value;
    return p;
  }

  int n_vars() const { return basis_->n_vars(); }
  int order() const { return basis_->max_order(); }
  const MonomialBasis& basis() const { return *basis_; }
  const std::shared_ptr<const MonomialBasis>& basis_ptr() const { return basis_; }
  const Eigen::VectorXd& coefficients() const { return coeffs_; }
  Eigen::VectorXd& coefficients() { return coeffs_; }

  double coefficient_of(std::span<const int> exponents) const {
    return coeffs_[static_cast<Eigen::Index>(basis_->index_of(exponents))];
  }
  double coefficient_of(const std::vector<int>& exponents) const {
    return coefficient_of(std::span<const int>(exponents));
  }

  double operator()(std::span<const double> x) const {
    std::vector<double> m(basis_->size());
    basis_->monomials(x, m);
    return coeffs_.dot(Eigen::Map<const Eigen::VectorXd>(
        m.data(), static_cast<Eigen::Index>(m.size())));
  }

  // Same polynomial expressed over a basis of different order; higher-degree
  // terms are dropped when shrinking.
  Polynomial with_order(int order) const {
    Polynomial r(n_vars(), order);
    const auto n = std::min(r.coeffs_.size(), coeffs_.size());
    r.coeffs_.head(n) = coeffs_.head(n);
    return r;
  }

  Polynomial derivative(int var) const {
    Polynomial r(n_vars(), std::max(order() - 1, 0));
    for (std::size_t i = 0; i < basis_->size(); ++i) {
      const double c = coeffs_[static_cast<Eigen::Index>(i)];
      if (c == 0.0) continue;
      const auto d = basis_->derivative(i, var);
      if (d.factor != 0) r.coeffs_[static_cast<Eigen::Index>(d.index)] += d.factor * c;
    }
    return r;
  }

  Polynomial& operator+=(const Polynomial& o) { return accumulate(o, 1.0); }
  Polynomial& operator-=(const Polynomial& o) { return accumulate(o, -1.0); }
  Polynomial& operator*=(double s) {
    coeffs_ *= s;
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }

  // Exact product (no truncation): the result order is the sum of orders.
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.n_vars() != b.n_vars()) throw ShapeError("Polynomial product: variable count mismatch");
    Polynomial r(a.n_vars(), a.order() + b.order());
    const auto& basis = *r.basis_;
    const auto na = static_cast<std::size_t>(a.coeffs_.size());
    const auto nb = static_cast<std::size_t>(b.coeffs_.size());
    for (std::size_t i = 0; i < na; ++i) {
      const double ai = a.coeffs_[static_cast<Eigen::Index>(i)];
      if (ai == 0.0) continue;
      for (std::size_t j = 0; j < nb; ++j) {
        const double bj = b.coeffs_[static_cast<Eigen::Index>(j)];
        if (bj == 0.0) continue;
        r.coeffs_[static_cast<Eigen::Index>(basis.product(i, j))] += ai * bj;
      }
    }
    return r;
  }

 private:
  Polynomial& accumulate(const Polynomial& o, double sign) {
    if (o.n_vars() != n_vars()) throw ShapeError("Polynomial sum: variable count mismatch");
    if (o.order() > order()) *this = with_order(o.order());
    coeffs_.head(o.coeffs_.size()) += sign * o.coeffs_;
    return *this;
  }

  std::shared_ptr<const MonomialBasis> basis_;
  Eigen::VectorXd coeffs_;
};

// Dense matrix of polynomials, row-major.
class PolyMatrix {
 public:
  PolyMatrix() = default;
  PolyMatrix(int rows, int cols, int n_vars, int order)
      : rows_(rows), cols_(cols),
        entries_(static_cast<std::size_t>(rows * cols), Polynomial(n_vars, order)) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  Polynomial& operator()(int i, int j) { return entries_[static_cast<std::size_t>(i * cols_ + j)]; }
  const Polynomial& operator()(int i, int j) const {
    return entries_[static_cast<std::size_t>(i * cols_ + j)];
  }

  Eigen::MatrixXd evaluate(std::span<const double> x) const {
    Eigen::MatrixXd m(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) m(i, j) = (*this)(i, j)(x);
    return m;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Polynomial> entries_;
};

}  // namespace tmpnn

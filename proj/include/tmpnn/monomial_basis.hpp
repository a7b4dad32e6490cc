#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tmpnn/error.hpp"

#ifndef TMPNN_MAX_ORDER
#define TMPNN_MAX_ORDER 4
#endif

namespace tmpnn {

// Largest polynomial degree accepted for a TaylorMap.  Internal bases used for
// products of Jacobian entries may go higher.
inline constexpr int kMaxMapOrder = TMPNN_MAX_ORDER;

inline std::size_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::size_t>(n - k + i) / i;
  return r;
}

// Number of monomials of exactly `degree` in `n_vars` variables.
inline std::size_t degree_block_size(int n_vars, int degree) {
  if (degree == 0) return 1;
  return binomial(n_vars + degree - 1, degree);
}

namespace detail {

inline void enumerate_rec(int var, int remaining, std::vector<int>& cur,
                          std::vector<std::vector<int>>& out) {
  const int n = static_cast<int>(cur.size());
  if (var == n - 1) {
    cur[var] = remaining;
    out.push_back(cur);
    return;
  }
  for (int a = remaining; a >= 0; --a) {
    cur[var] = a;
    enumerate_rec(var + 1, remaining - a, cur, out);
  }
  cur[var] = 0;
}

}  // namespace detail

// All exponent tuples of total degree `degree` in `n_vars` variables, ordered
// lexicographically descending (first variable's exponent highest first).
// For two variables and degree 2 this is (x1^2, x1 x2, x2^2).
inline std::vector<std::vector<int>> enumerate_monomials(int n_vars,
                                                         int degree) {
  if (n_vars < 1 || degree < 0)
    throw ShapeError("enumerate_monomials: need n_vars >= 1 and degree >= 0");
  std::vector<std::vector<int>> out;
  out.reserve(degree_block_size(n_vars, degree));
  std::vector<int> cur(static_cast<std::size_t>(n_vars), 0);
  detail::enumerate_rec(0, degree, cur, out);
  return out;
}

// Graded monomial basis: degree blocks 0..max_order stored back to back, each
// block in the enumerate_monomials order.  Because the layout is graded, the
// flat index of a monomial does not depend on max_order, so a basis of lower
// order is a prefix of any higher one over the same variables.
class MonomialBasis {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  struct Derivative {
    std::size_t index;  // flat index of the differentiated monomial
    int factor;         // exponent brought down; 0 means the result is zero
  };

  MonomialBasis(int n_vars, int max_order)
      : n_vars_(n_vars), max_order_(max_order) {
    if (n_vars < 1) throw ShapeError("MonomialBasis: n_vars must be >= 1");
    if (max_order < 0) throw ShapeError("MonomialBasis: max_order must be >= 0");
    offsets_.push_back(0);
    for (int d = 0; d <= max_order; ++d)
      offsets_.push_back(offsets_.back() + degree_block_size(n_vars, d));
    const std::size_t n = size();
    exponents_.reserve(n * static_cast<std::size_t>(n_vars));
    degrees_.reserve(n);
    for (int d = 0; d <= max_order; ++d) {
      for (const auto& e : enumerate_monomials(n_vars, d)) {
        exponents_.insert(exponents_.end(), e.begin(), e.end());
        degrees_.push_back(d);
      }
    }
    parent_.assign(n, 0);
    parent_var_.assign(n, -1);
    std::vector<int> e(static_cast<std::size_t>(n_vars));
    for (std::size_t i = 1; i < n; ++i) {
      auto ex = exponents_of(i);
      e.assign(ex.begin(), ex.end());
      int v = n_vars - 1;
      while (e[static_cast<std::size_t>(v)] == 0) --v;
      e[static_cast<std::size_t>(v)] -= 1;
      parent_[i] = index_of(e);
      parent_var_[i] = v;
    }
  }

  int n_vars() const { return n_vars_; }
  int max_order() const { return max_order_; }
  std::size_t size() const { return offsets_.back(); }
  std::size_t block_offset(int degree) const {
    return offsets_.at(static_cast<std::size_t>(degree));
  }
  std::size_t block_size(int degree) const {
    return offsets_.at(static_cast<std::size_t>(degree) + 1) -
           offsets_.at(static_cast<std::size_t>(degree));
  }
  int degree_of(std::size_t index) const { return degrees_[index]; }

  std::span<const int> exponents_of(std::size_t index) const {
    if (index >= size()) throw ShapeError("exponents_of: index out of range");
    return {exponents_.data() + index * static_cast<std::size_t>(n_vars_),
            static_cast<std::size_t>(n_vars_)};
  }

  // Flat index by combinatorial ranking; throws for tuples outside the basis.
  std::size_t index_of(std::span<const int> e) const {
    if (static_cast<int>(e.size()) != n_vars_)
      throw ShapeError("index_of: exponent tuple has wrong length");
    int degree = 0;
    for (int a : e) {
      if (a < 0) throw ShapeError("index_of: negative exponent");
      degree += a;
    }
    if (degree > max_order_)
      throw ShapeError("index_of: degree exceeds basis order");
    return offsets_[static_cast<std::size_t>(degree)] + rank_in_block(e, degree);
  }

  std::size_t parent(std::size_t index) const { return parent_[index]; }
  int parent_var(std::size_t index) const { return parent_var_[index]; }

  // Index of the product monomial, or npos when its degree exceeds max_order.
  std::size_t product(std::size_t i, std::size_t j) const {
    std::call_once(product_once_, [this] { build_product_table(); });
    const auto p = product_[i * size() + j];
    return p == kNone ? npos : static_cast<std::size_t>(p);
  }

  Derivative derivative(std::size_t index, int var) const {
    auto e = exponents_of(index);
    const int a = e[static_cast<std::size_t>(var)];
    if (a == 0) return {0, 0};
    std::vector<int> d(e.begin(), e.end());
    d[static_cast<std::size_t>(var)] -= 1;
    return {index_of(d), a};
  }

  // Values of every basis monomial at x.  out.size() must equal size().
  void monomials(std::span<const double> x, std::span<double> out) const {
    out[0] = 1.0;
    const std::size_t n = size();
    for (std::size_t i = 1; i < n; ++i)
      out[i] = out[parent_[i]] * x[static_cast<std::size_t>(parent_var_[i])];
  }

 private:
  static constexpr std::uint32_t kNone = 0xffffffffu;

  std::size_t rank_in_block(std::span<const int> e, int degree) const {
    std::size_t rank = 0;
    int r = degree;
    for (int p = 0; p + 1 < n_vars_; ++p) {
      const int m = n_vars_ - p - 1;  // variables after position p
      for (int a = e[static_cast<std::size_t>(p)] + 1; a <= r; ++a)
        rank += binomial(r - a + m - 1, m - 1);
      r -= e[static_cast<std::size_t>(p)];
    }
    return rank;
  }

  void build_product_table() const {
    const std::size_t n = size();
    product_.assign(n * n, kNone);
    std::vector<int> e(static_cast<std::size_t>(n_vars_));
    for (std::size_t i = 0; i < n; ++i) {
      auto a = exponents_of(i);
      for (std::size_t j = 0; j < n; ++j) {
        if (degrees_[i] + degrees_[j] > max_order_) continue;
        auto b = exponents_of(j);
        for (int v = 0; v < n_vars_; ++v)
          e[static_cast<std::size_t>(v)] =
              a[static_cast<std::size_t>(v)] + b[static_cast<std::size_t>(v)];
        product_[i * n + j] = static_cast<std::uint32_t>(index_of(e));
      }
    }
  }

  int n_vars_;
  int max_order_;
  std::vector<std::size_t> offsets_;
  std::vector<int> exponents_;
  std::vector<int> degrees_;
  std::vector<std::size_t> parent_;
  std::vector<int> parent_var_;
  mutable std::once_flag product_once_;
  mutable std::vector<std::uint32_t> product_;
};

// Process-wide cache; bases are immutable so sharing them is safe.
inline std::shared_ptr<const MonomialBasis> shared_basis(int n_vars,
                                                         int max_order) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const MonomialBasis>>
      cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{n_vars, max_order}];
  if (!slot) slot = std::make_shared<const MonomialBasis>(n_vars, max_order);
  return slot;
}

}  // namespace tmpnn

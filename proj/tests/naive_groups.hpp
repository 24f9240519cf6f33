#pragma once
// Brute-force models of finite abelian groups used as test oracles. They go
// through a triangular (Hermite) basis of the relation lattice and plain
// enumeration, never through the Smith form.

#include "efg/abgroup.hpp"

#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace naive {

using efg::Int;
using efg::IntMatrix;
using efg::IntVector;

class FiniteGroup {
 public:
  explicit FiniteGroup(const efg::Presentation& g) : n_(g.gen_count) {
    IntMatrix rel = g.relations.rows() ? g.relations : IntMatrix(0, n_);
    efg::HermiteForm h = efg::hnf(rel);
    if (h.rank != n_) throw std::invalid_argument("naive::FiniteGroup: infinite group");
    basis_ = h.H.submatrix(0, 0, n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      if (basis_(i, i) == 0) throw std::invalid_argument("naive::FiniteGroup: unexpected echelon shape");
    IntVector digits(n_, Int(0));
    for (;;) {
      elements_.push_back(digits);
      std::size_t i = n_;
      bool done = true;
      while (i > 0) {
        --i;
        digits[i] += 1;
        if (digits[i] < basis_(i, i)) {
          done = false;
          break;
        }
        digits[i] = 0;
      }
      if (done) break;
    }
  }

  IntVector reduce(IntVector x) const {
    for (std::size_t i = 0; i < n_; ++i) {
      Int q;
      mpz_fdiv_q(q.get_mpz_t(), x[i].get_mpz_t(), basis_(i, i).get_mpz_t());
      if (q != 0)
        for (std::size_t j = i; j < n_; ++j) x[j] -= q * basis_(i, j);
    }
    return x;
  }

  bool is_zero(const IntVector& x) const { return efg::is_zero(reduce(x)); }
  std::size_t order() const { return elements_.size(); }
  const std::vector<IntVector>& elements() const { return elements_; }

  long element_order(const IntVector& x) const {
    IntVector acc = x;
    for (long k = 1;; ++k) {
      if (is_zero(acc)) return k;
      acc = efg::add(acc, x);
    }
  }

  std::map<long, long> census() const {
    std::map<long, long> c;
    for (const auto& e : elements_) ++c[element_order(e)];
    return c;
  }

  long exponent() const {
    long e = 1;
    for (const auto& x : elements_) e = std::lcm(e, element_order(x));
    return e;
  }

 private:
  std::size_t n_;
  IntMatrix basis_;
  std::vector<IntVector> elements_;
};

// census of Z/t1 + ... + Z/tk, computed from element orders as lcms
inline std::map<long, long> census_of_cyclics(const std::vector<long>& orders) {
  std::map<long, long> c;
  std::vector<long> digits(orders.size(), 0);
  for (;;) {
    long ord = 1;
    for (std::size_t i = 0; i < orders.size(); ++i)
      ord = std::lcm(ord, orders[i] / std::gcd(orders[i], digits[i]));
    ++c[ord];
    std::size_t i = 0;
    while (i < orders.size() && ++digits[i] == orders[i]) digits[i++] = 0;
    if (i == orders.size()) break;
  }
  return c;
}

// all c in [-e, e]^k with sum c_i x_i = 0; the box spans the relation lattice
inline std::vector<std::vector<long>> relations_in_box(const FiniteGroup& g, const std::vector<IntVector>& tuple,
                                                       long e) {
  std::vector<std::vector<long>> out;
  const std::size_t k = tuple.size();
  std::vector<long> c(k, -e);
  if (k == 0) return out;
  const std::size_t n = tuple[0].size();
  for (;;) {
    IntVector sum(n, Int(0));
    for (std::size_t i = 0; i < k; ++i) sum = efg::add(sum, efg::scale(Int(c[i]), tuple[i]));
    if (g.is_zero(sum)) out.push_back(c);
    std::size_t i = 0;
    while (i < k && c[i] == e) c[i++] = -e;
    if (i == k) break;
    ++c[i];
  }
  return out;
}

}  // namespace naive

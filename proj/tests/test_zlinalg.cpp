#include "catch_amalgamated.hpp"

#include "efg/zlinalg.hpp"

#include <numeric>
#include <random>
#include <set>

using namespace efg;

namespace {

IntMatrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, long bound) {
  std::uniform_int_distribution<long> d(-bound, bound);
  IntMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = d(rng);
  return m;
}

// all 2x2 matrices with entries in [-b, b] and determinant +-1
std::vector<IntMatrix> small_unimodular(long b) {
  std::vector<IntMatrix> out;
  for (long a = -b; a <= b; ++a)
    for (long x = -b; x <= b; ++x)
      for (long y = -b; y <= b; ++y)
        for (long d = -b; d <= b; ++d)
          if (a * d - x * y == 1 || a * d - x * y == -1) out.push_back(IntMatrix{{a, x}, {y, d}});
  return out;
}

Int cofactor_det(const IntMatrix& m) {
  const std::size_t n = m.rows();
  if (n == 0) return 1;
  if (n == 1) return m(0, 0);
  Int total = 0;
  for (std::size_t j = 0; j < n; ++j) {
    IntMatrix minor(n - 1, n - 1);
    for (std::size_t r = 1; r < n; ++r)
      for (std::size_t c = 0, cc = 0; c < n; ++c) {
        if (c == j) continue;
        minor(r - 1, cc++) = m(r, c);
      }
    Int term = m(0, j) * cofactor_det(minor);
    total += (j % 2 == 0) ? term : Int(-term);
  }
  return total;
}

bool is_diagonal_chain(const IntMatrix& d) {
  bool seen_zero = false;
  Int prev = 1;
  for (std::size_t i = 0; i < d.rows(); ++i)
    for (std::size_t j = 0; j < d.cols(); ++j) {
      if (i != j && d(i, j) != 0) return false;
      if (i == j) {
        if (d(i, i) < 0) return false;
        if (d(i, i) == 0) {
          seen_zero = true;
        } else {
          if (seen_zero || d(i, i) % prev != 0) return false;
          prev = d(i, i);
        }
      }
    }
  return true;
}

// odometer over the integer box [-radius, radius]^n
bool box_has_solution(const IntMatrix& m, const IntVector& b, long radius) {
  const std::size_t n = m.cols();
  std::vector<long> x(n, -radius);
  for (;;) {
    IntVector xv;
    for (long v : x) xv.emplace_back(v);
    if (apply_col(m, xv) == b) return true;
    std::size_t i = 0;
    while (i < n && x[i] == radius) x[i++] = -radius;
    if (i == n) return false;
    ++x[i];
  }
}

}  // namespace

TEST_CASE("snf of the identity is trivial") {
  SmithForm s = snf(IntMatrix::identity(3));
  CHECK(s.U == IntMatrix::identity(3));
  CHECK(s.D == IntMatrix::identity(3));
  CHECK(s.V == IntMatrix::identity(3));
}

TEST_CASE("snf of diag(2,3) matches bounded unimodular search") {
  const IntMatrix m{{2, 0}, {0, 3}};
  std::set<std::pair<long, long>> reachable;
  const auto unis = small_unimodular(3);
  for (const auto& u : unis)
    for (const auto& v : unis) {
      IntMatrix d = u * m * v;
      if (is_diagonal_chain(d)) reachable.insert({d(0, 0).get_si(), d(1, 1).get_si()});
    }
  REQUIRE(reachable == std::set<std::pair<long, long>>{{1, 6}});
  SmithForm s = snf(m);
  CHECK(s.D == IntMatrix{{1, 0}, {0, 6}});
  CHECK(s.U * m * s.V == s.D);
}

TEST_CASE("snf of zero") {
  SmithForm s = snf(IntMatrix{{0}});
  CHECK(s.D == IntMatrix{{0}});
  CHECK(s.rank == 0);
}

TEST_CASE("snf invariants on random matrices") {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<std::size_t> dim(1, 5);
  for (int trial = 0; trial < 200; ++trial) {
    IntMatrix m = random_matrix(rng, dim(rng), dim(rng), 12);
    SmithForm s = snf(m);
    REQUIRE(s.U * m * s.V == s.D);
    REQUIRE(is_diagonal_chain(s.D));
    Int du = determinant(s.U), dv = determinant(s.V);
    REQUIRE((du == 1 || du == -1));
    REQUIRE((dv == 1 || dv == -1));
  }
}

TEST_CASE("snf breaks pivot ties by position") {
  // both 2s are minimal; the first in row-major order is used, so no swap happens
  SmithForm s = snf(IntMatrix{{2, 4}, {2, 6}});
  CHECK(s.D == IntMatrix{{2, 0}, {0, 2}});
  CHECK(s.U(0, 0) == 1);
}

TEST_CASE("hnf basics") {
  HermiteForm h = hnf(IntMatrix::identity(2));
  CHECK(h.H == IntMatrix::identity(2));

  HermiteForm z = hnf(IntMatrix{{0, 0}});
  CHECK(z.H == IntMatrix{{0, 0}});
  CHECK(z.rank == 0);
}

TEST_CASE("hnf of a column vector is its gcd") {
  const IntMatrix col{{4}, {6}};
  HermiteForm h = hnf(col);
  CHECK(h.H(0, 0) == std::gcd(4L, 6L));
  CHECK(h.H(1, 0) == 0);
  CHECK(h.U * col == h.H);
  Int d = determinant(h.U);
  CHECK((d == 1 || d == -1));
}

TEST_CASE("hnf shape on random matrices") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 150; ++trial) {
    IntMatrix m = random_matrix(rng, 4, 5, 9);
    HermiteForm h = hnf(m);
    REQUIRE(h.U * m == h.H);
    Int d = determinant(h.U);
    REQUIRE((d == 1 || d == -1));
    std::size_t last_pivot = 0;
    for (std::size_t r = 0; r < h.rank; ++r) {
      std::size_t c = 0;
      while (h.H(r, c) == 0) ++c;
      REQUIRE(h.H(r, c) > 0);
      if (r) REQUIRE(c > last_pivot);
      for (std::size_t above = 0; above < r; ++above) {
        REQUIRE(h.H(above, c) >= 0);
        REQUIRE(h.H(above, c) < h.H(r, c));
      }
      last_pivot = c;
    }
    for (std::size_t r = h.rank; r < m.rows(); ++r) REQUIRE(is_zero(h.H.row(r)));
  }
}

TEST_CASE("solve_linear examples") {
  auto x = solve_linear(IntMatrix{{2, 0}, {0, 3}}, to_int_vector({4, 9}));
  REQUIRE(x);
  CHECK(*x == to_int_vector({2, 3}));

  CHECK_FALSE(solve_linear(IntMatrix{{2}}, to_int_vector({3})));

  const IntMatrix m{{1, 1}, {1, -1}};
  const IntVector b = to_int_vector({2, 0});
  REQUIRE(box_has_solution(m, b, 3));
  auto y = solve_linear(m, b);
  REQUIRE(y);
  CHECK(*y == to_int_vector({1, 1}));

  CHECK_THROWS_AS(solve_linear(m, to_int_vector({1, 2, 3})), DimensionError);
}

TEST_CASE("solve_linear agrees with box search on small systems") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> dim(1, 3);
  std::uniform_int_distribution<long> rhs(-6, 6);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t r = dim(rng), c = dim(rng);
    IntMatrix m = random_matrix(rng, r, c, 4);
    IntVector b;
    for (std::size_t i = 0; i < r; ++i) b.emplace_back(rhs(rng));
    auto x = solve_linear(m, b);
    if (x) {
      REQUIRE(apply_col(m, *x) == b);
    } else {
      // any solution yields one of the form V*y with |y_i| <= |(U b)_i|
      SmithForm s = snf(m);
      IntVector ub = apply_col(s.U, b);
      Int vmax = 0, bmax = 0;
      for (std::size_t i = 0; i < s.V.rows(); ++i)
        for (std::size_t j = 0; j < s.V.cols(); ++j) vmax = std::max(vmax, Int(abs(s.V(i, j))));
      for (const auto& v : ub) bmax = std::max(bmax, Int(abs(v)));
      Int radius = vmax * bmax * Int(static_cast<long>(c));
      long rr = radius > 6 ? 6 : radius.get_si();
      REQUIRE_FALSE(box_has_solution(m, b, rr));
    }
  }
  // solvable by construction
  for (int trial = 0; trial < 100; ++trial) {
    IntMatrix m = random_matrix(rng, 3, 3, 5);
    IntVector x0;
    for (int i = 0; i < 3; ++i) x0.emplace_back(rhs(rng));
    auto x = solve_linear(m, apply_col(m, x0));
    REQUIRE(x);
    REQUIRE(apply_col(m, *x) == apply_col(m, x0));
  }
}

TEST_CASE("left kernel and determinant") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    IntMatrix m = random_matrix(rng, 5, 3, 6);
    IntMatrix k = left_kernel(m);
    REQUIRE(k.rows() + rank(m) == m.rows());
    REQUIRE((k * m).is_zero());
    IntMatrix sq = random_matrix(rng, 4, 4, 7);
    REQUIRE(determinant(sq) == cofactor_det(sq));
  }
  IntMatrix u{{2, 1}, {1, 1}};
  CHECK(inverse_unimodular(u) * u == IntMatrix::identity(2));
  CHECK_THROWS(inverse_unimodular(IntMatrix{{2, 0}, {0, 1}}));
}

TEST_CASE("entries stay exact past 64 bits") {
  Int big = 1;
  for (int i = 0; i < 30; ++i) big *= 97;
  IntMatrix m{{1, 0}, {0, 1}};
  m(0, 0) = big;
  m(1, 1) = big * 3;
  SmithForm s = snf(m);
  CHECK(s.D(0, 0) == big);
  CHECK(s.D(1, 1) == big * 3);
}

#include "efg/zlinalg.hpp"

#include <algorithm>
#include <sstream>

namespace efg {

IntMatrix::IntMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, Int(0)) {}

IntMatrix::IntMatrix(std::initializer_list<std::initializer_list<long>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged matrix literal");
    for (long v : r) data_.emplace_back(v);
  }
}

IntMatrix IntMatrix::identity(std::size_t n) {
  IntMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
  return m;
}

IntMatrix IntMatrix::from_rows(const std::vector<IntVector>& rows, std::size_t cols) {
  IntMatrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) m.set_row(i, rows[i]);
  return m;
}

IntMatrix IntMatrix::diagonal(const IntVector& diag) {
  IntMatrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

IntVector IntMatrix::row(std::size_t r) const {
  return IntVector(data_.begin() + static_cast<std::ptrdiff_t>(r * cols_),
                   data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols_));
}

IntVector IntMatrix::column(std::size_t c) const {
  IntVector v(rows_);
  for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
  return v;
}

void IntMatrix::set_row(std::size_t r, const IntVector& v) {
  if (v.size() != cols_) throw DimensionError("row length " + std::to_string(v.size()) +
                                              " != " + std::to_string(cols_));
  std::copy(v.begin(), v.end(), data_.begin() + static_cast<std::ptrdiff_t>(r * cols_));
}

void IntMatrix::append_row(const IntVector& v) {
  if (rows_ == 0 && cols_ == 0) cols_ = v.size();
  if (v.size() != cols_) throw DimensionError("appended row has wrong length");
  data_.insert(data_.end(), v.begin(), v.end());
  ++rows_;
}

void IntMatrix::append_rows(const IntMatrix& m) {
  if (m.rows() == 0) return;
  if (rows_ == 0 && cols_ == 0) cols_ = m.cols();
  if (m.cols() != cols_) throw DimensionError("appended block has wrong width");
  data_.insert(data_.end(), m.data_.begin(), m.data_.end());
  rows_ += m.rows();
}

IntMatrix IntMatrix::transpose() const {
  IntMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

IntMatrix IntMatrix::submatrix(std::size_t r0, std::size_t c0, std::size_t nr,
                               std::size_t nc) const {
  IntMatrix s(nr, nc);
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t c = 0; c < nc; ++c) s(r, c) = (*this)(r0 + r, c0 + c);
  return s;
}

IntMatrix IntMatrix::without_zero_rows() const {
  IntMatrix out(0, cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    IntVector v = row(r);
    if (!efg::is_zero(v)) out.append_row(v);
  }
  return out;
}

void IntMatrix::swap_rows(std::size_t a, std::size_t b) {
  if (a == b) return;
  for (std::size_t c = 0; c < cols_; ++c) std::swap((*this)(a, c), (*this)(b, c));
}

void IntMatrix::swap_cols(std::size_t a, std::size_t b) {
  if (a == b) return;
  for (std::size_t r = 0; r < rows_; ++r) std::swap((*this)(r, a), (*this)(r, b));
}

void IntMatrix::add_row_multiple(std::size_t dst, std::size_t src, const Int& k) {
  if (k == 0) return;
  for (std::size_t c = 0; c < cols_; ++c) (*this)(dst, c) += k * (*this)(src, c);
}

void IntMatrix::add_col_multiple(std::size_t dst, std::size_t src, const Int& k) {
  if (k == 0) return;
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, dst) += k * (*this)(r, src);
}

void IntMatrix::negate_row(std::size_t r) {
  for (std::size_t c = 0; c < cols_; ++c) (*this)(r, c) = -(*this)(r, c);
}

void IntMatrix::negate_col(std::size_t c) {
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = -(*this)(r, c);
}

bool IntMatrix::is_zero() const {
  return std::all_of(data_.begin(), data_.end(), [](const Int& x) { return x == 0; });
}

bool IntMatrix::operator==(const IntMatrix& o) const {
  return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
}

std::string IntMatrix::str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t r = 0; r < rows_; ++r) {
    if (r) os << ", ";
    os << to_string(row(r));
  }
  os << ']';
  return os.str();
}

IntMatrix operator*(const IntMatrix& a, const IntMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("product of incompatible matrices");
  IntMatrix p(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const Int& x = a(i, k);
      if (x == 0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) p(i, j) += x * b(k, j);
    }
  return p;
}

IntMatrix operator+(const IntMatrix& a, const IntMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("sum shape mismatch");
  IntMatrix s = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s(i, j) += b(i, j);
  return s;
}

IntMatrix operator-(const IntMatrix& a, const IntMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("difference shape mismatch");
  IntMatrix s = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s(i, j) -= b(i, j);
  return s;
}

IntMatrix operator*(const Int& k, const IntMatrix& m) {
  IntMatrix s = m;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) s(i, j) *= k;
  return s;
}

IntVector apply_col(const IntMatrix& m, const IntVector& v) {
  if (m.cols() != v.size()) throw DimensionError("matrix-vector length mismatch");
  IntVector out(m.rows(), Int(0));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (v[j] != 0) out[i] += m(i, j) * v[j];
  return out;
}

IntVector apply_row(const IntVector& v, const IntMatrix& m) {
  if (m.rows() != v.size()) throw DimensionError("vector-matrix length mismatch");
  IntVector out(m.cols(), Int(0));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (v[i] == 0) continue;
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += v[i] * m(i, j);
  }
  return out;
}

IntVector zero_vector(std::size_t n) { return IntVector(n, Int(0)); }

IntVector unit_vector(std::size_t n, std::size_t i) {
  IntVector v(n, Int(0));
  v.at(i) = 1;
  return v;
}

IntVector add(const IntVector& a, const IntVector& b) {
  if (a.size() != b.size()) throw DimensionError("vector sum length mismatch");
  IntVector s = a;
  for (std::size_t i = 0; i < a.size(); ++i) s[i] += b[i];
  return s;
}

IntVector sub(const IntVector& a, const IntVector& b) {
  if (a.size() != b.size()) throw DimensionError("vector difference length mismatch");
  IntVector s = a;
  for (std::size_t i = 0; i < a.size(); ++i) s[i] -= b[i];
  return s;
}

IntVector scale(const Int& k, const IntVector& v) {
  IntVector s = v;
  for (auto& x : s) x *= k;
  return s;
}

bool is_zero(const IntVector& v) {
  return std::all_of(v.begin(), v.end(), [](const Int& x) { return x == 0; });
}

Int content(const IntVector& v) {
  Int g = 0;
  for (const auto& x : v) g = gcd(g, x);
  return g;
}

std::string to_string(const IntVector& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += v[i].get_str();
  }
  return s + ')';
}

IntVector to_int_vector(std::initializer_list<long> xs) {
  IntVector v;
  for (long x : xs) v.emplace_back(x);
  return v;
}

IntVector SmithForm::invariants() const {
  IntVector d;
  for (std::size_t i = 0; i < rank; ++i) d.push_back(D(i, i));
  return d;
}

namespace {

// smallest nonzero |entry| in the block [t.., t..]; first in row-major order on ties
bool find_pivot(const IntMatrix& d, std::size_t t, std::size_t& pr, std::size_t& pc) {
  bool found = false;
  Int best;
  for (std::size_t i = t; i < d.rows(); ++i)
    for (std::size_t j = t; j < d.cols(); ++j) {
      const Int& x = d(i, j);
      if (x == 0) continue;
      Int a = abs(x);
      if (!found || a < best) {
        found = true;
        best = a;
        pr = i;
        pc = j;
      }
    }
  return found;
}

Int tdiv(const Int& a, const Int& b) {
  Int q;
  mpz_tdiv_q(q.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return q;
}

Int fdiv(const Int& a, const Int& b) {
  Int q;
  mpz_fdiv_q(q.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return q;
}

}  // namespace

SmithForm snf(const IntMatrix& m) {
  SmithForm s{IntMatrix::identity(m.rows()), m, IntMatrix::identity(m.cols()), 0};
  IntMatrix& D = s.D;
  const std::size_t lim = std::min(m.rows(), m.cols());
  std::size_t t = 0;
  for (; t < lim; ++t) {
    std::size_t pr = 0, pc = 0;
    if (!find_pivot(D, t, pr, pc)) break;
    for (;;) {
      D.swap_rows(t, pr);
      s.U.swap_rows(t, pr);
      D.swap_cols(t, pc);
      s.V.swap_cols(t, pc);
      bool leftover = false;
      for (std::size_t i = t + 1; i < D.rows(); ++i) {
        if (D(i, t) == 0) continue;
        Int q = -tdiv(D(i, t), D(t, t));
        D.add_row_multiple(i, t, q);
        s.U.add_row_multiple(i, t, q);
        if (D(i, t) != 0) leftover = true;
      }
      for (std::size_t j = t + 1; j < D.cols(); ++j) {
        if (D(t, j) == 0) continue;
        Int q = -tdiv(D(t, j), D(t, t));
        D.add_col_multiple(j, t, q);
        s.V.add_col_multiple(j, t, q);
        if (D(t, j) != 0) leftover = true;
      }
      if (!leftover) {
        // pivot must divide the rest of the block
        bool bad = false;
        for (std::size_t i = t + 1; i < D.rows() && !bad; ++i)
          for (std::size_t j = t + 1; j < D.cols(); ++j)
            if (D(i, j) % D(t, t) != 0) {
              D.add_row_multiple(t, i, 1);
              s.U.add_row_multiple(t, i, 1);
              bad = true;
              break;
            }
        if (!bad) break;
      }
      find_pivot(D, t, pr, pc);
    }
    if (D(t, t) < 0) {
      D.negate_row(t);
      s.U.negate_row(t);
    }
  }
  s.rank = t;
  return s;
}

HermiteForm hnf(const IntMatrix& m) {
  HermiteForm h{m, IntMatrix::identity(m.rows()), 0};
  IntMatrix& H = h.H;
  std::size_t r = 0;
  for (std::size_t c = 0; c < H.cols() && r < H.rows(); ++c) {
    for (;;) {
      std::size_t best = H.rows();
      for (std::size_t i = r; i < H.rows(); ++i)
        if (H(i, c) != 0 && (best == H.rows() || abs(H(i, c)) < abs(H(best, c)))) best = i;
      if (best == H.rows()) break;
      H.swap_rows(r, best);
      h.U.swap_rows(r, best);
      bool leftover = false;
      for (std::size_t i = r + 1; i < H.rows(); ++i) {
        if (H(i, c) == 0) continue;
        Int q = -tdiv(H(i, c), H(r, c));
        H.add_row_multiple(i, r, q);
        h.U.add_row_multiple(i, r, q);
        if (H(i, c) != 0) leftover = true;
      }
      if (!leftover) break;
    }
    if (H(r, c) == 0) continue;
    if (H(r, c) < 0) {
      H.negate_row(r);
      h.U.negate_row(r);
    }
    for (std::size_t i = 0; i < r; ++i) {
      Int q = -fdiv(H(i, c), H(r, c));
      H.add_row_multiple(i, r, q);
      h.U.add_row_multiple(i, r, q);
    }
    ++r;
  }
  h.rank = r;
  return h;
}

std::optional<IntVector> solve_linear(const IntMatrix& m, const IntVector& b) {
  if (b.size() != m.rows())
    throw DimensionError("solve_linear: rhs has length " + std::to_string(b.size()) +
                         ", matrix has " + std::to_string(m.rows()) + " rows");
  SmithForm s = snf(m);
  IntVector c = apply_col(s.U, b);
  IntVector y(m.cols(), Int(0));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (i < s.rank) {
      const Int& d = s.D(i, i);
      if (c[i] % d != 0) return std::nullopt;
      y[i] = c[i] / d;
    } else if (c[i] != 0) {
      return std::nullopt;
    }
  }
  return apply_col(s.V, y);
}

IntMatrix left_kernel(const IntMatrix& m) {
  HermiteForm h = hnf(m);
  return h.U.submatrix(h.rank, 0, m.rows() - h.rank, m.rows());
}

IntMatrix row_lattice_basis(const IntMatrix& m) {
  HermiteForm h = hnf(m);
  return h.H.submatrix(0, 0, h.rank, m.cols());
}

Int determinant(const IntMatrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("determinant of a non-square matrix");
  const std::size_t n = m.rows();
  if (n == 0) return 1;
  IntMatrix a = m;
  Int prev = 1;
  int sign = 1;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (a(k, k) == 0) {
      std::size_t p = k + 1;
      while (p < n && a(p, k) == 0) ++p;
      if (p == n) return 0;
      a.swap_rows(k, p);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i)
      for (std::size_t j = k + 1; j < n; ++j)
        a(i, j) = (a(i, j) * a(k, k) - a(i, k) * a(k, j)) / prev;
    prev = a(k, k);
  }
  return sign * a(n - 1, n - 1);
}

std::size_t rank(const IntMatrix& m) { return hnf(m).rank; }

IntMatrix inverse_unimodular(const IntMatrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("inverse of a non-square matrix");
  HermiteForm h = hnf(m);
  if (!(h.H == IntMatrix::identity(m.rows())))
    throw std::domain_error("matrix is not unimodular");
  return h.U;
}

}  // namespace efg

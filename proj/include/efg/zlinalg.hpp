#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace efg {

using Int = mpz_class;
using IntVector = std::vector<Int>;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Dense integer matrix, row-major. Elements of groups are row vectors
// throughout the library, so a homomorphism acts as x -> x * M.
class IntMatrix {
 public:
  IntMatrix() = default;
  IntMatrix(std::size_t rows, std::size_t cols);
  IntMatrix(std::initializer_list<std::initializer_list<long>> rows);

  static IntMatrix identity(std::size_t n);
  static IntMatrix from_rows(const std::vector<IntVector>& rows, std::size_t cols);
  static IntMatrix diagonal(const IntVector& diag);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  Int& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const Int& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  IntVector row(std::size_t r) const;
  IntVector column(std::size_t c) const;
  void set_row(std::size_t r, const IntVector& v);
  void append_row(const IntVector& v);
  void append_rows(const IntMatrix& m);

  IntMatrix transpose() const;
  IntMatrix submatrix(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
  IntMatrix without_zero_rows() const;

  // elementary operations, used by the normal form routines
  void swap_rows(std::size_t a, std::size_t b);
  void swap_cols(std::size_t a, std::size_t b);
  void add_row_multiple(std::size_t dst, std::size_t src, const Int& k);  // row dst += k*row src
  void add_col_multiple(std::size_t dst, std::size_t src, const Int& k);
  void negate_row(std::size_t r);
  void negate_col(std::size_t c);

  bool is_zero() const;
  bool operator==(const IntMatrix& o) const;

  std::string str() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Int> data_;
};

IntMatrix operator*(const IntMatrix& a, const IntMatrix& b);
IntMatrix operator+(const IntMatrix& a, const IntMatrix& b);
IntMatrix operator-(const IntMatrix& a, const IntMatrix& b);
IntMatrix operator*(const Int& k, const IntMatrix& m);

// column action M*v and row action v*M
IntVector apply_col(const IntMatrix& m, const IntVector& v);
IntVector apply_row(const IntVector& v, const IntMatrix& m);

IntVector zero_vector(std::size_t n);
IntVector unit_vector(std::size_t n, std::size_t i);
IntVector add(const IntVector& a, const IntVector& b);
IntVector sub(const IntVector& a, const IntVector& b);
IntVector scale(const Int& k, const IntVector& v);
bool is_zero(const IntVector& v);
Int content(const IntVector& v);  // gcd of entries, 0 for the zero vector
std::string to_string(const IntVector& v);
IntVector to_int_vector(std::initializer_list<long> xs);

struct SmithForm {
  IntMatrix U;  // rows x rows, unimodular
  IntMatrix D;  // rows x cols, diagonal
  IntMatrix V;  // cols x cols, unimodular
  std::size_t rank = 0;
  IntVector invariants() const;  // the nonzero diagonal, in order
};

// U*M*V = D, d1 | d2 | ... with zeros last. Pivot is the nonzero entry of
// least absolute value, ties going to the first in row-major order.
SmithForm snf(const IntMatrix& m);

struct HermiteForm {
  IntMatrix H;
  IntMatrix U;  // U*M = H
  std::size_t rank = 0;
};

// Row Hermite form: echelon, positive pivots, entries above a pivot in [0, pivot).
HermiteForm hnf(const IntMatrix& m);

// x with M*x = b, or nullopt. Throws DimensionError if b has the wrong length.
std::optional<IntVector> solve_linear(const IntMatrix& m, const IntVector& b);

// basis (as rows) of {c : c*M = 0}
IntMatrix left_kernel(const IntMatrix& m);

// Hermite basis of the row lattice, zero rows dropped
IntMatrix row_lattice_basis(const IntMatrix& m);

Int determinant(const IntMatrix& m);
std::size_t rank(const IntMatrix& m);
IntMatrix inverse_unimodular(const IntMatrix& m);  // throws if |det| != 1

}  // namespace efg

#pragma once

#include <initializer_list>
#include <optional>
#include <vector>

namespace sdeqml {

using Vector = std::vector<double>;

// Dense real matrix, row-major. Sized for the small systems this library
// works with (state dimension d up to ~10, generator dimension d^2+2d+7).
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, 0.0) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(int n);
  static Matrix diag(const Vector& d);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

  Matrix transpose() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  const std::vector<double>& data() const { return data_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, const Vector& x);

bool all_finite(const Matrix& a);
bool all_finite(const Vector& v);
double norm1(const Matrix& a);       // max column sum
double max_abs(const Matrix& a);
double max_abs(const Vector& v);
Matrix outer(const Vector& u, const Vector& v);
Matrix symmetrized(const Matrix& a);  // (A + A^T)/2

// Column-stacking vectorization: entry (i,j) of a d x d matrix maps to
// position j*d + i. This order is fixed repo-wide; every Kronecker identity
// below assumes it.
Vector vec(const Matrix& m);
Matrix unvec(const Vector& v, int d);

// Kronecker product A (p x q) with B (r x s) -> pr x qs. Under the
// column-stacking convention, vec(B*X*A^T) = kron(A, B) * vec(X).
Matrix kron(const Matrix& a, const Matrix& b);

// Kronecker sum of square matrices: A (x) I_n + I_n (x) B.
Matrix kron_sum(const Matrix& a, const Matrix& b);

// Kronecker sum of vectors of length d: a (x) I_d + I_d (x) b, a d^2 x d
// matrix. This is the reading that makes the generator's coupling blocks
// conformable with the mean state.
Matrix kron_sum(const Vector& a, const Vector& b);

// Matrix exponential by diagonal Pade approximation (degree 6) with scaling
// and squaring chosen so the scaled 1-norm is at most 0.5.
Matrix expm(const Matrix& a);

struct LogdetQuad {
  double logdet = 0.0;
  double quad = 0.0;
};

// Cholesky-based evaluation of (ln det S, r^T S^{-1} r) for a symmetric S.
// The input is symmetrized before factorization. Returns nullopt when S is
// not positive definite (or contains non-finite entries), which callers use
// as a rejection signal rather than an error.
std::optional<LogdetQuad> chol_logdet_quad(const Matrix& s, const Vector& r);

// LU with partial pivoting. Throws std::invalid_argument on singular input.
Matrix solve(const Matrix& a, const Matrix& b);
Vector solve(const Matrix& a, const Vector& b);
double determinant(const Matrix& a);
Matrix inverse(const Matrix& a);

}  // namespace sdeqml

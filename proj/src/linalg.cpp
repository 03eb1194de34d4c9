#include "sdeqml/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace sdeqml {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = static_cast<int>(rows.size());
  cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
  data_.reserve(static_cast<size_t>(rows_) * cols_);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != cols_)
      throw std::invalid_argument("Matrix: ragged initializer list");
    data_.insert(data_.end(), row.begin(), row.end());
  }
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diag(const Vector& d) {
  Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
  for (size_t i = 0; i < d.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = d[i];
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_)
    throw std::invalid_argument("Matrix +=: shape mismatch");
  for (size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_)
    throw std::invalid_argument("Matrix -=: shape mismatch");
  for (size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("Matrix *: shape mismatch");
  Matrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Vector operator*(const Matrix& a, const Vector& x) {
  if (a.cols() != static_cast<int>(x.size()))
    throw std::invalid_argument("Matrix * Vector: shape mismatch");
  Vector y(a.rows(), 0.0);
  for (int i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

bool all_finite(const Matrix& a) {
  for (double x : a.data())
    if (!std::isfinite(x)) return false;
  return true;
}

bool all_finite(const Vector& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

double norm1(const Matrix& a) {
  double best = 0.0;
  for (int j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i) s += std::fabs(a(i, j));
    best = std::max(best, s);
  }
  return best;
}

double max_abs(const Matrix& a) {
  double best = 0.0;
  for (double x : a.data()) best = std::max(best, std::fabs(x));
  return best;
}

double max_abs(const Vector& v) {
  double best = 0.0;
  for (double x : v) best = std::max(best, std::fabs(x));
  return best;
}

Matrix outer(const Vector& u, const Vector& v) {
  Matrix m(static_cast<int>(u.size()), static_cast<int>(v.size()));
  for (size_t i = 0; i < u.size(); ++i)
    for (size_t j = 0; j < v.size(); ++j) m(static_cast<int>(i), static_cast<int>(j)) = u[i] * v[j];
  return m;
}

Matrix symmetrized(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("symmetrized: square input required");
  Matrix s(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

Vector vec(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("vec: square input required");
  const int d = m.rows();
  Vector v(static_cast<size_t>(d) * d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) v[static_cast<size_t>(j) * d + i] = m(i, j);
  return v;
}

Matrix unvec(const Vector& v, int d) {
  if (static_cast<int>(v.size()) != d * d) throw std::invalid_argument("unvec: size mismatch");
  Matrix m(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) m(i, j) = v[static_cast<size_t>(j) * d + i];
  return m;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      if (aij == 0.0) continue;
      for (int k = 0; k < b.rows(); ++k)
        for (int l = 0; l < b.cols(); ++l)
          c(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
    }
  }
  return c;
}

Matrix kron_sum(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
    throw std::invalid_argument("kron_sum: equal square shapes required");
  const Matrix id = Matrix::identity(a.rows());
  return kron(a, id) + kron(id, b);
}

Matrix kron_sum(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("kron_sum: equal lengths required");
  const int d = static_cast<int>(a.size());
  Matrix ca(d, 1), cb(d, 1);
  for (int i = 0; i < d; ++i) {
    ca(i, 0) = a[i];
    cb(i, 0) = b[i];
  }
  const Matrix id = Matrix::identity(d);
  return kron(ca, id) + kron(id, cb);
}

Matrix expm(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("expm: square input required");
  if (!all_finite(a)) throw std::invalid_argument("expm: non-finite entries");
  const int n = a.rows();

  // Scale so ||A/2^s||_1 <= 0.5, apply the degree-6 diagonal Pade
  // approximant, square back.
  int s = 0;
  double nrm = norm1(a);
  while (nrm > 0.5 && s < 64) {
    nrm *= 0.5;
    ++s;
  }
  Matrix x = a;
  x *= std::ldexp(1.0, -s);

  // c_k = q!(2q-k)!/((2q)! k!(q-k)!) for q = 6.
  constexpr int q = 6;
  double c[q + 1];
  c[0] = 1.0;
  for (int k = 1; k <= q; ++k) c[k] = c[k - 1] * (q - k + 1) / (k * (2.0 * q - k + 1));

  const Matrix x2 = x * x;
  const Matrix x4 = x2 * x2;
  const Matrix x6 = x4 * x2;
  Matrix even = Matrix::identity(n);
  even *= c[0];
  even += c[2] * x2 + c[4] * x4 + c[6] * x6;
  Matrix odd_inner = c[1] * Matrix::identity(n) + c[3] * x2 + c[5] * x4;
  const Matrix odd = x * odd_inner;

  // (even - odd) E = even + odd
  Matrix e = solve(even - odd, even + odd);
  for (int k = 0; k < s; ++k) e = e * e;
  return e;
}

namespace {

// PA = LU factorization in place; perm holds the row permutation and sign
// the permutation parity. Returns false on (numerically) singular input.
bool lu_factor(Matrix& m, std::vector<int>& perm, double& sign) {
  const int n = m.rows();
  perm.resize(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  sign = 1.0;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    double best = std::fabs(m(k, k));
    for (int i = k + 1; i < n; ++i) {
      if (std::fabs(m(i, k)) > best) {
        best = std::fabs(m(i, k));
        piv = i;
      }
    }
    if (best == 0.0) return false;
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
      std::swap(perm[k], perm[piv]);
      sign = -sign;
    }
    for (int i = k + 1; i < n; ++i) {
      m(i, k) /= m(k, k);
      const double f = m(i, k);
      if (f == 0.0) continue;
      for (int j = k + 1; j < n; ++j) m(i, j) -= f * m(k, j);
    }
  }
  return true;
}

}  // namespace

Matrix solve(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || a.rows() != b.rows())
    throw std::invalid_argument("solve: shape mismatch");
  const int n = a.rows();
  Matrix lu = a;
  std::vector<int> perm;
  double sign;
  if (!lu_factor(lu, perm, sign)) throw std::invalid_argument("solve: singular matrix");
  Matrix x(n, b.cols());
  for (int col = 0; col < b.cols(); ++col) {
    // forward substitution on the permuted right-hand side
    Vector y(n);
    for (int i = 0; i < n; ++i) {
      double s = b(perm[i], col);
      for (int j = 0; j < i; ++j) s -= lu(i, j) * y[j];
      y[i] = s;
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = y[i];
      for (int j = i + 1; j < n; ++j) s -= lu(i, j) * x(j, col);
      x(i, col) = s / lu(i, i);
    }
  }
  return x;
}

Vector solve(const Matrix& a, const Vector& b) {
  Matrix rhs(static_cast<int>(b.size()), 1);
  for (size_t i = 0; i < b.size(); ++i) rhs(static_cast<int>(i), 0) = b[i];
  const Matrix x = solve(a, rhs);
  Vector out(b.size());
  for (size_t i = 0; i < b.size(); ++i) out[i] = x(static_cast<int>(i), 0);
  return out;
}

double determinant(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("determinant: square input required");
  Matrix lu = a;
  std::vector<int> perm;
  double sign;
  if (!lu_factor(lu, perm, sign)) return 0.0;
  double det = sign;
  for (int i = 0; i < a.rows(); ++i) det *= lu(i, i);
  return det;
}

Matrix inverse(const Matrix& a) { return solve(a, Matrix::identity(a.rows())); }

std::optional<LogdetQuad> chol_logdet_quad(const Matrix& s, const Vector& r) {
  if (s.rows() != s.cols() || s.rows() != static_cast<int>(r.size()))
    throw std::invalid_argument("chol_logdet_quad: shape mismatch");
  if (!all_finite(s) || !all_finite(r)) return std::nullopt;
  const int n = s.rows();
  Matrix l = symmetrized(s);
  for (int k = 0; k < n; ++k) {
    double d = l(k, k);
    for (int j = 0; j < k; ++j) d -= l(k, j) * l(k, j);
    if (!(d > 0.0)) return std::nullopt;
    l(k, k) = std::sqrt(d);
    for (int i = k + 1; i < n; ++i) {
      double v = l(i, k);
      for (int j = 0; j < k; ++j) v -= l(i, j) * l(k, j);
      l(i, k) = v / l(k, k);
    }
  }
  LogdetQuad out;
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    out.logdet += 2.0 * std::log(l(i, i));
    double v = r[i];
    for (int j = 0; j < i; ++j) v -= l(i, j) * y[j];
    y[i] = v / l(i, i);
    out.quad += y[i] * y[i];
  }
  return out;
}

}  // namespace sdeqml

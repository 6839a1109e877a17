#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdident {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Network construction / validation.
struct NonCompliantNetwork : Error { using Error::Error; };
struct CertificateFailure : Error { using Error::Error; };
struct ConstructionFailure : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };

// Network file parsing.
struct SyntaxError : Error { using Error::Error; };
struct UnknownSpecies : Error { using Error::Error; };
struct DuplicateSpecies : Error { using Error::Error; };
struct DuplicateRate : Error { using Error::Error; };
struct ArityError : Error { using Error::Error; };

// Grid / field files.
struct FormatError : Error { using Error::Error; };
struct EmptyDomain : Error { using Error::Error; };
struct DisconnectedDomain : Error { using Error::Error; };

// Solvers.
struct LinearSolveFailure : Error { using Error::Error; };
struct ReactionSolveFailure : Error { using Error::Error; };
struct NonFiniteState : Error { using Error::Error; };
struct NonFiniteAdjoint : Error { using Error::Error; };
struct InvalidInitial : Error { using Error::Error; };

// Optimization / configuration.
struct InvalidBounds : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

/// Dense row-major matrix, sized for small problems (certificates, cell-local
/// Newton systems, test oracles). Not a linear algebra library.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, fill) {}

  static DenseMatrix identity(int n) {
    DenseMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int r, int c) { return a_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return a_[static_cast<size_t>(r) * cols_ + c]; }
  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }

  bool operator==(const DenseMatrix&) const = default;

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

/// LU factorization with partial pivoting, in place. Returns false on a
/// (numerically) singular pivot. `piv` receives the row permutation.
inline bool lu_factor(DenseMatrix& a, std::vector<int>& piv) {
  const int n = a.rows();
  piv.resize(n);
  for (int i = 0; i < n; ++i) piv[i] = i;
  for (int col = 0; col < n; ++col) {
    int p = col;
    double best = std::fabs(a(col, col));
    for (int r = col + 1; r < n; ++r) {
      const double v = std::fabs(a(r, col));
      if (v > best) { best = v; p = r; }
    }
    if (best == 0.0 || !std::isfinite(best)) return false;
    if (p != col) {
      std::swap(piv[p], piv[col]);
      for (int c = 0; c < n; ++c) std::swap(a(p, c), a(col, c));
    }
    const double inv = 1.0 / a(col, col);
    for (int r = col + 1; r < n; ++r) {
      const double f = a(r, col) * inv;
      a(r, col) = f;
      if (f != 0.0)
        for (int c = col + 1; c < n; ++c) a(r, c) -= f * a(col, c);
    }
  }
  return true;
}

/// Solves L U x = P b for a factorization produced by lu_factor.
inline void lu_solve(const DenseMatrix& lu, const std::vector<int>& piv,
                     std::span<const double> b, std::span<double> x) {
  const int n = lu.rows();
  for (int i = 0; i < n; ++i) x[i] = b[piv[i]];
  for (int i = 1; i < n; ++i) {
    double s = x[i];
    for (int j = 0; j < i; ++j) s -= lu(i, j) * x[j];
    x[i] = s;
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int j = i + 1; j < n; ++j) s -= lu(i, j) * x[j];
    x[i] = s / lu(i, i);
  }
}

/// Direct dense solve; throws LinearSolveFailure on singular systems.
inline std::vector<double> dense_solve(DenseMatrix a, std::span<const double> b) {
  std::vector<int> piv;
  if (!lu_factor(a, piv)) throw LinearSolveFailure("dense_solve: singular matrix");
  std::vector<double> x(b.size());
  lu_solve(a, piv, b, x);
  return x;
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

}  // namespace rdident

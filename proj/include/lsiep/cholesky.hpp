#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "lsiep/dense_matrix.hpp"
#include "lsiep/errors.hpp"
#include "lsiep/sym_matrix.hpp"

namespace lsiep {

// Lower Cholesky factor L with A = L L^T, stored packed row-wise
// (row i at offset i(i+1)/2).
class CholFactor {
 public:
  CholFactor() = default;
  CholFactor(std::size_t n, std::vector<double> packed) : n_(n), l_(std::move(packed)) {}

  std::size_t dim() const { return n_; }

  double at(std::size_t i, std::size_t j) const {
    require(j <= i && i < n_, "CholFactor::at: lower triangle only");
    return l_[i * (i + 1) / 2 + j];
  }

  // In-place L y = b.
  void solve_lower(std::span<double> b) const {
    require(b.size() == n_, "solve_lower: dimension mismatch");
    for (std::size_t i = 0; i < n_; ++i) {
      const double* row = l_.data() + i * (i + 1) / 2;
      double s = b[i];
      for (std::size_t j = 0; j < i; ++j) s -= row[j] * b[j];
      b[i] = s / row[i];
    }
  }

  // In-place L^T x = y.
  void solve_upper(std::span<double> b) const {
    require(b.size() == n_, "solve_upper: dimension mismatch");
    for (std::size_t ii = n_; ii-- > 0;) {
      double s = b[ii];
      for (std::size_t i = ii + 1; i < n_; ++i) s -= l_[i * (i + 1) / 2 + ii] * b[i];
      b[ii] = s / l_[ii * (ii + 1) / 2 + ii];
    }
  }

  void solve_in_place(std::span<double> b) const {
    solve_lower(b);
    solve_upper(b);
  }

  std::vector<double> solve(std::span<const double> b) const {
    std::vector<double> x(b.begin(), b.end());
    solve_in_place(x);
    return x;
  }

  // log det A = 2 sum log L_ii
  double log_det() const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) s += std::log(l_[i * (i + 1) / 2 + i]);
    return 2.0 * s;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> l_;
};

namespace detail {

// Factors a packed lower triangle in place.  Throws NotPositiveDefinite
// when a pivot fails to stay positive.
inline void cholesky_packed(std::size_t n, std::vector<double>& a) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ri = a.data() + i * (i + 1) / 2;
    for (std::size_t j = 0; j < i; ++j) {
      const double* rj = a.data() + j * (j + 1) / 2;
      double s = ri[j];
      for (std::size_t k = 0; k < j; ++k) s -= ri[k] * rj[k];
      ri[j] = s / rj[j];
    }
    double s = ri[i];
    for (std::size_t k = 0; k < i; ++k) s -= ri[k] * ri[k];
    if (!(s > 0.0)) throw NotPositiveDefinite("cholesky: nonpositive pivot at index " + std::to_string(i));
    ri[i] = std::sqrt(s);
  }
}

}  // namespace detail

inline CholFactor cholesky_spd(const SymMatrix& a) {
  std::vector<double> packed(a.dim() * (a.dim() + 1) / 2, 0.0);
  a.for_each_stored([&](std::size_t i, std::size_t j, double v) {
    packed[i * (i + 1) / 2 + j] = v;
  });
  detail::cholesky_packed(a.dim(), packed);
  return CholFactor(a.dim(), std::move(packed));
}

// Uses the lower triangle of a square matrix; symmetry of the upper part is
// not checked.
inline CholFactor cholesky_spd(const DenseMatrix& a) {
  require(a.rows() == a.cols(), "cholesky_spd: square matrix required");
  const std::size_t n = a.rows();
  std::vector<double> packed(n * (n + 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) packed[i * (i + 1) / 2 + j] = a(i, j);
  detail::cholesky_packed(n, packed);
  return CholFactor(n, std::move(packed));
}

}  // namespace lsiep

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "lsiep/vec_ops.hpp"

namespace lsiep {

// General dense matrix, column-major.  Used for the small dense objects of
// the toolkit (Gram matrices, Jacobians, Hessians) and for eigenvector sets,
// where contiguous columns are what the algorithms traverse.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return a_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[j * rows_ + i]; }

  std::span<double> col(std::size_t j) { return {a_.data() + j * rows_, rows_}; }
  std::span<const double> col(std::size_t j) const { return {a_.data() + j * rows_, rows_}; }

  std::vector<double>& data() { return a_; }
  const std::vector<double>& data() const { return a_; }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : a_) s += v * v;
    return std::sqrt(s);
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

// y = M x
inline std::vector<double> matvec(const DenseMatrix& m, std::span<const double> x) {
  require(x.size() == m.cols(), "matvec: dimension mismatch");
  std::vector<double> y(m.rows(), 0.0);
  for (std::size_t j = 0; j < m.cols(); ++j) axpy(x[j], m.col(j), y);
  return y;
}

// y = M^T x
inline std::vector<double> matvec_t(const DenseMatrix& m, std::span<const double> x) {
  require(x.size() == m.rows(), "matvec_t: dimension mismatch");
  std::vector<double> y(m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j) y[j] = dot(m.col(j), x);
  return y;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.rows(), "matmul: dimension mismatch");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    auto cj = c.col(j);
    for (std::size_t k = 0; k < a.cols(); ++k) axpy(b(k, j), a.col(k), cj);
  }
  return c;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) t(j, i) = a(i, j);
  return t;
}

// x^T M y for square M
inline double bilinear(const DenseMatrix& m, std::span<const double> x,
                       std::span<const double> y) {
  auto my = matvec(m, y);
  return dot(x, my);
}

}  // namespace lsiep

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "lsiep/cholesky.hpp"
#include "lsiep/dense_matrix.hpp"
#include "lsiep/eig_types.hpp"
#include "lsiep/errors.hpp"
#include "lsiep/sym_matrix.hpp"
#include "lsiep/vec_ops.hpp"

namespace lsiep {

// Prescribed eigenvalues, ascending.
class SpectralTarget {
 public:
  explicit SpectralTarget(std::vector<double> values) : values_(std::move(values)) {
    require(!values_.empty(), "SpectralTarget: empty");
    require(all_finite(values_), "SpectralTarget: nonfinite entry");
    require(std::is_sorted(values_.begin(), values_.end()), "SpectralTarget: not ascending");
  }

  std::size_t count() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double norm() const { return norm2(values_); }

 private:
  std::vector<double> values_;
};

// Gram matrix of the basis under the Frobenius inner product, with its
// Cholesky factor.  Failure means the basis is linearly dependent.
inline std::pair<DenseMatrix, CholFactor> gram_matrix(std::span<const SymMatrix> basis) {
  require(!basis.empty(), "gram_matrix: empty basis");
  const std::size_t ell = basis.size();
  DenseMatrix b(ell, ell);
  for (std::size_t i = 0; i < ell; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double g = frobenius_inner(basis[i], basis[j]);
      b(i, j) = g;
      b(j, i) = g;
    }
  try {
    CholFactor chol = cholesky_spd(b);
    return {std::move(b), std::move(chol)};
  } catch (const NotPositiveDefinite&) {
    throw NotPositiveDefinite("gram_matrix: basis matrices are linearly dependent");
  }
}

// A(x) = A0 + sum x_i A_i over a fixed symmetric basis.
class AffineFamily {
 public:
  AffineFamily(SymMatrix a0, std::vector<SymMatrix> basis)
      : a0_(std::move(a0)), basis_(std::move(basis)) {
    require(!basis_.empty(), "AffineFamily: empty basis");
    for (const auto& b : basis_)
      require(b.dim() == a0_.dim(), "AffineFamily: dimension mismatch");
    auto [g, chol] = gram_matrix(basis_);
    gram_ = std::move(g);
    gram_chol_ = std::move(chol);
  }

  std::size_t dim() const { return a0_.dim(); }
  std::size_t param_count() const { return basis_.size(); }
  const SymMatrix& a0() const { return a0_; }
  const SymMatrix& basis(std::size_t i) const { return basis_[i]; }
  std::span<const SymMatrix> basis() const { return basis_; }
  const DenseMatrix& gram() const { return gram_; }
  const CholFactor& gram_chol() const { return gram_chol_; }

  SymMatrix evaluate(std::span<const double> x) const {
    require(x.size() == basis_.size(), "evaluate: wrong parameter count");
    std::vector<SymMatrix> terms;
    terms.reserve(basis_.size() + 1);
    std::vector<double> coeffs;
    coeffs.reserve(basis_.size() + 1);
    terms.push_back(a0_);
    coeffs.push_back(1.0);
    for (std::size_t i = 0; i < basis_.size(); ++i) {
      terms.push_back(basis_[i]);
      coeffs.push_back(x[i]);
    }
    return combine(terms, coeffs);
  }

  // induced metric <u, v>_B = u^T B v
  double b_inner(std::span<const double> u, std::span<const double> v) const {
    require(u.size() == basis_.size() && v.size() == basis_.size(),
            "b_inner: wrong parameter count");
    return bilinear(gram_, u, v);
  }

  double b_norm(std::span<const double> u) const { return std::sqrt(std::max(0.0, b_inner(u, u))); }

 private:
  SymMatrix a0_;
  std::vector<SymMatrix> basis_;
  DenseMatrix gram_;
  CholFactor gram_chol_;
};

// r_i = lambda_{rho_i}(x) - lambda*_i for already-assigned pairs.
inline std::vector<double> residual(const PartialEigenPairs& pairs, const SpectralTarget& tgt) {
  require(pairs.count() == tgt.count(), "residual: count mismatch");
  return sub(pairs.values, tgt.values());
}

// J[i][j] = q_i^T A_j q_i (Hellmann-Feynman); one matvec per (j, i), reusing
// A_j q_i for the quadratic form.
inline DenseMatrix jacobian(const PartialEigenPairs& pairs, std::span<const SymMatrix> basis) {
  const std::size_t m = pairs.count(), ell = basis.size();
  require(pairs.dim() > 0, "jacobian: empty pairs");
  DenseMatrix j(m, ell);
  std::vector<double> aq(pairs.dim());
  for (std::size_t col = 0; col < ell; ++col) {
    require(basis[col].dim() == pairs.dim(), "jacobian: dimension mismatch");
    for (std::size_t i = 0; i < m; ++i) {
      auto qi = pairs.vectors.col(i);
      basis[col].matvec(qi.data(), aq.data());
      j(i, col) = dot(qi, aq);
    }
  }
  return j;
}

// grad F = J^T r
inline std::vector<double> gradient(const DenseMatrix& jac, std::span<const double> r) {
  return matvec_t(jac, r);
}

struct ObjectiveEval {
  std::vector<double> residual;
  double f = 0.0;
  DenseMatrix jacobian;
  std::vector<double> gradient;
};

inline ObjectiveEval evaluate_objective(const AffineFamily& fam, const PartialEigenPairs& pairs,
                                        const SpectralTarget& tgt) {
  ObjectiveEval out;
  out.residual = residual(pairs, tgt);
  out.f = 0.5 * dot(out.residual, out.residual);
  out.jacobian = jacobian(pairs, fam.basis());
  out.gradient = gradient(out.jacobian, out.residual);
  return out;
}

// H_F = J^T J + sum_k r_k H_k with
// (H_k)_{ij} = 2 sum_{t != k} (q_t^T A_i q_k)(q_t^T A_j q_k) / (lambda_k - lambda_t),
// t running over the assigned pairs.  Gaps at or below delta * max(1,
// |lambda_k|) are skipped and counted; the result is symmetrized.
inline DenseMatrix hessian(const AffineFamily& fam, const PartialEigenPairs& pairs,
                           const SpectralTarget& tgt, double delta = 1e-8,
                           std::size_t* skipped = nullptr) {
  const std::size_t m = pairs.count(), ell = fam.param_count(), n = pairs.dim();
  auto r = residual(pairs, tgt);
  auto jac = jacobian(pairs, fam.basis());
  DenseMatrix h(ell, ell);
  for (std::size_t i = 0; i < ell; ++i)
    for (std::size_t j = 0; j < ell; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < m; ++k) s += jac(k, i) * jac(k, j);
      h(i, j) = s;
    }

  if (skipped) *skipped = 0;
  DenseMatrix w(m, ell);  // w(t, j) = q_t^T A_j q_k for the current k
  std::vector<double> aq(n);
  for (std::size_t k = 0; k < m; ++k) {
    auto qk = pairs.vectors.col(k);
    for (std::size_t j = 0; j < ell; ++j) {
      fam.basis(j).matvec(qk.data(), aq.data());
      for (std::size_t t = 0; t < m; ++t) w(t, j) = dot(pairs.vectors.col(t), aq);
    }
    const double gap_floor = delta * std::max(1.0, std::abs(pairs.values[k]));
    for (std::size_t t = 0; t < m; ++t) {
      if (t == k) continue;
      const double gap = pairs.values[k] - pairs.values[t];
      if (std::abs(gap) <= gap_floor) {
        if (skipped) ++*skipped;
        continue;
      }
      const double c = 2.0 * r[k] / gap;
      for (std::size_t i = 0; i < ell; ++i)
        for (std::size_t j = 0; j < ell; ++j) h(i, j) += c * w(t, i) * w(t, j);
    }
  }
  for (std::size_t i = 0; i < ell; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double avg = 0.5 * (h(i, j) + h(j, i));
      h(i, j) = avg;
      h(j, i) = avg;
    }
  return h;
}

}  // namespace lsiep

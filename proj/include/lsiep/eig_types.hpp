#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lsiep/dense_matrix.hpp"
#include "lsiep/errors.hpp"
#include "lsiep/vec_ops.hpp"

namespace lsiep {

struct EigStats {
  std::size_t iterations = 0;  // QR sweeps or Lanczos steps
  std::size_t matvecs = 0;
  std::size_t restarts = 0;
};

// Full decomposition A = Q diag(values) Q^T, values ascending, Q orthonormal
// columns.
struct EigenDecomposition {
  std::vector<double> values;
  DenseMatrix vectors;
  EigStats stats;
};

enum class PairSelector { SmallestM, ClosestToShift, AssignedFromFull };

// m eigenpairs of an n-dim matrix; vectors holds the n-by-m column set.
struct PartialEigenPairs {
  std::vector<double> values;
  DenseMatrix vectors;
  PairSelector selector = PairSelector::SmallestM;
  EigStats stats;

  std::size_t count() const { return values.size(); }
  std::size_t dim() const { return vectors.rows(); }
};

// Makes iterate traces reproducible: first nonzero component (relative to
// the column peak) is made positive.
inline void canonical_sign(DenseMatrix& q, std::size_t j) {
  auto c = q.col(j);
  double peak = 0.0;
  for (double v : c) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) return;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (std::abs(c[i]) > 1e-6 * peak) {
      if (c[i] < 0.0)
        for (double& v : c) v = -v;
      return;
    }
  }
}

inline PartialEigenPairs select_pairs(const EigenDecomposition& full,
                                      std::span<const std::size_t> indices) {
  const std::size_t n = full.vectors.rows();
  PartialEigenPairs out;
  out.selector = PairSelector::AssignedFromFull;
  out.stats = full.stats;
  out.values.reserve(indices.size());
  out.vectors = DenseMatrix(n, indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    require(indices[k] < full.values.size(), "select_pairs: index out of range");
    out.values.push_back(full.values[indices[k]]);
    auto src = full.vectors.col(indices[k]);
    auto dst = out.vectors.col(k);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

}  // namespace lsiep

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <tuple>
#include <vector>

#include "lsiep/errors.hpp"
#include "lsiep/vec_ops.hpp"

namespace lsiep {

enum class Storage { Dense, Sparse };

struct Triplet {
  std::size_t row, col;
  double value;
};

// Real symmetric matrix.  Only the lower triangle (diagonal included) is
// stored, either as a packed dense array or as CSR; the transpose half is
// implied, so the materialized matrix is symmetric by construction.
class SymMatrix {
 public:
  SymMatrix() = default;

  static SymMatrix dense_zero(std::size_t n) {
    SymMatrix m;
    m.n_ = n;
    m.storage_ = Storage::Dense;
    m.dense_.assign(n * (n + 1) / 2, 0.0);
    return m;
  }

  static SymMatrix sparse_zero(std::size_t n) {
    SymMatrix m;
    m.n_ = n;
    m.storage_ = Storage::Sparse;
    m.row_ptr_.assign(n + 1, 0);
    return m;
  }

  static SymMatrix identity(std::size_t n, Storage storage = Storage::Sparse) {
    std::vector<Triplet> t;
    t.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_triplets(n, t, storage);
  }

  static SymMatrix diagonal(std::span<const double> d, Storage storage = Storage::Sparse) {
    std::vector<Triplet> t;
    t.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) t.push_back({i, i, d[i]});
    return from_triplets(d.size(), t, storage);
  }

  // Takes the lower triangle of a full row-major n*n array as the truth.
  static SymMatrix from_full(std::size_t n, std::span<const double> full,
                             Storage storage = Storage::Dense) {
    require(full.size() == n * n, "from_full: bad array length");
    if (storage == Storage::Dense) {
      SymMatrix m = dense_zero(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) m.dense_[i * (i + 1) / 2 + j] = full[i * n + j];
      return m;
    }
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        if (full[i * n + j] != 0.0) t.push_back({i, j, full[i * n + j]});
    return from_triplets(n, t, Storage::Sparse);
  }

  // Entries may address either triangle; they are folded onto the lower one
  // and duplicates are summed.
  static SymMatrix from_triplets(std::size_t n, std::vector<Triplet> entries,
                                 Storage storage = Storage::Sparse) {
    for (auto& e : entries) {
      require(e.row < n && e.col < n, "from_triplets: index out of range");
      if (e.col > e.row) std::swap(e.row, e.col);
    }
    if (storage == Storage::Dense) {
      SymMatrix m = dense_zero(n);
      for (const auto& e : entries) m.dense_[e.row * (e.row + 1) / 2 + e.col] += e.value;
      return m;
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    SymMatrix m;
    m.n_ = n;
    m.storage_ = Storage::Sparse;
    m.row_ptr_.assign(n + 1, 0);
    std::size_t k = 0;
    while (k < entries.size()) {
      std::size_t r = entries[k].row, c = entries[k].col;
      double v = 0.0;
      while (k < entries.size() && entries[k].row == r && entries[k].col == c) v += entries[k++].value;
      if (v != 0.0) {
        m.col_.push_back(c);
        m.val_.push_back(v);
        ++m.row_ptr_[r + 1];
      }
    }
    for (std::size_t i = 0; i < n; ++i) m.row_ptr_[i + 1] += m.row_ptr_[i];
    return m;
  }

  std::size_t dim() const { return n_; }
  bool is_sparse() const { return storage_ == Storage::Sparse; }
  Storage storage() const { return storage_; }

  // Number of stored lower-triangle entries.
  std::size_t stored_nnz() const {
    if (storage_ == Storage::Dense) return dense_.size();
    return val_.size();
  }

  // Nonzeros of the materialized full matrix.
  std::size_t nnz_materialized() const {
    std::size_t count = 0;
    for_each_stored([&](std::size_t i, std::size_t j, double v) {
      if (v != 0.0) count += (i == j) ? 1 : 2;
    });
    return count;
  }

  double at(std::size_t i, std::size_t j) const {
    require(i < n_ && j < n_, "at: index out of range");
    if (j > i) std::swap(i, j);
    if (storage_ == Storage::Dense) return dense_[i * (i + 1) / 2 + j];
    auto begin = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
    auto end = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
    auto it = std::lower_bound(begin, end, j);
    if (it == end || *it != j) return 0.0;
    return val_[static_cast<std::size_t>(it - col_.begin())];
  }

  // Dense storage only.
  void set(std::size_t i, std::size_t j, double v) {
    require(storage_ == Storage::Dense, "set: dense storage required");
    require(i < n_ && j < n_, "set: index out of range");
    if (j > i) std::swap(i, j);
    dense_[i * (i + 1) / 2 + j] = v;
  }

  std::span<double> packed_lower() { return dense_; }
  std::span<const double> packed_lower() const { return dense_; }

  template <typename Fn>
  void for_each_stored(Fn&& fn) const {
    if (storage_ == Storage::Dense) {
      std::size_t k = 0;
      for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j <= i; ++j) fn(i, j, dense_[k++]);
    } else {
      for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) fn(i, col_[k], val_[k]);
    }
  }

  // Full row-major copy (row-major and column-major coincide by symmetry).
  std::vector<double> materialize() const {
    std::vector<double> full(n_ * n_, 0.0);
    for_each_stored([&](std::size_t i, std::size_t j, double v) {
      full[i * n_ + j] = v;
      full[j * n_ + i] = v;
    });
    return full;
  }

  double trace() const {
    double t = 0.0;
    if (storage_ == Storage::Dense) {
      for (std::size_t i = 0; i < n_; ++i) t += dense_[i * (i + 1) / 2 + i];
    } else {
      for_each_stored([&](std::size_t i, std::size_t j, double v) {
        if (i == j) t += v;
      });
    }
    return t;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for_each_stored([&](std::size_t i, std::size_t j, double v) {
      s += (i == j) ? v * v : 2.0 * v * v;
    });
    return std::sqrt(s);
  }

  // max absolute row sum of the full matrix; cheap spectral-scale estimate.
  double one_norm() const {
    std::vector<double> rowsum(n_, 0.0);
    for_each_stored([&](std::size_t i, std::size_t j, double v) {
      rowsum[i] += std::abs(v);
      if (i != j) rowsum[j] += std::abs(v);
    });
    double m = 0.0;
    for (double v : rowsum) m = std::max(m, v);
    return m;
  }

  std::size_t bandwidth() const {
    std::size_t b = 0;
    for_each_stored([&](std::size_t i, std::size_t j, double v) {
      if (v != 0.0) b = std::max(b, i - j);
    });
    return b;
  }

  // y = A x, touching each stored entry at most twice.
  void matvec(const double* x, double* y) const {
    for (std::size_t i = 0; i < n_; ++i) y[i] = 0.0;
    if (storage_ == Storage::Dense) {
      std::size_t k = 0;
      for (std::size_t i = 0; i < n_; ++i) {
        const double* row = dense_.data() + k;
        const double xi = x[i];
        double yi = 0.0;
        for (std::size_t j = 0; j < i; ++j) {
          yi += row[j] * x[j];
          y[j] += row[j] * xi;
        }
        y[i] += yi + row[i] * xi;
        k += i + 1;
      }
    } else {
      for (std::size_t i = 0; i < n_; ++i) {
        const double xi = x[i];
        double yi = 0.0;
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
          const std::size_t j = col_[k];
          const double v = val_[k];
          if (j == i) {
            yi += v * xi;
          } else {
            yi += v * x[j];
            y[j] += v * xi;
          }
        }
        y[i] += yi;
      }
    }
  }

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::size_t>& col_idx() const { return col_; }
  const std::vector<double>& values() const { return val_; }

 private:
  std::size_t n_ = 0;
  Storage storage_ = Storage::Dense;
  std::vector<double> dense_;  // packed lower, row i at offset i(i+1)/2
  std::vector<std::size_t> row_ptr_, col_;
  std::vector<double> val_;
};

inline std::vector<double> sym_matvec(const SymMatrix& a, std::span<const double> x) {
  require(x.size() == a.dim(), "sym_matvec: dimension mismatch");
  std::vector<double> y(a.dim());
  a.matvec(x.data(), y.data());
  return y;
}

// <A, B>_F over the full matrices, computed from the stored triangles.
inline double frobenius_inner(const SymMatrix& a, const SymMatrix& b) {
  require(a.dim() == b.dim(), "frobenius_inner: dimension mismatch");
  // Iterate the sparser operand and look the other one up; two sparse
  // operands are merged row by row.
  if (a.is_sparse() && b.is_sparse()) {
    const auto& arp = a.row_ptr();
    const auto& brp = b.row_ptr();
    const auto& ac = a.col_idx();
    const auto& bc = b.col_idx();
    const auto& av = a.values();
    const auto& bv = b.values();
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
      std::size_t ka = arp[i], kb = brp[i];
      const std::size_t ea = arp[i + 1], eb = brp[i + 1];
      while (ka < ea && kb < eb) {
        if (ac[ka] < bc[kb]) {
          ++ka;
        } else if (ac[ka] > bc[kb]) {
          ++kb;
        } else {
          const double w = (ac[ka] == i) ? 1.0 : 2.0;
          s += w * av[ka] * bv[kb];
          ++ka;
          ++kb;
        }
      }
    }
    return s;
  }
  const SymMatrix& it = a.is_sparse() ? a : b;
  const SymMatrix& other = a.is_sparse() ? b : a;
  if (it.is_sparse()) {
    double s = 0.0;
    it.for_each_stored([&](std::size_t i, std::size_t j, double v) {
      const double w = (i == j) ? 1.0 : 2.0;
      s += w * v * other.at(i, j);
    });
    return s;
  }
  // both dense: packed arrays align entrywise
  double s = 0.0;
  std::size_t k = 0;
  auto pa = a.packed_lower();
  auto pb = b.packed_lower();
  for (std::size_t i = 0; i < a.dim(); ++i) {
    for (std::size_t j = 0; j < i; ++j, ++k) s += 2.0 * pa[k] * pb[k];
    s += pa[k] * pb[k];
    ++k;
  }
  return s;
}

// C = alpha * A + C for packed-dense accumulation targets.
inline void add_scaled_packed(double alpha, const SymMatrix& a, std::span<double> packed) {
  a.for_each_stored([&](std::size_t i, std::size_t j, double v) {
    packed[i * (i + 1) / 2 + j] += alpha * v;
  });
}

// alpha_0 * M_0 + ... + alpha_{k-1} * M_{k-1}; sparse when every term is
// sparse (merged pattern), dense otherwise.
inline SymMatrix combine(std::span<const SymMatrix> mats, std::span<const double> coeffs) {
  require(mats.size() == coeffs.size(), "combine: dimension mismatch");
  require(!mats.empty(), "combine: empty combination");
  const std::size_t n = mats[0].dim();
  bool all_sparse = true;
  for (const auto& m : mats) {
    require(m.dim() == n, "combine: dimension mismatch");
    all_sparse = all_sparse && m.is_sparse();
  }
  if (!all_sparse) {
    SymMatrix r = SymMatrix::dense_zero(n);
    for (std::size_t k = 0; k < mats.size(); ++k)
      if (coeffs[k] != 0.0) add_scaled_packed(coeffs[k], mats[k], r.packed_lower());
    return r;
  }
  std::size_t total = 0;
  for (const auto& m : mats) total += m.stored_nnz();
  std::vector<Triplet> t;
  t.reserve(total);
  for (std::size_t k = 0; k < mats.size(); ++k) {
    if (coeffs[k] == 0.0) continue;
    const double c = coeffs[k];
    mats[k].for_each_stored([&](std::size_t i, std::size_t j, double v) {
      t.push_back({i, j, c * v});
    });
  }
  return SymMatrix::from_triplets(n, std::move(t), Storage::Sparse);
}

}  // namespace lsiep

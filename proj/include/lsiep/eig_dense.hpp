#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "lsiep/dense_matrix.hpp"
#include "lsiep/eig_types.hpp"
#include "lsiep/errors.hpp"
#include "lsiep/sym_matrix.hpp"

namespace lsiep {

namespace detail {

// Householder reduction to tridiagonal form.  w holds the full column-major
// matrix on entry; on exit d/e carry the tridiagonal and each unit reflector
// v_k sits in column k, rows k+1..n-1 (flagged in has_v).
inline void householder_tridiag(std::size_t n, std::vector<double>& w, std::vector<double>& d,
                                std::vector<double>& e, std::vector<char>& has_v) {
  d.assign(n, 0.0);
  e.assign(n > 1 ? n - 1 : 0, 0.0);
  has_v.assign(n, 0);
  std::vector<double> p, wv;
  for (std::size_t k = 0; k + 2 < n; ++k) {
    const std::size_t len = n - k - 1;
    double* x = w.data() + k * n + (k + 1);
    double sigma = 0.0;
    for (std::size_t i = 0; i < len; ++i) sigma += x[i] * x[i];
    sigma = std::sqrt(sigma);
    if (sigma == 0.0) {
      e[k] = 0.0;
      continue;
    }
    const double alpha = (x[0] >= 0.0) ? -sigma : sigma;
    x[0] -= alpha;
    double vnorm = 0.0;
    for (std::size_t i = 0; i < len; ++i) vnorm += x[i] * x[i];
    vnorm = std::sqrt(vnorm);
    for (std::size_t i = 0; i < len; ++i) x[i] /= vnorm;
    has_v[k] = 1;
    e[k] = alpha;

    // trailing block T <- (I-2vv^T) T (I-2vv^T) as T -= v u^T + u v^T,
    // u = 2(Tv - (v^T T v) v)
    p.assign(len, 0.0);
    for (std::size_t j = 0; j < len; ++j) {
      const double* col = w.data() + (k + 1 + j) * n + (k + 1);
      const double vj = x[j];
      for (std::size_t i = 0; i < len; ++i) p[i] += col[i] * vj;
    }
    double vtpv = 0.0;
    for (std::size_t i = 0; i < len; ++i) vtpv += x[i] * p[i];
    wv.assign(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) wv[i] = 2.0 * (p[i] - vtpv * x[i]);
    for (std::size_t j = 0; j < len; ++j) {
      double* col = w.data() + (k + 1 + j) * n + (k + 1);
      const double vj = x[j], wj = wv[j];
      for (std::size_t i = 0; i < len; ++i) col[i] -= x[i] * wj + wv[i] * vj;
    }
  }
  for (std::size_t i = 0; i < n; ++i) d[i] = w[i * n + i];
  if (n >= 2) e[n - 2] = w[(n - 2) * n + (n - 1)];
}

// Q = H_0 H_1 ... accumulated backwards; columns <= k are untouched by H_k,
// which keeps the pass O(n^3)/3.
inline DenseMatrix accumulate_q(std::size_t n, const std::vector<double>& w,
                                const std::vector<char>& has_v) {
  DenseMatrix q = DenseMatrix::identity(n);
  if (n < 3) return q;
  for (std::size_t k = n - 2; k-- > 0;) {
    if (!has_v[k]) continue;
    const std::size_t len = n - k - 1;
    const double* v = w.data() + k * n + (k + 1);
    for (std::size_t j = k + 1; j < n; ++j) {
      double* col = q.data().data() + j * n + (k + 1);
      double t = 0.0;
      for (std::size_t i = 0; i < len; ++i) t += v[i] * col[i];
      t *= 2.0;
      for (std::size_t i = 0; i < len; ++i) col[i] -= t * v[i];
    }
  }
  return q;
}

// Implicit-shift symmetric QL on the tridiagonal (d, e) with Wilkinson
// shifts, rotations accumulated into q's columns.  Returns the sweep count.
inline std::size_t tridiag_ql(std::vector<double>& d, std::vector<double>& e, DenseMatrix& q) {
  const std::size_t n = d.size();
  if (n < 2) return 0;
  std::vector<double> ee(n, 0.0);
  std::copy(e.begin(), e.end(), ee.begin());
  const double eps = std::numeric_limits<double>::epsilon();
  const std::size_t budget = 30 * n;
  std::size_t sweeps = 0;
  for (std::size_t l = 0; l < n; ++l) {
    for (;;) {
      std::size_t m = l;
      while (m + 1 < n) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(ee[m]) <= eps * dd) break;
        ++m;
      }
      if (m == l) break;
      if (++sweeps > budget) throw EigenFailure("dense eig: QL sweep budget exhausted");
      double g = (d[l + 1] - d[l]) / (2.0 * ee[l]);
      double r = std::hypot(g, 1.0);
      g = d[m] - d[l] + ee[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      bool underflow = false;
      for (std::size_t i = m; i-- > l;) {
        double f = s * ee[i];
        const double b = c * ee[i];
        r = std::hypot(f, g);
        ee[i + 1] = r;
        if (r == 0.0) {
          d[i + 1] -= p;
          ee[m] = 0.0;
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2.0 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
        double* qi = q.col(i).data();
        double* qi1 = q.col(i + 1).data();
        for (std::size_t t = 0; t < q.rows(); ++t) {
          f = qi1[t];
          qi1[t] = s * qi[t] + c * f;
          qi[t] = c * qi[t] - s * f;
        }
      }
      if (underflow) continue;
      d[l] -= p;
      ee[l] = g;
      ee[m] = 0.0;
    }
  }
  return sweeps;
}

inline void sort_pairs_ascending(std::vector<double>& d, DenseMatrix& q) {
  const std::size_t n = d.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  std::vector<std::size_t> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = i;
  std::vector<std::size_t> at(n);
  for (std::size_t i = 0; i < n; ++i) at[i] = i;
  // place column perm[i] at slot i by swaps
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t want = perm[i];
    const std::size_t cur = pos[want];
    if (cur == i) continue;
    auto ci = q.col(i);
    auto cc = q.col(cur);
    std::swap_ranges(ci.begin(), ci.end(), cc.begin());
    std::swap(d[i], d[cur]);
    std::swap(at[i], at[cur]);
    pos[at[i]] = i;
    pos[at[cur]] = cur;
  }
}

}  // namespace detail

// Full symmetric eigendecomposition of a column-major dense array.
inline EigenDecomposition eig_full_from_dense(std::size_t n, std::vector<double> full) {
  require(n >= 1, "eig: empty matrix");
  require(full.size() == n * n, "eig: bad array length");
  std::vector<double> d, e;
  std::vector<char> has_v;
  detail::householder_tridiag(n, full, d, e, has_v);
  DenseMatrix q = detail::accumulate_q(n, full, has_v);
  EigenDecomposition out;
  out.stats.iterations = detail::tridiag_ql(d, e, q);
  detail::sort_pairs_ascending(d, q);
  for (std::size_t j = 0; j < n; ++j) canonical_sign(q, j);
  out.values = std::move(d);
  out.vectors = std::move(q);
  return out;
}

inline EigenDecomposition eig_full_sym(const SymMatrix& a) {
  return eig_full_from_dense(a.dim(), a.materialize());
}

}  // namespace lsiep

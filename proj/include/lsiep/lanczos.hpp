#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "lsiep/cholesky.hpp"
#include "lsiep/dense_matrix.hpp"
#include "lsiep/eig_dense.hpp"
#include "lsiep/eig_types.hpp"
#include "lsiep/errors.hpp"
#include "lsiep/rng.hpp"
#include "lsiep/sym_matrix.hpp"
#include "lsiep/vec_ops.hpp"

namespace lsiep {

struct LanczosOptions {
  std::size_t max_restarts = 400;
  std::uint64_t seed = 0x6c616e63ULL;
};

namespace detail {

enum class RitzRank { SmallestValue, LargestAbs };

inline bool ritz_before(RitzRank rank, double a, double b) {
  return rank == RitzRank::SmallestValue ? a < b : std::abs(a) > std::abs(b);
}

struct RitzSet {
  std::vector<double> theta;      // ranked best-first
  DenseMatrix vectors;            // n x r, orthonormal
  std::vector<double> resid_est;  // operator-space estimates
  EigStats stats;
};

// Thick-restart Lanczos with full reorthogonalization (two CGS passes per
// step).  The Krylov space is kept orthogonal to the deflate columns, so the
// run sees the operator restricted to their complement.  r pairs ranked by
// `rank` are returned once every beta*|last component| estimate clears
// tol_op * max(1, |theta|_max).
template <typename Op>
RitzSet thick_restart_lanczos(std::size_t n, std::size_t r, Op&& op, RitzRank rank,
                              double tol_op, const LanczosOptions& opt,
                              const std::vector<std::span<const double>>& deflate) {
  require(r >= 1 && r < n, "lanczos: need 1 <= r < n");
  const std::size_t kdim = std::min(n - 1, std::max(2 * r, r + 15));
  require(kdim > r, "lanczos: subspace too small");

  std::vector<double> v(n * (kdim + 1), 0.0);
  auto col = [&](std::size_t j) { return std::span<double>(v.data() + j * n, n); };
  std::vector<double> alpha(kdim, 0.0), beta(kdim, 0.0);
  std::vector<double> theta_locked, border;
  std::vector<double> y(n), scratch(n);
  Rng rng(opt.seed);

  auto deflate_project = [&](std::span<double> w) {
    for (const auto& u : deflate) axpy(-dot(u, w), u, w);
  };
  auto fresh_direction = [&](std::span<double> w, std::size_t have_cols) {
    for (int attempt = 0; attempt < 16; ++attempt) {
      for (double& wi : w) wi = rng.symmetric();
      for (int pass = 0; pass < 2; ++pass) {
        deflate_project(w);
        for (std::size_t i = 0; i < have_cols; ++i) axpy(-dot(col(i), w), col(i), w);
      }
      const double nn = norm2(w);
      if (nn > 1e-8 * std::sqrt(static_cast<double>(n))) {
        scale(1.0 / nn, w);
        return true;
      }
    }
    return false;
  };

  if (!fresh_direction(col(0), 0))
    throw EigenFailure("lanczos: no direction outside the deflated subspace");

  EigStats stats;
  std::size_t k0 = 0;
  double coeff_scale = 1.0;
  std::vector<double> best_resid;

  for (;;) {
    for (std::size_t j = k0; j < kdim; ++j) {
      op(col(j).data(), y.data());
      ++stats.matvecs;
      ++stats.iterations;
      deflate_project(y);
      if (j == k0) {
        for (std::size_t i = 0; i < k0; ++i) axpy(-border[i], col(i), y);
      } else {
        axpy(-beta[j - 1], col(j - 1), y);
      }
      double a = dot(col(j), y);
      axpy(-a, col(j), y);
      // full reorth; the v_j coefficients fold back into the Rayleigh value
      for (int pass = 0; pass < 2; ++pass) {
        deflate_project(y);
        for (std::size_t i = 0; i <= j; ++i) {
          const double c = dot(col(i), y);
          if (i == j) a += c;
          axpy(-c, col(i), y);
        }
      }
      alpha[j] = a;
      double b = norm2(std::span<const double>(y));
      coeff_scale = std::max({coeff_scale, std::abs(a), b});
      auto vnext = col(j + 1);
      if (b <= 1e-13 * coeff_scale) {
        // invariant subspace found: continue in a fresh random direction
        beta[j] = 0.0;
        fresh_direction(vnext, j + 1);
      } else {
        beta[j] = b;
        for (std::size_t i = 0; i < n; ++i) vnext[i] = y[i] / b;
      }
    }

    // projected matrix: locked diagonal + border, then the new tridiagonal
    std::vector<double> t(kdim * kdim, 0.0);
    for (std::size_t i = 0; i < k0; ++i) {
      t[i * kdim + i] = theta_locked[i];
      t[k0 * kdim + i] = border[i];
      t[i * kdim + k0] = border[i];
    }
    for (std::size_t j = k0; j < kdim; ++j) t[j * kdim + j] = alpha[j];
    for (std::size_t j = k0; j + 1 < kdim; ++j) {
      t[j * kdim + (j + 1)] = beta[j];
      t[(j + 1) * kdim + j] = beta[j];
    }
    auto small = eig_full_from_dense(kdim, std::move(t));

    std::vector<std::size_t> order(kdim);
    std::iota(order.begin(), order.end(), 0);
    if (rank == RitzRank::LargestAbs)
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(small.values[a]) > std::abs(small.values[b]);
      });

    const double blast = beta[kdim - 1];
    double theta_scale = 0.0;
    for (double th : small.values) theta_scale = std::max(theta_scale, std::abs(th));
    const double bound = tol_op * std::max(1.0, theta_scale);

    best_resid.assign(r, 0.0);
    bool converged = true;
    for (std::size_t i = 0; i < r; ++i) {
      best_resid[i] = std::abs(blast * small.vectors(kdim - 1, order[i]));
      converged = converged && best_resid[i] <= bound;
    }

    if (converged) {
      RitzSet out;
      out.stats = stats;
      out.theta.resize(r);
      out.resid_est = best_resid;
      out.vectors = DenseMatrix(n, r);
      for (std::size_t i = 0; i < r; ++i) {
        out.theta[i] = small.values[order[i]];
        auto dst = out.vectors.col(i);
        std::fill(dst.begin(), dst.end(), 0.0);
        for (std::size_t tcol = 0; tcol < kdim; ++tcol)
          axpy(small.vectors(tcol, order[i]), col(tcol), dst);
      }
      return out;
    }

    if (stats.restarts >= opt.max_restarts)
      throw EigenFailure("lanczos: restart budget exhausted", best_resid);
    ++stats.restarts;

    // thick restart: lock the best Ritz pairs plus a small cushion
    const std::size_t keep = std::min(r + 2, (3 * kdim) / 4);
    std::vector<double> fresh(n * keep, 0.0);
    theta_locked.assign(keep, 0.0);
    border.assign(keep, 0.0);
    for (std::size_t i = 0; i < keep; ++i) {
      std::span<double> dst(fresh.data() + i * n, n);
      for (std::size_t tcol = 0; tcol < kdim; ++tcol)
        axpy(small.vectors(tcol, order[i]), col(tcol), dst);
      theta_locked[i] = small.values[order[i]];
      border[i] = blast * small.vectors(kdim - 1, order[i]);
    }
    auto cont = col(kdim);
    std::copy(cont.begin(), cont.end(), scratch.begin());
    std::copy(fresh.begin(), fresh.end(), v.begin());
    std::copy(scratch.begin(), scratch.end(), col(keep).begin());
    k0 = keep;
  }
}

// A single Krylov run cannot see an eigenvalue's multiplicity: the space
// holds one direction per eigenspace.  After the main run, probe the
// operator deflated by everything found so far for its best remaining
// eigenvalue; a probe that beats the current r-th best is a hidden copy and
// displaces it.  Probing stops at the first probe that does not.
template <typename Op>
RitzSet lanczos_multiplicity_pool(std::size_t n, std::size_t r, Op&& op, RitzRank rank,
                                  double tol_op, double value_slack,
                                  const LanczosOptions& opt) {
  auto main = thick_restart_lanczos(n, r, op, rank, tol_op, opt, {});
  std::vector<double> pool_vals = std::move(main.theta);
  std::vector<std::vector<double>> pool_vecs;
  for (std::size_t i = 0; i < r; ++i) {
    auto c = main.vectors.col(i);
    pool_vecs.emplace_back(c.begin(), c.end());
  }
  EigStats stats = main.stats;

  const std::size_t probe_kdim = std::min(n - 1, std::max<std::size_t>(2, 16));
  const std::size_t probe_cap = 4 * r + 16;
  LanczosOptions probe_opt = opt;
  std::vector<std::size_t> ranked(pool_vals.size());

  auto rank_pool = [&]() {
    ranked.resize(pool_vals.size());
    std::iota(ranked.begin(), ranked.end(), 0);
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
      return ritz_before(rank, pool_vals[a], pool_vals[b]);
    });
  };
  rank_pool();

  for (std::size_t probe_no = 0; probe_no < probe_cap; ++probe_no) {
    if (pool_vals.size() + probe_kdim + 4 >= n) break;
    std::vector<std::span<const double>> deflate;
    deflate.reserve(pool_vecs.size());
    for (const auto& u : pool_vecs) deflate.emplace_back(u.data(), u.size());
    probe_opt.seed = opt.seed + 0x9e37 * (probe_no + 1);
    auto probe = thick_restart_lanczos(n, 1, op, rank, tol_op, probe_opt, deflate);
    stats.iterations += probe.stats.iterations;
    stats.matvecs += probe.stats.matvecs;
    stats.restarts += probe.stats.restarts;

    const double cut = pool_vals[ranked[r - 1]];
    const double got = probe.theta[0];
    const bool displaces = rank == RitzRank::SmallestValue ? got < cut - value_slack
                                                           : std::abs(got) > std::abs(cut) + value_slack;
    if (!displaces) break;
    pool_vals.push_back(got);
    auto c = probe.vectors.col(0);
    pool_vecs.emplace_back(c.begin(), c.end());
    rank_pool();
  }

  RitzSet out;
  out.stats = stats;
  out.theta.resize(r);
  out.resid_est.assign(r, 0.0);
  out.vectors = DenseMatrix(n, r);
  for (std::size_t i = 0; i < r; ++i) {
    out.theta[i] = pool_vals[ranked[i]];
    auto dst = out.vectors.col(i);
    std::copy(pool_vecs[ranked[i]].begin(), pool_vecs[ranked[i]].end(), dst.begin());
  }
  return out;
}

inline std::size_t lanczos_request(std::size_t m, std::size_t n) {
  const std::size_t buffer = std::max<std::size_t>(2, (m + 3) / 4);
  return std::min(m + buffer, n);
}

}  // namespace detail

// The m algebraically smallest eigenpairs via thick-restart Lanczos; a few
// buffer pairs beyond m are solved and truncated so degenerate clusters are
// not split at the cut.
inline PartialEigenPairs eig_smallest_m(const SymMatrix& a, std::size_t m, double tol = 1e-8,
                                        const LanczosOptions& opt = {}) {
  const std::size_t n = a.dim();
  require(m >= 1 && m <= n, "eig_smallest_m: need 1 <= m <= n");
  const std::size_t r = detail::lanczos_request(m, n);
  const std::size_t kdim = std::min(n, std::max(2 * r, r + 15));
  if (n <= kdim + kdim / 2) {
    auto full = eig_full_sym(a);
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    auto out = select_pairs(full, idx);
    out.selector = PairSelector::SmallestM;
    return out;
  }

  const double mat_scale = std::max(1.0, a.one_norm());
  auto op = [&](const double* x, double* y) { a.matvec(x, y); };

  EigStats total;
  double tol_op = tol;
  for (int attempt = 0;; ++attempt) {
    auto ritz = detail::lanczos_multiplicity_pool(n, r, op, detail::RitzRank::SmallestValue,
                                                  tol_op, 4.0 * tol * mat_scale, opt);
    total.iterations += ritz.stats.iterations;
    total.matvecs += ritz.stats.matvecs;
    total.restarts += ritz.stats.restarts;

    // ranked ascending already; verify true residuals before trusting
    std::vector<double> resid(m);
    bool ok = true;
    std::vector<double> av(n);
    for (std::size_t i = 0; i < m; ++i) {
      a.matvec(ritz.vectors.col(i).data(), av.data());
      axpy(-ritz.theta[i], ritz.vectors.col(i), av);
      resid[i] = norm2(av);
      ok = ok && resid[i] <= tol * mat_scale;
    }
    if (ok) {
      PartialEigenPairs out;
      out.selector = PairSelector::SmallestM;
      out.stats = total;
      out.values.assign(ritz.theta.begin(), ritz.theta.begin() + static_cast<std::ptrdiff_t>(m));
      out.vectors = DenseMatrix(n, m);
      for (std::size_t i = 0; i < m; ++i) {
        auto src = ritz.vectors.col(i);
        auto dst = out.vectors.col(i);
        std::copy(src.begin(), src.end(), dst.begin());
        canonical_sign(out.vectors, i);
      }
      return out;
    }
    if (attempt >= 2) throw EigenFailure("eig_smallest_m: residual verification failed", resid);
    tol_op *= 1e-2;
  }
}

// The m eigenvalues nearest `shift`, by Lanczos on (A - shift I)^{-1} when
// the shifted matrix is definite (Cholesky of either sign).  Indefinite
// cases go dense only when dense_fallback is set.
inline PartialEigenPairs eig_closest_to(const SymMatrix& a, double shift, std::size_t m,
                                        double tol = 1e-8, bool dense_fallback = false,
                                        const LanczosOptions& opt = {}) {
  const std::size_t n = a.dim();
  require(m >= 1 && m <= n, "eig_closest_to: need 1 <= m <= n");

  auto dense_path = [&]() {
    auto full = eig_full_sym(a);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t p, std::size_t q) {
      return std::abs(full.values[p] - shift) < std::abs(full.values[q] - shift);
    });
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    auto out = select_pairs(full, idx);
    out.selector = PairSelector::ClosestToShift;
    return out;
  };

  const std::size_t r = detail::lanczos_request(m, n);
  const std::size_t kdim = std::min(n, std::max(2 * r, r + 15));
  if (n <= kdim + kdim / 2) return dense_path();

  // factor s*(A - shift I) for whichever sign is positive definite
  double sgn = 1.0;
  CholFactor chol;
  bool definite = true;
  {
    std::vector<SymMatrix> terms;
    terms.push_back(a);
    terms.push_back(SymMatrix::identity(n, a.storage()));
    std::vector<double> cpos = {1.0, -shift};
    try {
      chol = cholesky_spd(combine(terms, cpos));
    } catch (const NotPositiveDefinite&) {
      std::vector<double> cneg = {-1.0, shift};
      try {
        chol = cholesky_spd(combine(terms, cneg));
        sgn = -1.0;
      } catch (const NotPositiveDefinite&) {
        definite = false;
      }
    }
  }
  if (!definite) {
    if (dense_fallback) return dense_path();
    throw InvalidArgument(
        "eig_closest_to: A - shift*I is indefinite; enable the dense fallback");
  }

  const double mat_scale = std::max(1.0, a.one_norm());
  std::vector<double> work(n);
  auto op = [&](const double* x, double* y) {
    std::copy(x, x + n, y);
    chol.solve_in_place(std::span<double>(y, n));
    if (sgn < 0.0)
      for (std::size_t i = 0; i < n; ++i) y[i] = -y[i];
  };

  EigStats total;
  double tol_op = tol;
  for (int attempt = 0;; ++attempt) {
    auto ritz = detail::lanczos_multiplicity_pool(n, r, op, detail::RitzRank::LargestAbs, tol_op,
                                                  tol, opt);
    total.iterations += ritz.stats.iterations;
    total.matvecs += ritz.stats.matvecs;
    total.restarts += ritz.stats.restarts;

    // first m ranked by |theta| are the m nearest the shift
    std::vector<std::size_t> keep(m);
    std::iota(keep.begin(), keep.end(), 0);
    std::sort(keep.begin(), keep.end(), [&](std::size_t p, std::size_t q) {
      return shift + 1.0 / ritz.theta[p] < shift + 1.0 / ritz.theta[q];
    });

    std::vector<double> resid(m);
    bool ok = true;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t src = keep[i];
      const double lambda = shift + 1.0 / ritz.theta[src];
      a.matvec(ritz.vectors.col(src).data(), work.data());
      axpy(-lambda, ritz.vectors.col(src), work);
      resid[i] = norm2(work);
      ok = ok && resid[i] <= tol * mat_scale;
    }
    if (ok) {
      PartialEigenPairs out;
      out.selector = PairSelector::ClosestToShift;
      out.stats = total;
      out.values.resize(m);
      out.vectors = DenseMatrix(n, m);
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t src = keep[i];
        out.values[i] = shift + 1.0 / ritz.theta[src];
        auto s = ritz.vectors.col(src);
        auto dst = out.vectors.col(i);
        std::copy(s.begin(), s.end(), dst.begin());
        canonical_sign(out.vectors, i);
      }
      return out;
    }
    if (attempt >= 2) throw EigenFailure("eig_closest_to: residual verification failed", resid);
    tol_op *= 1e-2;
  }
}

}  // namespace lsiep

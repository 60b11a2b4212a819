#pragma once
// Problem library: banded Toeplitz families, spin-Hamiltonian families
// built from Stevens operators and Kronecker-lifted exchange terms, target
// simulation, and seeded random instances.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "lsiep/family.hpp"
#include "lsiep/lanczos.hpp"
#include "lsiep/rng.hpp"

namespace lsiep {

// A_k carries ones exactly on the two diagonals at offset k.
inline AffineFamily toeplitz_family(std::size_t n, std::size_t ell) {
  require(ell >= 1 && ell < n, "toeplitz_family: need 1 <= ell < n");
  std::vector<SymMatrix> basis;
  basis.reserve(ell);
  for (std::size_t k = 1; k <= ell; ++k) {
    std::vector<Triplet> t;
    t.reserve(n - k);
    for (std::size_t i = k; i < n; ++i) t.push_back({i, i - k, 1.0});
    basis.push_back(SymMatrix::from_triplets(n, std::move(t), Storage::Sparse));
  }
  return AffineFamily(SymMatrix::sparse_zero(n), std::move(basis));
}

namespace detail {

inline std::size_t spin_dim(double s) {
  require(s > 0.0, "spin: S must be positive");
  const double d = 2.0 * s + 1.0;
  const double r = std::round(d);
  require(std::abs(d - r) < 1e-9, "spin: S must be a half-integer");
  return static_cast<std::size_t>(r);
}

inline double ladder_coeff(double s, std::size_t j) {
  // (S+)_{j,j+1} for 1-based j
  return std::sqrt(double(j) * (2.0 * s + 1.0 - double(j)));
}

}  // namespace detail

// diag(S, S-1, ..., -S)
inline DenseMatrix spin_sz(double s) {
  const std::size_t d = detail::spin_dim(s);
  DenseMatrix m(d, d);
  for (std::size_t j = 0; j < d; ++j) m(j, j) = s - double(j);
  return m;
}

inline DenseMatrix spin_splus(double s) {
  const std::size_t d = detail::spin_dim(s);
  DenseMatrix m(d, d);
  for (std::size_t j = 0; j + 1 < d; ++j) m(j, j + 1) = detail::ladder_coeff(s, j + 1);
  return m;
}

inline DenseMatrix spin_sx(double s) {
  const std::size_t d = detail::spin_dim(s);
  DenseMatrix m(d, d);
  for (std::size_t j = 0; j + 1 < d; ++j) {
    const double c = 0.5 * detail::ladder_coeff(s, j + 1);
    m(j, j + 1) = c;
    m(j + 1, j) = c;
  }
  return m;
}

// real antisymmetric factor W with S_y = i W; the product of two lifted
// S_y operators on distinct centers is then -W_a W_b, which is real
inline DenseMatrix spin_antisym_y(double s) {
  const std::size_t d = detail::spin_dim(s);
  DenseMatrix m(d, d);
  for (std::size_t j = 0; j + 1 < d; ++j) {
    const double c = 0.5 * detail::ladder_coeff(s, j + 1);
    m(j, j + 1) = -c;
    m(j + 1, j) = c;
  }
  return m;
}

enum class StevensKind { O20, O22, O40, O44 };

struct StevensOperators {
  SymMatrix o20, o22, o40, o44;
};

inline StevensOperators stevens_operators(double s) {
  const std::size_t d = detail::spin_dim(s);
  const double x = s * (s + 1.0);
  auto sz = spin_sz(s);
  auto sp = spin_splus(s);

  std::vector<double> o20(d * d, 0.0), o40(d * d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    const double m = sz(j, j);
    const double m2 = m * m;
    o20[j * d + j] = 3.0 * m2 - x;
    o40[j * d + j] = 35.0 * m2 * m2 - (30.0 * x - 25.0) * m2 + (3.0 * x * x - 6.0 * x);
  }

  auto sym_half_sum = [&](const DenseMatrix& p) {
    // (p + p^T)/2 in row-major full form
    std::vector<double> full(d * d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) full[i * d + j] = 0.5 * (p(i, j) + p(j, i));
    return full;
  };
  auto sp2 = matmul(sp, sp);
  auto sp4 = matmul(sp2, sp2);

  StevensOperators out{
      SymMatrix::from_full(d, o20, Storage::Dense),
      SymMatrix::from_full(d, sym_half_sum(sp2), Storage::Dense),
      SymMatrix::from_full(d, o40, Storage::Dense),
      SymMatrix::from_full(d, sym_half_sum(sp4), Storage::Dense),
  };
  return out;
}

inline const SymMatrix& stevens_pick(const StevensOperators& ops, StevensKind k) {
  switch (k) {
    case StevensKind::O20: return ops.o20;
    case StevensKind::O22: return ops.o22;
    case StevensKind::O40: return ops.o40;
    case StevensKind::O44: return ops.o44;
  }
  throw InvalidArgument("stevens_pick: bad kind");
}

// One generator: a Stevens operator lifted to each listed center and summed.
struct LocalTerm {
  StevensKind op;
  std::vector<std::size_t> centers;
};

// One generator: sum of isotropic exchange interactions over the bonds.
struct ExchangeTerm {
  std::vector<std::pair<std::size_t, std::size_t>> bonds;
};

struct SpinSpec {
  std::vector<double> spins;          // quantum number S per center
  std::vector<LocalTerm> local_terms;
  std::vector<ExchangeTerm> couplings;
  bool append_identity = true;
};

namespace detail {

struct SmallEntry {
  std::size_t i, j;
  double v;
};

inline std::vector<SmallEntry> nonzeros(const DenseMatrix& m) {
  std::vector<SmallEntry> out;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (m(i, j) != 0.0) out.push_back({i, j, m(i, j)});
  return out;
}

struct ChainDims {
  std::vector<std::size_t> d;      // local dimension per center
  std::vector<std::size_t> post;   // product of dimensions after each center
  std::size_t total = 1;
};

inline ChainDims chain_dims(std::span<const double> spins) {
  require(!spins.empty(), "spin chain: no centers");
  ChainDims cd;
  cd.d.resize(spins.size());
  for (std::size_t c = 0; c < spins.size(); ++c) cd.d[c] = spin_dim(spins[c]);
  cd.post.assign(spins.size(), 1);
  for (std::size_t c = spins.size() - 1; c-- > 0;) cd.post[c] = cd.post[c + 1] * cd.d[c + 1];
  cd.total = cd.post[0] * cd.d[0];
  return cd;
}

// lift a single-center operator: identity on every other slot
inline void lift_one_site(std::vector<Triplet>& out, const ChainDims& cd, std::size_t c,
                          const SymMatrix& local) {
  const std::size_t dc = cd.d[c], post = cd.post[c];
  const std::size_t pre = cd.total / (dc * post);
  local.for_each_stored([&](std::size_t i, std::size_t j, double v) {
    for (std::size_t p = 0; p < pre; ++p)
      for (std::size_t q = 0; q < post; ++q) {
        const std::size_t base = p * dc * post + q;
        out.push_back({base + i * post, base + j * post, v});
      }
  });
}

// lift a two-site product Ma (x) Mb on centers a < b; emits the lower half
// of the symmetric result, scaled by `scale`
inline void lift_two_site(std::vector<Triplet>& out, const ChainDims& cd, std::size_t a,
                          const std::vector<SmallEntry>& ma, std::size_t b,
                          const std::vector<SmallEntry>& mb, double scale) {
  const std::size_t da = cd.d[a], db = cd.d[b];
  const std::size_t post_b = cd.post[b];
  const std::size_t mid = cd.post[a] / (db * post_b);
  const std::size_t pre = cd.total / (da * cd.post[a]);
  for (const auto& ea : ma)
    for (const auto& eb : mb) {
      const double v = scale * ea.v * eb.v;
      if (v == 0.0) continue;
      for (std::size_t p = 0; p < pre; ++p)
        for (std::size_t m = 0; m < mid; ++m)
          for (std::size_t q = 0; q < post_b; ++q) {
            const std::size_t row = ((p * da + ea.i) * mid + m) * db * post_b + eb.i * post_b + q;
            const std::size_t col = ((p * da + ea.j) * mid + m) * db * post_b + eb.j * post_b + q;
            if (row >= col) out.push_back({row, col, v});
          }
    }
}

}  // namespace detail

inline AffineFamily spin_chain_family(const SpinSpec& spec, bool allow_large = false) {
  auto cd = detail::chain_dims(spec.spins);
  require(cd.total <= 100000 || allow_large,
          "spin_chain_family: dimension exceeds 1e5; pass allow_large to proceed");
  const std::size_t nc = spec.spins.size();

  std::vector<StevensOperators> ops;
  ops.reserve(nc);
  std::vector<DenseMatrix> sx, wy, sz;
  for (std::size_t c = 0; c < nc; ++c) {
    ops.push_back(stevens_operators(spec.spins[c]));
    sx.push_back(spin_sx(spec.spins[c]));
    wy.push_back(spin_antisym_y(spec.spins[c]));
    sz.push_back(spin_sz(spec.spins[c]));
  }

  std::vector<SymMatrix> basis;
  for (const auto& term : spec.local_terms) {
    require(!term.centers.empty(), "spin_chain_family: local term without centers");
    std::vector<Triplet> t;
    for (std::size_t c : term.centers) {
      require(c < nc, "spin_chain_family: center index out of range");
      detail::lift_one_site(t, cd, c, stevens_pick(ops[c], term.op));
    }
    basis.push_back(SymMatrix::from_triplets(cd.total, std::move(t), Storage::Sparse));
  }

  for (const auto& term : spec.couplings) {
    require(!term.bonds.empty(), "spin_chain_family: exchange term without bonds");
    std::vector<Triplet> t;
    for (auto [a, b] : term.bonds) {
      require(a < nc && b < nc && a != b, "spin_chain_family: bad bond");
      if (a > b) std::swap(a, b);
      auto ex = detail::nonzeros(sx[a]);
      auto ex2 = detail::nonzeros(sx[b]);
      detail::lift_two_site(t, cd, a, ex, b, ex2, 1.0);
      auto wa = detail::nonzeros(wy[a]);
      auto wb = detail::nonzeros(wy[b]);
      detail::lift_two_site(t, cd, a, wa, b, wb, -1.0);
      auto za = detail::nonzeros(sz[a]);
      auto zb = detail::nonzeros(sz[b]);
      detail::lift_two_site(t, cd, a, za, b, zb, 1.0);
    }
    basis.push_back(SymMatrix::from_triplets(cd.total, std::move(t), Storage::Sparse));
  }

  if (spec.append_identity) basis.push_back(SymMatrix::identity(cd.total, Storage::Sparse));
  require(!basis.empty(), "spin_chain_family: empty basis");
  return AffineFamily(SymMatrix::sparse_zero(cd.total), std::move(basis));
}

enum class TargetSelector { SmallestM, All };

inline SpectralTarget simulate_targets(const AffineFamily& fam, std::span<const double> x_true,
                                       std::size_t m, TargetSelector sel = TargetSelector::SmallestM,
                                       double eig_tol = 1e-10) {
  require(m >= 1 && m <= fam.dim(), "simulate_targets: bad target count");
  auto ax = fam.evaluate(x_true);
  if (sel == TargetSelector::All) {
    require(m == fam.dim(), "simulate_targets: selector all needs m = n");
    auto full = eig_full_sym(ax);
    return SpectralTarget(std::move(full.values));
  }
  auto pairs = eig_smallest_m(ax, m, eig_tol);
  return SpectralTarget(std::move(pairs.values));
}

// Reproducible random instance; density is the expected fill of the lower
// triangle.  Dependent draws are rejected and redrawn.
inline AffineFamily random_family(std::size_t n, std::size_t ell, double density,
                                  unsigned long long seed) {
  require(n >= 1, "random_family: empty dimension");
  require(ell >= 1, "random_family: empty basis");
  require(density > 0.0 && density <= 1.0, "random_family: density outside (0,1]");
  const Storage storage = density > 0.5 ? Storage::Dense : Storage::Sparse;
  for (unsigned long long attempt = 0; attempt < 16; ++attempt) {
    Rng rng(seed + 0x9e3779b97f4a7c15ULL * attempt);
    auto draw = [&]() {
      std::vector<Triplet> t;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j)
          if (rng.uniform() < density) t.push_back({i, j, rng.symmetric()});
      return SymMatrix::from_triplets(n, std::move(t), storage);
    };
    SymMatrix a0 = draw();
    std::vector<SymMatrix> basis;
    for (std::size_t k = 0; k < ell; ++k) basis.push_back(draw());
    try {
      return AffineFamily(std::move(a0), std::move(basis));
    } catch (const NotPositiveDefinite&) {
      continue;
    }
  }
  throw NotPositiveDefinite("random_family: could not draw an independent basis");
}

// Single S=10 center; basis order O20, O40, O22, O44, identity.
inline SpinSpec mn12_spec() {
  SpinSpec s;
  s.spins = {10.0};
  s.local_terms = {{StevensKind::O20, {0}},
                   {StevensKind::O40, {0}},
                   {StevensKind::O22, {0}},
                   {StevensKind::O44, {0}}};
  return s;
}

inline AffineFamily mn12_family() { return spin_chain_family(mn12_spec()); }

// fitted anisotropy parameters in Hz; the trailing entry is the ground
// level used when simulating targets (not a published value)
inline std::vector<double> mn12_x_star1() { return {-4594.0, -0.67, -0.7737, 164.41, 0.0}; }
inline std::vector<double> mn12_x_star2_first4() { return {-4594.0, -0.67, 1.2256, 130.24}; }
inline std::vector<double> mn12_x0() { return {-1000.0, 1.0, 1.0, 1.0, 0.0}; }

// Six S=3/2 centers in a chain; shared axial and rhombic anisotropy plus a
// single nearest-neighbour exchange generator and the identity.
inline SpinSpec cr6_spec() {
  SpinSpec s;
  s.spins.assign(6, 1.5);
  s.local_terms = {{StevensKind::O20, {0, 1, 2, 3, 4, 5}}, {StevensKind::O22, {0, 1, 2, 3, 4, 5}}};
  s.couplings = {{{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}}}};
  return s;
}

inline AffineFamily cr6_family() { return spin_chain_family(cr6_spec()); }

inline std::vector<double> cr6_x_star() { return {1692.5, -3304.4, 353000.0, 5211700.0}; }

// Two S=2 centers at slots 1 and 4 inside four S=5/2 centers; one shared
// axial anisotropy generator for the S=2 ions, four single-bond exchange
// generators, identity.  Composition and bond list are recorded defaults;
// only the total dimension is pinned by the measurements.
inline SpinSpec mn6_spec() {
  SpinSpec s;
  s.spins = {2.5, 2.0, 2.5, 2.5, 2.0, 2.5};
  s.local_terms = {{StevensKind::O20, {1, 4}}};
  s.couplings = {{{{0, 1}}}, {{{1, 2}}}, {{{3, 4}}}, {{{4, 5}}}};
  return s;
}

inline AffineFamily mn6_family() { return spin_chain_family(mn6_spec()); }

// measured spectrum in Hz, including its degenerate clusters
inline std::vector<double> mn6_measured_targets() {
  return {0.0,     0.342e5, 1.428e5, 1.428e5, 2.621e5, 2.621e5, 2.621e5, 3.417e5,
          3.417e5, 5.6e5,   5.6e5,   5.6e5,   5.6e5,   5.6e5,   6.097e5, 6.097e5};
}

inline std::vector<double> mn6_x0() { return {100.0, 100.0, 100.0, 100.0, 100.0, 2e7}; }

}  // namespace lsiep

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "lsiep/eig_dense.hpp"
#include "lsiep/lanczos.hpp"
#include "lsiep/rng.hpp"
#include "lsiep/sym_matrix.hpp"
#include "lsiep/vec_ops.hpp"

using namespace lsiep;

namespace {

SymMatrix random_sym(std::size_t n, Rng& rng, Storage storage, double density = 1.0) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      if (i == j || rng.uniform() < density) t.push_back({i, j, rng.symmetric()});
  return SymMatrix::from_triplets(n, std::move(t), storage);
}

// banded all-ones matrix: Toeplitz family evaluated at x = (1,...,1)
SymMatrix toeplitz_ones(std::size_t n, std::size_t ell) {
  std::vector<Triplet> t;
  for (std::size_t k = 1; k <= ell; ++k)
    for (std::size_t i = 0; i + k < n; ++i) t.push_back({i + k, i, 1.0});
  return SymMatrix::from_triplets(n, std::move(t), Storage::Sparse);
}

void check_full_invariants(const SymMatrix& a, const EigenDecomposition& d) {
  const std::size_t n = a.dim();
  const double scale = std::max(1.0, a.frobenius_norm());
  for (std::size_t i = 0; i < n; ++i) {
    auto q = d.vectors.col(i);
    auto aq = sym_matvec(a, q);
    axpy(-d.values[i], q, aq);
    REQUIRE(norm2(aq) <= 1e-10 * scale);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double g = dot(d.vectors.col(i), d.vectors.col(j));
      REQUIRE(std::abs(g - (i == j ? 1.0 : 0.0)) <= 1e-10 * static_cast<double>(n));
    }
  REQUIRE(std::is_sorted(d.values.begin(), d.values.end()));
}

void check_partial_invariants(const SymMatrix& a, const PartialEigenPairs& p) {
  const double scale = std::max(1.0, a.frobenius_norm());
  for (std::size_t i = 0; i < p.count(); ++i) {
    auto q = p.vectors.col(i);
    auto aq = sym_matvec(a, q);
    axpy(-p.values[i], q, aq);
    REQUIRE(norm2(aq) <= 1e-7 * scale);
    for (std::size_t j = i; j < p.count(); ++j) {
      const double g = dot(p.vectors.col(i), p.vectors.col(j));
      REQUIRE(std::abs(g - (i == j ? 1.0 : 0.0)) <= 1e-9);
    }
  }
  REQUIRE(std::is_sorted(p.values.begin(), p.values.end()));
}

}  // namespace

TEST_CASE("dense eig diagonal matrix") {
  std::vector<double> d = {3.0, 1.0, 2.0};
  auto a = SymMatrix::diagonal(d);
  auto dec = eig_full_sym(a);
  REQUIRE(dec.values[0] == Catch::Approx(1.0).margin(1e-14));
  REQUIRE(dec.values[1] == Catch::Approx(2.0).margin(1e-14));
  REQUIRE(dec.values[2] == Catch::Approx(3.0).margin(1e-14));
  // eigenvectors are signed coordinate axes
  REQUIRE(dec.vectors(1, 0) == Catch::Approx(1.0).margin(1e-14));
  REQUIRE(dec.vectors(2, 1) == Catch::Approx(1.0).margin(1e-14));
  REQUIRE(dec.vectors(0, 2) == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("dense eig 2x2 exchange matrix") {
  std::vector<Triplet> t = {{1, 0, 1.0}};
  auto a = SymMatrix::from_triplets(2, t);
  auto dec = eig_full_sym(a);
  REQUIRE(dec.values[0] == Catch::Approx(-1.0).margin(1e-15));
  REQUIRE(dec.values[1] == Catch::Approx(1.0).margin(1e-15));
  check_full_invariants(a, dec);
}

TEST_CASE("dense eig random 30x30 invariants") {
  Rng rng(21);
  for (int rep = 0; rep < 4; ++rep) {
    auto a = random_sym(30, rng, Storage::Dense);
    auto dec = eig_full_sym(a);
    check_full_invariants(a, dec);
    const double tr = a.trace();
    const double sum = std::accumulate(dec.values.begin(), dec.values.end(), 0.0);
    REQUIRE(std::abs(sum - tr) <= 1e-10 * std::max(1.0, std::abs(tr)));
  }
}

TEST_CASE("dense eig deterministic including signs") {
  Rng rng(22);
  auto a = random_sym(15, rng, Storage::Dense);
  auto d1 = eig_full_sym(a);
  auto d2 = eig_full_sym(a);
  REQUIRE(d1.values == d2.values);
  REQUIRE(d1.vectors.data() == d2.vectors.data());
  // sign convention: leading significant component positive
  for (std::size_t j = 0; j < 15; ++j) {
    auto c = d1.vectors.col(j);
    double peak = 0.0;
    for (double v : c) peak = std::max(peak, std::abs(v));
    for (double v : c) {
      if (std::abs(v) > 1e-6 * peak) {
        REQUIRE(v > 0.0);
        break;
      }
    }
  }
}

TEST_CASE("dense eig handles repeated eigenvalues") {
  // 0.2*ones + I: spectrum {1 (x4), 2}
  std::vector<double> full(25, 0.2);
  for (std::size_t i = 0; i < 5; ++i) full[i * 5 + i] = 1.2;
  auto a = SymMatrix::from_full(5, full, Storage::Dense);
  auto dec = eig_full_sym(a);
  for (int i = 0; i < 4; ++i) REQUIRE(dec.values[i] == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(dec.values[4] == Catch::Approx(2.0).margin(1e-12));
  check_full_invariants(a, dec);
}

TEST_CASE("lanczos smallest diagonal case") {
  std::vector<double> d(10);
  std::iota(d.begin(), d.end(), 1.0);
  auto a = SymMatrix::diagonal(d);
  auto p = eig_smallest_m(a, 3, 1e-10);
  REQUIRE(p.count() == 3);
  REQUIRE(p.values[0] == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(p.values[1] == Catch::Approx(2.0).margin(1e-9));
  REQUIRE(p.values[2] == Catch::Approx(3.0).margin(1e-9));
  REQUIRE(p.selector == PairSelector::SmallestM);
}

TEST_CASE("lanczos matches full decomposition on banded Toeplitz") {
  auto a = toeplitz_ones(100, 40);
  auto full = eig_full_sym(a);
  auto p = eig_smallest_m(a, 20, 1e-8);
  REQUIRE(p.count() == 20);
  for (std::size_t i = 0; i < 20; ++i)
    REQUIRE(std::abs(p.values[i] - full.values[i]) <= 1e-8 * std::max(1.0, std::abs(full.values[i])));
  check_partial_invariants(a, p);
  REQUIRE(p.stats.matvecs > 0);
}

TEST_CASE("lanczos m equals n falls back to dense") {
  Rng rng(23);
  auto a = random_sym(12, rng, Storage::Dense);
  auto full = eig_full_sym(a);
  auto p = eig_smallest_m(a, 12, 1e-8);
  for (std::size_t i = 0; i < 12; ++i)
    REQUIRE(std::abs(p.values[i] - full.values[i]) <= 1e-9);
}

TEST_CASE("lanczos random instances match full decomposition") {
  Rng rng(24);
  for (std::size_t n : {60u, 150u, 300u}) {
    auto a = random_sym(n, rng, Storage::Sparse, 12.0 / static_cast<double>(n));
    auto full = eig_full_sym(a);
    const std::size_t m = 1 + rng.below(8);
    const double tol = 1e-9;
    auto p = eig_smallest_m(a, m, tol);
    for (std::size_t i = 0; i < m; ++i)
      REQUIRE(std::abs(p.values[i] - full.values[i]) <=
              10.0 * tol * std::max(1.0, std::abs(full.values[i])));
    check_partial_invariants(a, p);
  }
}

TEST_CASE("lanczos repeated extreme eigenvalues") {
  // diag with a 5-fold smallest cluster, like degenerate spin spectra
  std::vector<double> d(80);
  for (std::size_t i = 0; i < 80; ++i) d[i] = (i < 5) ? -3.0 : -2.0 + 0.1 * static_cast<double>(i);
  auto a = SymMatrix::diagonal(d);
  auto p = eig_smallest_m(a, 5, 1e-9);
  for (int i = 0; i < 5; ++i) REQUIRE(p.values[i] == Catch::Approx(-3.0).margin(1e-8));
  check_partial_invariants(a, p);
}

TEST_CASE("closest-to diagonal case") {
  std::vector<double> d(10);
  std::iota(d.begin(), d.end(), 1.0);
  // n too small for a Krylov run: exercises the dense route inside
  auto a = SymMatrix::diagonal(d);
  auto p = eig_closest_to(a, 4.2, 2, 1e-10, true);
  REQUIRE(p.values[0] == Catch::Approx(4.0).margin(1e-9));
  REQUIRE(p.values[1] == Catch::Approx(5.0).margin(1e-9));
  REQUIRE(p.selector == PairSelector::ClosestToShift);
}

TEST_CASE("closest-to below spectrum equals smallest") {
  Rng rng(25);
  auto a = random_sym(120, rng, Storage::Sparse, 0.1);
  auto smallest = eig_smallest_m(a, 3, 1e-9);
  const double shift = smallest.values[0] - 2.0 * std::max(1.0, a.one_norm());
  auto p = eig_closest_to(a, shift, 3, 1e-9);
  for (int i = 0; i < 3; ++i)
    REQUIRE(std::abs(p.values[i] - smallest.values[i]) <= 1e-7 * std::max(1.0, std::abs(p.values[i])));
}

TEST_CASE("closest-to interior shift matches full selection") {
  Rng rng(26);
  auto a = random_sym(200, rng, Storage::Sparse, 0.05);
  auto full = eig_full_sym(a);
  const double shift = full.values[100] + 1e-3;
  auto p = eig_closest_to(a, shift, 4, 1e-9, true);
  std::vector<std::size_t> idx(200);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    return std::abs(full.values[i] - shift) < std::abs(full.values[j] - shift);
  });
  std::vector<double> want;
  for (int i = 0; i < 4; ++i) want.push_back(full.values[idx[i]]);
  std::sort(want.begin(), want.end());
  for (int i = 0; i < 4; ++i)
    REQUIRE(std::abs(p.values[i] - want[i]) <= 1e-7 * std::max(1.0, std::abs(want[i])));
  check_partial_invariants(a, p);
}

TEST_CASE("closest-to indefinite shift needs the fallback flag") {
  Rng rng(27);
  auto a = random_sym(80, rng, Storage::Sparse, 0.2);
  auto full = eig_full_sym(a);
  const double shift = 0.5 * (full.values[39] + full.values[40]);
  REQUIRE_THROWS_AS(eig_closest_to(a, shift, 2, 1e-9, false), InvalidArgument);
  auto p = eig_closest_to(a, shift, 2, 1e-9, true);
  REQUIRE(p.count() == 2);
  check_partial_invariants(a, p);
}

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lsiep/assign.hpp"
#include "lsiep/eig_dense.hpp"
#include "lsiep/family.hpp"
#include "lsiep/rng.hpp"

using namespace lsiep;

namespace {

SymMatrix random_sym(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      t.push_back({i, j, scale * rng.symmetric()});
  return SymMatrix::from_triplets(n, t, Storage::Dense);
}

std::vector<SymMatrix> toeplitz_basis(std::size_t n, std::size_t ell) {
  std::vector<SymMatrix> basis;
  for (std::size_t k = 1; k <= ell; ++k) {
    std::vector<Triplet> t;
    for (std::size_t i = k; i < n; ++i) t.push_back({i, i - k, 1.0});
    basis.push_back(SymMatrix::from_triplets(n, t, Storage::Sparse));
  }
  return basis;
}

// sorted eigenvalues of A(x) at the given index set
std::vector<double> assigned_values(const AffineFamily& fam, std::span<const double> x,
                                    std::span<const std::size_t> idx) {
  auto full = eig_full_sym(fam.evaluate(x));
  std::vector<double> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = full.values[idx[i]];
  return out;
}

double objective_at(const AffineFamily& fam, std::span<const double> x,
                    std::span<const std::size_t> idx, std::span<const double> targets) {
  auto vals = assigned_values(fam, x, idx);
  double f = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double d = vals[i] - targets[i];
    f += 0.5 * d * d;
  }
  return f;
}

std::vector<double> gradient_at(const AffineFamily& fam, std::span<const double> x,
                                std::span<const std::size_t> idx, const SpectralTarget& tgt) {
  auto full = eig_full_sym(fam.evaluate(x));
  auto pairs = select_pairs(full, idx);
  auto eval = evaluate_objective(fam, pairs, tgt);
  return eval.gradient;
}

}  // namespace

TEST_CASE("spectral target validates its input") {
  REQUIRE_NOTHROW(SpectralTarget(std::vector<double>{-1, 0, 2}));
  REQUIRE_THROWS_AS(SpectralTarget(std::vector<double>{}), InvalidArgument);
  REQUIRE_THROWS_AS(SpectralTarget(std::vector<double>{1, 0}), InvalidArgument);
  REQUIRE_THROWS_AS(SpectralTarget(std::vector<double>{0, std::nan("")}), InvalidArgument);
  SpectralTarget t(std::vector<double>{3, 4});
  REQUIRE(t.count() == 2);
  REQUIRE(t.norm() == Catch::Approx(5.0));
}

TEST_CASE("evaluate at zero returns the anchor") {
  Rng rng(41);
  auto a0 = random_sym(6, rng);
  std::vector<SymMatrix> basis = {random_sym(6, rng), random_sym(6, rng)};
  AffineFamily fam(a0, basis);
  std::vector<double> x(2, 0.0);
  auto ax = fam.evaluate(x);
  auto want = a0.materialize();
  auto got = ax.materialize();
  for (std::size_t k = 0; k < want.size(); ++k) REQUIRE(got[k] == want[k]);
}

TEST_CASE("evaluate with identity basis scales the identity") {
  const std::size_t n = 5;
  AffineFamily fam(SymMatrix::sparse_zero(n), {SymMatrix::identity(n)});
  std::vector<double> x = {3.0};
  auto ax = fam.evaluate(x);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      REQUIRE(ax.at(i, j) == (i == j ? 3.0 : 0.0));
  std::vector<double> bad = {1.0, 2.0};
  REQUIRE_THROWS_AS(fam.evaluate(bad), InvalidArgument);
}

TEST_CASE("evaluate builds banded toeplitz structure") {
  const std::size_t n = 10, ell = 3;
  AffineFamily fam(SymMatrix::sparse_zero(n), toeplitz_basis(n, ell));
  std::vector<double> x = {1.0, 1.0, 1.0};
  auto ax = fam.evaluate(x);
  REQUIRE(ax.is_sparse());
  REQUIRE(ax.bandwidth() == ell);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double want = (i != j && i - j <= ell) ? 1.0 : 0.0;
      REQUIRE(ax.at(i, j) == want);
    }
}

TEST_CASE("gram matrix of disjoint toeplitz supports is diagonal") {
  const std::size_t n = 50, ell = 5;
  AffineFamily fam(SymMatrix::sparse_zero(n), toeplitz_basis(n, ell));
  const auto& b = fam.gram();
  for (std::size_t i = 0; i < ell; ++i)
    for (std::size_t j = 0; j < ell; ++j) {
      const double want = (i == j) ? 2.0 * double(n - (i + 1)) : 0.0;
      REQUIRE(b(i, j) == Catch::Approx(want).margin(1e-14));
    }
}

TEST_CASE("gram matrix matches the pairwise inner product table") {
  Rng rng(42);
  std::vector<SymMatrix> basis;
  for (int k = 0; k < 4; ++k) basis.push_back(random_sym(7, rng));
  AffineFamily fam(SymMatrix::dense_zero(7), basis);
  const auto& b = fam.gram();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      const double want = frobenius_inner(basis[i], basis[j]);
      REQUIRE(b(i, j) == Catch::Approx(want).epsilon(1e-12));
    }
  AffineFamily single(SymMatrix::sparse_zero(9), {SymMatrix::identity(9)});
  REQUIRE(single.gram()(0, 0) == Catch::Approx(9.0));
}

TEST_CASE("dependent basis is rejected") {
  Rng rng(43);
  auto a = random_sym(5, rng);
  std::vector<Triplet> doubled;
  a.for_each_stored([&](std::size_t i, std::size_t j, double v) { doubled.push_back({i, j, 2 * v}); });
  std::vector<SymMatrix> basis = {a, SymMatrix::from_triplets(5, doubled, Storage::Dense)};
  REQUIRE_THROWS_AS(AffineFamily(SymMatrix::dense_zero(5), basis), NotPositiveDefinite);
}

TEST_CASE("b metric agrees with frobenius products of combinations") {
  Rng rng(44);
  std::vector<SymMatrix> basis;
  for (int k = 0; k < 4; ++k) basis.push_back(random_sym(8, rng));
  AffineFamily fam(SymMatrix::dense_zero(8), basis);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> u(4), v(4);
    for (auto& e : u) e = rng.symmetric();
    for (auto& e : v) e = rng.symmetric();
    auto au = combine(basis, u);
    auto av = combine(basis, v);
    const double want = frobenius_inner(au, av);
    REQUIRE(fam.b_inner(u, v) == Catch::Approx(want).epsilon(1e-12));
    REQUIRE(fam.b_norm(u) == Catch::Approx(std::sqrt(frobenius_inner(au, au))).epsilon(1e-12));
  }
}

TEST_CASE("residual and objective arithmetic") {
  const std::size_t n = 4;
  AffineFamily fam(SymMatrix::sparse_zero(n), {SymMatrix::identity(n)});
  std::vector<double> x = {2.0};
  auto full = eig_full_sym(fam.evaluate(x));
  SpectralTarget hit(std::vector<double>{2.0, 2.0});
  std::vector<std::size_t> idx = {0, 1};
  auto pairs = select_pairs(full, idx);
  auto eval = evaluate_objective(fam, pairs, hit);
  REQUIRE(eval.f == 0.0);
  for (double ri : eval.residual) REQUIRE(ri == 0.0);
  for (double gi : eval.gradient) REQUIRE(gi == 0.0);

  SpectralTarget off(std::vector<double>{1.0, 1.5});
  auto eval2 = evaluate_objective(fam, pairs, off);
  REQUIRE(eval2.residual[0] == Catch::Approx(1.0));
  REQUIRE(eval2.residual[1] == Catch::Approx(0.5));
  REQUIRE(eval2.f == Catch::Approx(0.5 * (1.0 + 0.25)));
  REQUIRE(eval2.f >= 0.0);
  SpectralTarget wrong_count(std::vector<double>{1.0, 2.0, 3.0});
  REQUIRE_THROWS_AS(evaluate_objective(fam, pairs, wrong_count), InvalidArgument);
}

TEST_CASE("jacobian of identity basis is a column of ones") {
  const std::size_t n = 6;
  AffineFamily fam(SymMatrix::sparse_zero(n), {SymMatrix::identity(n)});
  std::vector<double> x = {0.7};
  auto full = eig_full_sym(fam.evaluate(x));
  std::vector<std::size_t> idx = {0, 2, 5};
  auto pairs = select_pairs(full, idx);
  auto j = jacobian(pairs, fam.basis());
  REQUIRE(j.rows() == 3);
  REQUIRE(j.cols() == 1);
  for (std::size_t i = 0; i < 3; ++i) REQUIRE(j(i, 0) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("jacobian of a diagonal family is an assignment indicator") {
  std::vector<SymMatrix> basis;
  for (std::size_t j = 0; j < 3; ++j)
    basis.push_back(SymMatrix::from_triplets(3, {{j, j, 1.0}}, Storage::Sparse));
  auto a0 = SymMatrix::diagonal(std::vector<double>{3.0, 1.0, 2.0});
  AffineFamily fam(a0, basis);
  std::vector<double> x(3, 0.0);
  auto full = eig_full_sym(fam.evaluate(x));
  std::vector<double> targets = {0.9, 2.05};
  auto asg = assign_monotone_dp(full.values, targets);
  REQUIRE(asg.indices == std::vector<std::size_t>{0, 1});
  auto pairs = select_pairs(full, asg.indices);
  auto j = jacobian(pairs, fam.basis());
  // sorted spectrum (1,2,3) lives on coordinates (1,2,0)
  std::vector<std::size_t> coord = {1, 2};
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      REQUIRE(j(i, c) == Catch::Approx(c == coord[i] ? 1.0 : 0.0).margin(1e-12));
}

TEST_CASE("jacobian matches finite differences of assigned eigenvalues") {
  Rng rng(45);
  const std::size_t n = 15, ell = 3, m = 6;
  auto a0 = random_sym(n, rng);
  std::vector<SymMatrix> basis;
  for (std::size_t k = 0; k < ell; ++k) basis.push_back(random_sym(n, rng, 0.5));
  AffineFamily fam(a0, basis);
  std::vector<double> x = {0.3, -0.2, 0.1};
  auto full = eig_full_sym(fam.evaluate(x));
  std::vector<double> targets(m);
  for (std::size_t i = 0; i < m; ++i) targets[i] = full.values[2 * i] + 0.05 * rng.symmetric();
  std::sort(targets.begin(), targets.end());
  auto asg = assign_monotone_dp(full.values, targets);
  auto pairs = select_pairs(full, asg.indices);
  auto j = jacobian(pairs, fam.basis());

  const double h = 1e-5;
  for (std::size_t cj = 0; cj < ell; ++cj) {
    auto xp = x, xm = x;
    xp[cj] += h;
    xm[cj] -= h;
    auto vp = assigned_values(fam, xp, asg.indices);
    auto vm = assigned_values(fam, xm, asg.indices);
    for (std::size_t i = 0; i < m; ++i) {
      const double fd = (vp[i] - vm[i]) / (2 * h);
      REQUIRE(j(i, cj) == Catch::Approx(fd).margin(1e-5));
    }
  }
}

TEST_CASE("gradient matches finite differences of the objective") {
  Rng rng(46);
  const std::size_t n = 12, ell = 3, m = 5;
  auto a0 = random_sym(n, rng);
  std::vector<SymMatrix> basis;
  for (std::size_t k = 0; k < ell; ++k) basis.push_back(random_sym(n, rng, 0.5));
  AffineFamily fam(a0, basis);
  std::vector<double> x = {-0.1, 0.4, 0.2};
  auto full = eig_full_sym(fam.evaluate(x));
  std::vector<double> targets(m);
  for (std::size_t i = 0; i < m; ++i) targets[i] = full.values[i] - 0.3;
  std::sort(targets.begin(), targets.end());
  auto asg = assign_monotone_dp(full.values, targets);
  auto pairs = select_pairs(full, asg.indices);
  SpectralTarget tgt(targets);
  auto eval = evaluate_objective(fam, pairs, tgt);

  const double h = 1e-5;
  for (std::size_t cj = 0; cj < ell; ++cj) {
    auto xp = x, xm = x;
    xp[cj] += h;
    xm[cj] -= h;
    const double fd =
        (objective_at(fam, xp, asg.indices, targets) - objective_at(fam, xm, asg.indices, targets)) /
        (2 * h);
    REQUIRE(eval.gradient[cj] == Catch::Approx(fd).margin(1e-5 * std::max(1.0, std::abs(fd))));
  }

  // J^T r by hand on a 2x1 case
  DenseMatrix jj(2, 1);
  jj(0, 0) = 1.0;
  jj(1, 0) = 1.0;
  std::vector<double> r = {1.0, 2.0};
  auto g = gradient(jj, r);
  REQUIRE(g.size() == 1);
  REQUIRE(g[0] == Catch::Approx(3.0));
}

TEST_CASE("hessian reduces to the gauss-newton term at zero residual") {
  Rng rng(47);
  const std::size_t n = 10, ell = 2, m = 4;
  auto a0 = random_sym(n, rng);
  std::vector<SymMatrix> basis;
  for (std::size_t k = 0; k < ell; ++k) basis.push_back(random_sym(n, rng, 0.5));
  AffineFamily fam(a0, basis);
  std::vector<double> x = {0.2, -0.3};
  auto full = eig_full_sym(fam.evaluate(x));
  std::vector<std::size_t> idx = {0, 2, 4, 6};
  auto pairs = select_pairs(full, idx);
  std::vector<double> tvals(m);
  for (std::size_t i = 0; i < m; ++i) tvals[i] = pairs.values[i];
  SpectralTarget tgt(tvals);
  auto j = jacobian(pairs, fam.basis());
  std::size_t skipped = 0;
  auto h = hessian(fam, pairs, tgt, 1e-8, &skipped);
  REQUIRE(skipped == 0);
  for (std::size_t a = 0; a < ell; ++a)
    for (std::size_t b = 0; b < ell; ++b) {
      double jtj = 0.0;
      for (std::size_t i = 0; i < m; ++i) jtj += j(i, a) * j(i, b);
      REQUIRE(h(a, b) == Catch::Approx(jtj).margin(1e-12 * std::max(1.0, std::abs(jtj))));
    }
}

TEST_CASE("hessian of the identity family is the pair count") {
  const std::size_t n = 7;
  AffineFamily fam(SymMatrix::sparse_zero(n), {SymMatrix::identity(n)});
  std::vector<double> x = {1.3};
  auto full = eig_full_sym(fam.evaluate(x));
  std::vector<std::size_t> idx = {0, 1, 2};
  auto pairs = select_pairs(full, idx);
  SpectralTarget tgt(std::vector<double>{0.0, 0.5, 1.0});
  auto h = hessian(fam, pairs, tgt);
  REQUIRE(h.rows() == 1);
  REQUIRE(h(0, 0) == Catch::Approx(3.0).margin(1e-10));
}

TEST_CASE("hessian matches finite differences of the gradient") {
  Rng rng(48);
  const std::size_t n = 12, ell = 3;
  auto a0 = random_sym(n, rng);
  std::vector<SymMatrix> basis;
  for (std::size_t k = 0; k < ell; ++k) basis.push_back(random_sym(n, rng, 0.4));
  AffineFamily fam(a0, basis);
  std::vector<double> x = {0.15, -0.25, 0.35};
  auto full = eig_full_sym(fam.evaluate(x));
  // m = n keeps the assignment fixed across the stencil
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  auto pairs = select_pairs(full, idx);
  std::vector<double> tvals(n);
  for (std::size_t i = 0; i < n; ++i) tvals[i] = full.values[i] - 0.2 - 0.01 * double(i);
  std::sort(tvals.begin(), tvals.end());
  SpectralTarget tgt(tvals);
  auto h = hessian(fam, pairs, tgt);
  double hmax = 0.0;
  for (double v : h.data()) hmax = std::max(hmax, std::abs(v));

  const double step = 1e-4;
  for (std::size_t cj = 0; cj < ell; ++cj) {
    auto xp = x, xm = x;
    xp[cj] += step;
    xm[cj] -= step;
    auto gp = gradient_at(fam, xp, idx, tgt);
    auto gm = gradient_at(fam, xm, idx, tgt);
    for (std::size_t ci = 0; ci < ell; ++ci) {
      const double fd = (gp[ci] - gm[ci]) / (2 * step);
      REQUIRE(h(ci, cj) == Catch::Approx(fd).margin(1e-3 * std::max(1.0, hmax)));
    }
  }
  // symmetry is exact after the final averaging
  for (std::size_t a = 0; a < ell; ++a)
    for (std::size_t b = 0; b < ell; ++b) REQUIRE(h(a, b) == h(b, a));
}

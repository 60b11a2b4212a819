#pragma once
// Lift-and-projection iteration and its gradient reformulations.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsiep/assign.hpp"
#include "lsiep/eig_dense.hpp"
#include "lsiep/family.hpp"
#include "lsiep/lanczos.hpp"

namespace lsiep {

enum class Method { LpClassic, RgdLp, RgdLpMin, RgdLpDoubled };
enum class StopRule { BNormStep, EuclideanStep };
enum class SolveStatus { Converged, MaxIters, EigFailure };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::LpClassic: return "lp";
    case Method::RgdLp: return "rgd";
    case Method::RgdLpMin: return "rgd-min";
    case Method::RgdLpDoubled: return "rgd-doubled";
  }
  return "?";
}

inline Method method_from_name(const std::string& s) {
  if (s == "lp") return Method::LpClassic;
  if (s == "rgd") return Method::RgdLp;
  if (s == "rgd-min") return Method::RgdLpMin;
  if (s == "rgd-doubled") return Method::RgdLpDoubled;
  throw InvalidArgument("unknown method: " + s);
}

inline const char* stop_rule_name(StopRule r) {
  return r == StopRule::BNormStep ? "b-norm" : "euclidean";
}

inline StopRule stop_rule_from_name(const std::string& s) {
  if (s == "b-norm") return StopRule::BNormStep;
  if (s == "euclidean") return StopRule::EuclideanStep;
  throw InvalidArgument("unknown stop rule: " + s);
}

// The projection step measures its increment in the euclidean norm, the
// gradient forms in the norm induced by the gram matrix.
inline StopRule default_stop_rule(Method m) {
  return m == Method::LpClassic ? StopRule::EuclideanStep : StopRule::BNormStep;
}

inline const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIters: return "max-iters";
    case SolveStatus::EigFailure: return "eig-failure";
  }
  return "?";
}

inline SolveStatus status_from_name(const std::string& s) {
  if (s == "converged") return SolveStatus::Converged;
  if (s == "max-iters") return SolveStatus::MaxIters;
  if (s == "eig-failure") return SolveStatus::EigFailure;
  throw InvalidArgument("unknown status: " + s);
}

struct SolverConfig {
  Method method = Method::RgdLp;
  double epsilon = 1e-4;
  std::size_t max_iters = 500;
  std::optional<StopRule> stop_rule;  // unset means the method default
  double eig_tol = 1e-8;              // partial eigensolves only
  double degeneracy_delta = 1e-8;     // gap floor for curvature diagnostics
  std::size_t trace_every = 1;        // 0 keeps only the first and last iterates
  bool final_eval = true;
  bool track_lift = true;             // lift distances, lp only, skipped past dim 2000
};

struct IterateRecord {
  std::size_t k = 0;
  std::vector<double> x;  // iterate the step starts from
  double f = 0.0;
  double grad_norm = 0.0;  // euclidean norm of the gradient
  std::vector<double> grad;
  double step_bnorm = 0.0;
  double step_norm2 = 0.0;
  std::vector<std::size_t> assignment;
  EigStats eig;
  double millis = 0.0;
  double z_mid = -1.0;  // ||A(x_next) - Z_k||_F, negative when not tracked
};

struct SolveReport {
  SolveStatus status = SolveStatus::MaxIters;
  Method method = Method::RgdLp;
  StopRule stop_rule = StopRule::BNormStep;
  std::size_t iterations = 0;  // steps applied to x
  std::vector<double> x;
  double f = 0.0;
  double grad_norm = 0.0;
  std::vector<IterateRecord> trace;
  bool divergence_flag = false;
  bool final_evaluated = false;  // f and grad_norm were recomputed at the final x
  double wall_seconds = 0.0;
  std::string eig_error;
};

// Z keeps the eigenvector frame of A(x) but with the assigned eigenvalues
// replaced by their targets: Z = A(x) - sum_i r_i q_i q_i^T.
inline SymMatrix lift(const SymMatrix& ax, const PartialEigenPairs& pairs,
                      std::span<const double> r) {
  const std::size_t n = ax.dim();
  require(pairs.dim() == n, "lift: eigenvector length mismatch");
  require(r.size() == pairs.count(), "lift: residual length mismatch");
  SymMatrix z = SymMatrix::dense_zero(n);
  auto packed = z.packed_lower();
  add_scaled_packed(1.0, ax, packed);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] == 0.0) continue;
    auto q = pairs.vectors.col(i);
    std::size_t p = 0;
    for (std::size_t a = 0; a < n; ++a) {
      const double ra = r[i] * q[a];
      for (std::size_t b = 0; b <= a; ++b) packed[p++] -= ra * q[b];
    }
  }
  return z;
}

// Nearest family member to z in the frobenius metric: solve B x = c with
// c_j = <z - A_0, A_j>.
inline std::vector<double> project(const SymMatrix& z, const AffineFamily& fam) {
  require(z.dim() == fam.dim(), "project: dimension mismatch");
  const std::size_t ell = fam.param_count();
  std::vector<double> c(ell);
  for (std::size_t j = 0; j < ell; ++j)
    c[j] = frobenius_inner(z, fam.basis(j)) - frobenius_inner(fam.a0(), fam.basis(j));
  fam.gram_chol().solve_in_place(c);
  return c;
}

namespace detail {

inline double packed_frobenius(std::size_t n, std::span<const double> packed) {
  double diag = 0.0, off = 0.0;
  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = packed[p++];
      (i == j ? diag : off) += v * v;
    }
  return std::sqrt(diag + 2.0 * off);
}

struct Decomposed {
  PartialEigenPairs pairs;
  std::vector<std::size_t> assignment;
};

inline Decomposed decompose(const SymMatrix& ax, const SpectralTarget& tgt,
                            const SolverConfig& cfg) {
  Decomposed d;
  if (cfg.method == Method::RgdLpMin) {
    d.pairs = eig_smallest_m(ax, tgt.count(), cfg.eig_tol);
    d.assignment.resize(tgt.count());
    std::iota(d.assignment.begin(), d.assignment.end(), std::size_t{0});
  } else {
    auto full = eig_full_sym(ax);
    auto a = assign_monotone_dp(full.values, tgt.values());
    d.pairs = select_pairs(full, a.indices);
    d.assignment = std::move(a.indices);
  }
  return d;
}

}  // namespace detail

inline SolveReport solve(const AffineFamily& fam, const SpectralTarget& tgt,
                         std::span<const double> x0, const SolverConfig& cfg = {}) {
  using clock = std::chrono::steady_clock;
  const std::size_t ell = fam.param_count(), n = fam.dim(), m = tgt.count();
  require(x0.size() == ell, "solve: x0 length mismatch");
  require(m <= n, "solve: more targets than matrix dimension");
  require(cfg.epsilon >= 0.0, "solve: negative tolerance");
  require(cfg.max_iters >= 1, "solve: max_iters must be positive");
  require(all_finite(x0), "solve: x0 has nonfinite entries");

  SolveReport rep;
  rep.method = cfg.method;
  rep.stop_rule = cfg.stop_rule.value_or(default_stop_rule(cfg.method));
  const bool track = cfg.track_lift && cfg.method == Method::LpClassic && n <= 2000;

  std::vector<double> x(x0.begin(), x0.end());
  double prev_f = 0.0;
  const auto t_start = clock::now();

  for (std::size_t k = 0; k < cfg.max_iters; ++k) {
    const auto t_iter = clock::now();
    SymMatrix ax = fam.evaluate(x);
    detail::Decomposed dec;
    try {
      dec = detail::decompose(ax, tgt, cfg);
    } catch (const EigenFailure& e) {
      rep.status = SolveStatus::EigFailure;
      rep.eig_error = e.what();
      break;
    }
    auto eval = evaluate_objective(fam, dec.pairs, tgt);

    // descent is guaranteed from the first post-step iterate onward
    if (k >= 2 && eval.f > prev_f + 1e-6 * std::max(1.0, prev_f)) rep.divergence_flag = true;
    prev_f = eval.f;

    std::vector<double> x_next;
    double z_mid = -1.0;
    if (cfg.method == Method::LpClassic) {
      SymMatrix z = lift(ax, dec.pairs, eval.residual);
      x_next = project(z, fam);
      if (track) {
        std::vector<double> diff(z.packed_lower().begin(), z.packed_lower().end());
        add_scaled_packed(-1.0, fam.evaluate(x_next), diff);
        z_mid = detail::packed_frobenius(n, diff);
      }
    } else {
      std::vector<double> dir = eval.gradient;
      fam.gram_chol().solve_in_place(dir);
      const double scale = cfg.method == Method::RgdLpDoubled ? 2.0 : 1.0;
      x_next = x;
      axpy(-scale, dir, x_next);
    }
    require(all_finite(x_next), "solve: iterate left the finite range");

    std::vector<double> dx = sub(x_next, x);
    const double step_b = fam.b_norm(dx);
    const double step_e = norm2(dx);
    const double step = rep.stop_rule == StopRule::BNormStep ? step_b : step_e;
    const bool stopping = step <= cfg.epsilon;
    const bool last = stopping || k + 1 == cfg.max_iters;

    if (last || k == 0 || (cfg.trace_every != 0 && k % cfg.trace_every == 0)) {
      IterateRecord rec;
      rec.k = k;
      rec.x = x;
      rec.f = eval.f;
      rec.grad_norm = norm2(eval.gradient);
      rec.grad = eval.gradient;
      rec.step_bnorm = step_b;
      rec.step_norm2 = step_e;
      rec.assignment = dec.assignment;
      rec.eig = dec.pairs.stats;
      rec.z_mid = z_mid;
      rec.millis = std::chrono::duration<double, std::milli>(clock::now() - t_iter).count();
      rep.trace.push_back(std::move(rec));
    }

    x = std::move(x_next);
    rep.iterations = k + 1;
    rep.f = eval.f;
    rep.grad_norm = norm2(eval.gradient);
    if (stopping) {
      rep.status = SolveStatus::Converged;
      break;
    }
  }

  rep.x = x;
  if (rep.status != SolveStatus::EigFailure && cfg.final_eval) {
    try {
      SymMatrix ax = fam.evaluate(x);
      auto dec = detail::decompose(ax, tgt, cfg);
      auto eval = evaluate_objective(fam, dec.pairs, tgt);
      rep.f = eval.f;
      rep.grad_norm = norm2(eval.gradient);
      rep.final_evaluated = true;
    } catch (const EigenFailure& e) {
      rep.status = SolveStatus::EigFailure;
      rep.eig_error = e.what();
    }
  }
  rep.wall_seconds = std::chrono::duration<double>(clock::now() - t_start).count();
  return rep;
}

}  // namespace lsiep

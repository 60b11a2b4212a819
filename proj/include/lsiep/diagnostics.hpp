#pragma once
// Numerical verification of the solver's structural guarantees.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "lsiep/solvers.hpp"

namespace lsiep {

enum class CheckOutcome { Pass, Fail, Inconclusive };

inline const char* outcome_name(CheckOutcome o) {
  switch (o) {
    case CheckOutcome::Pass: return "PASS";
    case CheckOutcome::Fail: return "FAIL";
    case CheckOutcome::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

struct CheckResult {
  std::string name;
  CheckOutcome outcome = CheckOutcome::Pass;
  double worst_violation = 0.0;
  std::string location;  // where the worst violation or the blocker sits
};

struct VerificationReport {
  std::vector<CheckResult> checks;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const CheckResult& c) { return c.outcome == CheckOutcome::Pass; });
  }
  bool no_failures() const {
    return std::none_of(checks.begin(), checks.end(),
                        [](const CheckResult& c) { return c.outcome == CheckOutcome::Fail; });
  }

  std::string to_text() const {
    std::ostringstream os;
    for (const auto& c : checks) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.3e", c.worst_violation);
      os << c.name << ": " << outcome_name(c.outcome) << " (worst violation " << buf;
      if (!c.location.empty()) os << " at " << c.location;
      os << ")\n";
    }
    return os.str();
  }

  std::string to_csv() const {
    std::ostringstream os;
    os << "check,outcome,worst_violation,location\n";
    for (const auto& c : checks) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", c.worst_violation);
      os << c.name << "," << outcome_name(c.outcome) << "," << buf << "," << c.location << "\n";
    }
    return os.str();
  }
};

namespace detail {

inline std::string at_iterate(std::size_t k) { return "k=" + std::to_string(k); }

inline void bump(CheckResult& res, double violation, const std::string& where) {
  if (violation > res.worst_violation) {
    res.worst_violation = violation;
    res.location = where;
  }
  res.outcome = CheckOutcome::Fail;
}

}  // namespace detail

// Per-step decrease along a recorded run.  From the second iterate on, a
// plain or projection step must shed at least half the squared gradient
// norm in the inverse gram metric; the doubled step may only keep the
// objective from rising.  Lift distances, when tracked, must interleave
// the objective values.
inline CheckResult check_descent(const AffineFamily& fam, const SolveReport& rep) {
  CheckResult res{"descent", CheckOutcome::Pass, 0.0, ""};
  const auto& tr = rep.trace;
  if (tr.size() < 2 && !(rep.final_evaluated && rep.status == SolveStatus::Converged)) {
    res.outcome = CheckOutcome::Inconclusive;
    res.location = "fewer than two recorded iterates";
    return res;
  }
  require(!tr.empty(), "check_descent: empty trace");
  for (std::size_t t = 0; t + 1 < tr.size(); ++t)
    require(tr[t + 1].k == tr[t].k + 1, "check_descent: trace skips iterates");

  auto bound_after = [&](const IterateRecord& rec) {
    if (rep.method == Method::RgdLpDoubled) return rec.f;
    std::vector<double> dir = rec.grad;
    fam.gram_chol().solve_in_place(dir);
    return rec.f - 0.5 * dot(rec.grad, dir);
  };

  for (std::size_t t = 0; t + 1 < tr.size(); ++t) {
    if (tr[t].k < 1) continue;
    const double slack = 1e-10 * std::max(1.0, tr[t].f);
    const double viol = tr[t + 1].f - bound_after(tr[t]) - slack;
    if (viol > 0.0) detail::bump(res, viol, detail::at_iterate(tr[t].k));
  }
  if (rep.final_evaluated && rep.status == SolveStatus::Converged && tr.back().k >= 1) {
    const double slack = 1e-10 * std::max(1.0, tr.back().f);
    const double viol = rep.f - bound_after(tr.back()) - slack;
    if (viol > 0.0) detail::bump(res, viol, detail::at_iterate(tr.back().k));
  }

  // A(x) -> lift -> next family point: each hop shortens the distance.
  for (std::size_t t = 0; t < tr.size(); ++t) {
    if (tr[t].z_mid < 0.0) continue;
    const double before = std::sqrt(2.0 * tr[t].f);
    const double slack = 1e-9 * std::max(1.0, before);
    const double viol_up = tr[t].z_mid - before - slack;
    if (viol_up > 0.0) detail::bump(res, viol_up, detail::at_iterate(tr[t].k));
    const double after = t + 1 < tr.size() ? std::sqrt(2.0 * tr[t + 1].f)
                         : rep.final_evaluated && rep.status == SolveStatus::Converged
                             ? std::sqrt(2.0 * rep.f)
                             : -1.0;
    if (after < 0.0) continue;
    const double viol_dn = after - tr[t].z_mid - slack;
    if (viol_dn > 0.0) detail::bump(res, viol_dn, detail::at_iterate(tr[t].k));
  }
  return res;
}

// The gram matrix dominates the objective's curvature: lambda_min(B - H)
// must not dip below -1e-8 * ||B||_F at any sampled iterate.  Samples where
// the curvature formula hits a spectral gap below the floor are skipped.
inline CheckResult check_loewner(const AffineFamily& fam, const SpectralTarget& tgt,
                                 const SolveReport& rep, double delta = 1e-8,
                                 std::size_t max_samples = 20) {
  CheckResult res{"loewner", CheckOutcome::Pass, 0.0, ""};
  require(!rep.trace.empty(), "check_loewner: empty trace");
  require(max_samples >= 1, "check_loewner: max_samples must be positive");
  const std::size_t ell = fam.param_count();
  const double bnorm = fam.gram().frobenius_norm();
  const std::size_t stride = (rep.trace.size() + max_samples - 1) / max_samples;

  std::size_t used = 0;
  for (std::size_t t = 0; t < rep.trace.size(); t += stride) {
    const auto& rec = rep.trace[t];
    auto full = eig_full_sym(fam.evaluate(rec.x));
    auto pairs = select_pairs(full, rec.assignment);
    std::size_t skipped = 0;
    auto h = hessian(fam, pairs, tgt, delta, &skipped);
    if (skipped > 0) continue;
    ++used;
    std::vector<double> d(ell * ell);
    for (std::size_t i = 0; i < ell; ++i)
      for (std::size_t j = 0; j < ell; ++j) d[i * ell + j] = fam.gram()(i, j) - h(i, j);
    auto dec = eig_full_from_dense(ell, std::move(d));
    const double viol = -dec.values.front() - 1e-8 * bnorm;
    if (viol > 0.0) detail::bump(res, viol, detail::at_iterate(rec.k));
  }
  if (used == 0) {
    res.outcome = CheckOutcome::Inconclusive;
    res.location = "all samples near-degenerate";
  }
  return res;
}

// The projection iteration and the explicit gradient step must trace the
// same points.  A near-tie in the coupling cost makes the comparison
// meaningless, so it downgrades a mismatch to inconclusive.
inline CheckResult check_equivalence(const AffineFamily& fam, const SpectralTarget& tgt,
                                     std::span<const double> x0, std::size_t iters = 10) {
  CheckResult res{"equivalence", CheckOutcome::Pass, 0.0, ""};
  require(iters >= 1, "check_equivalence: need at least one iteration");
  SolverConfig cfg;
  cfg.epsilon = 0.0;
  cfg.max_iters = iters;
  cfg.final_eval = false;
  cfg.track_lift = false;
  cfg.method = Method::LpClassic;
  auto rl = solve(fam, tgt, x0, cfg);
  cfg.method = Method::RgdLp;
  auto rg = solve(fam, tgt, x0, cfg);

  const std::size_t steps = std::min(rl.trace.size(), rg.trace.size());
  for (std::size_t t = 0; t < steps; ++t) {
    double scale = 1.0;
    for (double v : rg.trace[t].x) scale = std::max(scale, std::abs(v));
    double diff = 0.0;
    for (std::size_t j = 0; j < fam.param_count(); ++j)
      diff = std::max(diff, std::abs(rl.trace[t].x[j] - rg.trace[t].x[j]));
    const double viol = diff - 1e-9 * scale;
    if (viol <= 0.0) continue;

    // trajectories may split legitimately at an ambiguous coupling
    for (std::size_t s = 0; s <= t; ++s) {
      auto full = eig_full_sym(fam.evaluate(rl.trace[s].x));
      auto best = assign_monotone_dp(full.values, tgt.values());
      const double second = assign_second_best_cost(full.values, tgt.values());
      if (second - best.cost <= 1e-12 * std::max(1.0, best.cost)) {
        res.outcome = CheckOutcome::Inconclusive;
        res.worst_violation = viol;
        res.location = "assignment tie at " + detail::at_iterate(rl.trace[s].k);
        return res;
      }
    }
    detail::bump(res, viol, detail::at_iterate(rl.trace[t].k));
    return res;
  }
  return res;
}

namespace detail {

struct StencilEval {
  bool same_assignment = false;
  ObjectiveEval eval;
};

inline StencilEval eval_with_assignment(const AffineFamily& fam, const SpectralTarget& tgt,
                                        std::span<const double> x,
                                        std::span<const std::size_t> want) {
  StencilEval out;
  auto full = eig_full_sym(fam.evaluate(x));
  auto a = assign_monotone_dp(full.values, tgt.values());
  out.same_assignment = std::equal(a.indices.begin(), a.indices.end(), want.begin(), want.end());
  auto pairs = select_pairs(full, a.indices);
  out.eval = evaluate_objective(fam, pairs, tgt);
  return out;
}

}  // namespace detail

// Central differences of the objective against the analytic gradient.
// A coupling change inside the stencil compares different branches, which
// is inconclusive rather than wrong.
inline CheckResult check_gradient_fd(const AffineFamily& fam, const SpectralTarget& tgt,
                                     std::span<const double> x, double h = 1e-5) {
  CheckResult res{"gradient-fd", CheckOutcome::Pass, 0.0, ""};
  require(h > 0.0, "check_gradient_fd: step must be positive");
  const std::size_t ell = fam.param_count();
  auto full = eig_full_sym(fam.evaluate(x));
  auto a = assign_monotone_dp(full.values, tgt.values());
  auto pairs = select_pairs(full, a.indices);
  auto eval = evaluate_objective(fam, pairs, tgt);
  const double scale = std::max(1.0, norm2(eval.gradient));

  std::vector<double> xs(x.begin(), x.end());
  for (std::size_t j = 0; j < ell; ++j) {
    xs[j] = x[j] + h;
    auto up = detail::eval_with_assignment(fam, tgt, xs, a.indices);
    xs[j] = x[j] - h;
    auto dn = detail::eval_with_assignment(fam, tgt, xs, a.indices);
    xs[j] = x[j];
    if (!up.same_assignment || !dn.same_assignment) {
      res.outcome = CheckOutcome::Inconclusive;
      res.location = "coupling change near coordinate " + std::to_string(j);
      return res;
    }
    const double fd = (up.eval.f - dn.eval.f) / (2.0 * h);
    const double viol = std::abs(eval.gradient[j] - fd) / scale - 1e-4;
    if (viol > 0.0) detail::bump(res, viol, "coordinate " + std::to_string(j));
  }
  return res;
}

// Central differences of the gradient against the analytic curvature.
inline CheckResult check_hessian_fd(const AffineFamily& fam, const SpectralTarget& tgt,
                                    std::span<const double> x, double h = 1e-4,
                                    double delta = 1e-8) {
  CheckResult res{"hessian-fd", CheckOutcome::Pass, 0.0, ""};
  require(h > 0.0, "check_hessian_fd: step must be positive");
  const std::size_t ell = fam.param_count();
  // with fewer targets than dimensions the curvature formula drops the
  // unassigned cross terms, so differences of the gradient see more
  if (tgt.count() < fam.dim()) {
    res.outcome = CheckOutcome::Inconclusive;
    res.location = "curvature sums only the assigned pairs";
    return res;
  }
  auto full = eig_full_sym(fam.evaluate(x));
  auto a = assign_monotone_dp(full.values, tgt.values());
  auto pairs = select_pairs(full, a.indices);
  std::size_t skipped = 0;
  auto hmat = hessian(fam, pairs, tgt, delta, &skipped);
  if (skipped > 0) {
    res.outcome = CheckOutcome::Inconclusive;
    res.location = "spectral gap below the floor";
    return res;
  }
  double hscale = 1.0;
  for (double v : hmat.data()) hscale = std::max(hscale, std::abs(v));

  std::vector<double> xs(x.begin(), x.end());
  for (std::size_t j = 0; j < ell; ++j) {
    xs[j] = x[j] + h;
    auto up = detail::eval_with_assignment(fam, tgt, xs, a.indices);
    xs[j] = x[j] - h;
    auto dn = detail::eval_with_assignment(fam, tgt, xs, a.indices);
    xs[j] = x[j];
    if (!up.same_assignment || !dn.same_assignment) {
      res.outcome = CheckOutcome::Inconclusive;
      res.location = "coupling change near coordinate " + std::to_string(j);
      return res;
    }
    for (std::size_t i = 0; i < ell; ++i) {
      const double fd = (up.eval.gradient[i] - dn.eval.gradient[i]) / (2.0 * h);
      const double viol = std::abs(hmat(i, j) - fd) / hscale - 1e-3;
      if (viol > 0.0)
        detail::bump(res, viol, "entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }
  return res;
}

// One solve plus the full battery of structural checks on its trace.
inline VerificationReport verify_all(const AffineFamily& fam, const SpectralTarget& tgt,
                                     std::span<const double> x0, SolverConfig cfg = {}) {
  VerificationReport rep;
  cfg.trace_every = 1;
  cfg.final_eval = true;
  auto run = solve(fam, tgt, x0, cfg);
  if (run.status == SolveStatus::EigFailure)
    throw EigenFailure("verify_all: solve failed: " + run.eig_error, {});
  rep.checks.push_back(check_descent(fam, run));
  rep.checks.push_back(check_loewner(fam, tgt, run, cfg.degeneracy_delta));
  rep.checks.push_back(
      check_equivalence(fam, tgt, x0, std::min<std::size_t>(run.iterations, 10)));
  rep.checks.push_back(check_gradient_fd(fam, tgt, run.x));
  rep.checks.push_back(check_hessian_fd(fam, tgt, run.x, 1e-4, cfg.degeneracy_delta));
  return rep;
}

}  // namespace lsiep

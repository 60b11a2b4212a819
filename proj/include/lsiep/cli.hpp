#pragma once
// Command-line driver: generate problem files, run and time solves, verify
// traces against the descent and curvature checks, and sweep start vectors.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lsiep/diagnostics.hpp"
#include "lsiep/manifest.hpp"
#include "lsiep/trace_io.hpp"

namespace lsiep::cli {

namespace fs = std::filesystem;

namespace detail {

using lsiep::detail::fmt_g17;
using lsiep::detail::join_reals;
using lsiep::detail::write_text_atomic;

// pending solver-flag overrides; only flags the user passed are applied
struct SolverFlags {
  std::string method, stop_rule;
  double epsilon = 0.0;
  std::size_t max_iters = 0;
  CLI::App* cmd = nullptr;

  void attach(CLI::App* c) {
    cmd = c;
    c->add_option("--method", method, "solver method: lp, rgd, rgd-min, rgd-doubled");
    c->add_option("--epsilon", epsilon, "stopping tolerance");
    c->add_option("--max-iters", max_iters, "iteration budget");
    c->add_option("--stop-rule", stop_rule, "step norm for stopping: b-norm, euclidean");
  }

  void apply(SolverConfig& cfg) const {
    if (cmd->count("--method")) cfg.method = method_from_name(method);
    if (cmd->count("--epsilon")) cfg.epsilon = epsilon;
    if (cmd->count("--max-iters")) cfg.max_iters = max_iters;
    if (cmd->count("--stop-rule")) cfg.stop_rule = stop_rule_from_name(stop_rule);
  }
};

inline std::string render_report(const ExperimentManifest& m, const SolveReport& rep,
                                 const std::vector<std::string>& violations) {
  std::ostringstream os;
  os << "name: " << m.name << "\n";
  os << "method: " << method_name(rep.method) << "\n";
  os << "stop rule: " << stop_rule_name(rep.stop_rule) << "\n";
  os << "status: " << status_name(rep.status) << "\n";
  os << "iterations: " << rep.iterations << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6e", rep.f);
  os << "final objective: " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.6e", rep.grad_norm);
  os << "gradient norm: " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.3f", rep.wall_seconds);
  os << "wall seconds: " << buf << "\n";
  os << "divergence flag: " << (rep.divergence_flag ? "yes" : "no") << "\n";
  os << "final x: " << join_reals(rep.x) << "\n";
  if (!rep.eig_error.empty()) os << "eigensolver error: " << rep.eig_error << "\n";
  for (const auto& v : violations) os << "expectation violated: " << v << "\n";
  return os.str();
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// axis forms: fixed:V | lin:LO:HI:K | log:LO:HI:K (log keeps LO's sign)
inline std::vector<double> parse_axis(const std::string& spec) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : spec) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  auto real = [&](const std::string& s) { return lsiep::detail::parse_real(s, "sweep grid"); };
  auto count = [&](const std::string& s) {
    auto k = lsiep::detail::parse_count(s, "sweep grid");
    if (k == 0) throw IoError("sweep grid: axis with zero points");
    return k;
  };
  if (parts[0] == "fixed" && parts.size() == 2) return {real(parts[1])};
  if (parts[0] == "lin" && parts.size() == 4) {
    const double lo = real(parts[1]), hi = real(parts[2]);
    const std::size_t k = count(parts[3]);
    std::vector<double> v;
    for (std::size_t i = 0; i < k; ++i)
      v.push_back(k == 1 ? lo : lo + double(i) * (hi - lo) / double(k - 1));
    return v;
  }
  if (parts[0] == "log" && parts.size() == 4) {
    const double lo = real(parts[1]), hi = real(parts[2]);
    if (lo == 0.0 || hi == 0.0 || (lo < 0) != (hi < 0))
      throw IoError("sweep grid: log axis needs endpoints of one sign");
    const std::size_t k = count(parts[3]);
    const double sign = lo < 0 ? -1.0 : 1.0;
    const double la = std::log10(std::abs(lo)), lb = std::log10(std::abs(hi));
    std::vector<double> v;
    for (std::size_t i = 0; i < k; ++i) {
      const double e = k == 1 ? la : la + double(i) * (lb - la) / double(k - 1);
      v.push_back(sign * std::pow(10.0, e));
    }
    return v;
  }
  throw IoError("sweep grid: bad axis '" + spec + "'");
}

inline std::vector<std::vector<double>> parse_grid(const std::string& spec, std::size_t ell) {
  std::vector<std::vector<double>> axes;
  std::string cur;
  for (char c : spec) {
    if (c == ',') {
      axes.push_back(parse_axis(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  axes.push_back(parse_axis(cur));
  if (axes.size() != ell)
    throw IoError("sweep grid: " + std::to_string(axes.size()) + " axes for " +
                  std::to_string(ell) + " parameters");
  return axes;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// gen

inline int run_gen(const std::string& problem, std::size_t n, std::size_t ell, double density,
                   unsigned long long seed, const std::string& name_flag, const fs::path& out_dir,
                   const detail::SolverFlags& flags) {
  fs::create_directories(out_dir);
  ExperimentManifest m;
  AffineFamily fam = [&]() -> AffineFamily {
    if (problem == "toeplitz") {
      require(n >= 21, "gen: toeplitz instance needs n >= 21 for the default targets");
      m.name = "toeplitz-" + std::to_string(n) + "-" + std::to_string(ell);
      m.target_source = TargetSource::Values;
      for (int i = 0; i < 20; ++i) m.target_values.push_back(-110.0 + 0.2 * i);
      m.x0.assign(ell, 1.0);
      m.config.method = Method::RgdLp;
      m.config.epsilon = 1e-4;
      return toeplitz_family(n, ell);
    }
    if (problem == "random") {
      m.name = "random-" + std::to_string(n) + "-" + std::to_string(ell) + "-s" +
               std::to_string(seed);
      m.target_source = TargetSource::Simulate;
      m.x_true.assign(ell, 1.0);
      m.target_count = std::max<std::size_t>(1, n / 5);
      m.x0.assign(ell, 0.0);
      m.config.method = Method::RgdLp;
      m.config.epsilon = 1e-4;
      return random_family(n, ell, density, seed);
    }
    if (problem == "mn12") {
      m.name = "mn12";
      m.target_source = TargetSource::Simulate;
      m.x_true = mn12_x_star1();
      m.target_count = 21;
      m.selector = TargetSelector::All;
      m.x0 = mn12_x0();
      m.config.method = Method::RgdLp;
      m.config.epsilon = 1e-8;
      m.expect_status = SolveStatus::Converged;
      m.expect_iters_min = 100;
      m.expect_iters_max = 200;
      return mn12_family();
    }
    if (problem == "cr6") {
      m.name = "cr6";
      m.target_source = TargetSource::Simulate;
      m.x_true = cr6_x_star();
      m.target_count = 21;
      m.x0 = {1e5, -1e5, 1e5, 1e5};
      m.config.method = Method::RgdLpMin;
      m.config.epsilon = 1e-4;
      return cr6_family();
    }
    if (problem == "mn6") {
      m.name = "mn6";
      m.target_source = TargetSource::Values;
      m.target_values = mn6_measured_targets();
      m.x0 = mn6_x0();
      m.config.method = Method::RgdLpMin;
      m.config.epsilon = 1e-4;
      m.config.max_iters = 600;
      return mn6_family();
    }
    throw IoError("gen: unknown problem '" + problem + "'");
  }();

  if (!name_flag.empty()) m.name = name_flag;
  flags.apply(m.config);
  save_family(out_dir, m.name, fam);
  m.family_source = FamilySource::File;
  m.family_path = m.name + ".family";
  const fs::path manifest_path = out_dir / (m.name + ".manifest");
  save_experiment_manifest(manifest_path, m);

  std::printf("wrote %s\n", manifest_path.string().c_str());
  std::printf("wrote %s (%zu operators, n = %zu)\n", (out_dir / (m.name + ".family")).string().c_str(),
              fam.param_count(), fam.dim());
  return 0;
}

// ---------------------------------------------------------------------------
// solve

inline int run_solve(const fs::path& manifest_path, const fs::path& out_dir,
                     const detail::SolverFlags& flags) {
  auto m = load_experiment_manifest(manifest_path);
  flags.apply(m.config);
  auto resolved = resolve_experiment(m);
  auto rep = solve(resolved.family, resolved.target, m.x0, m.config);
  auto violations = check_expectations(m, rep);

  fs::create_directories(out_dir);
  write_trace_csv_file(out_dir / (m.name + ".trace.csv"), rep);
  emit_convergence_data(out_dir / m.name, rep);
  const std::string text = detail::render_report(m, rep, violations);
  detail::write_text_atomic(out_dir / (m.name + ".report.txt"), text);
  std::fputs(text.c_str(), stdout);

  return (rep.status == SolveStatus::Converged && violations.empty()) ? 0 : 1;
}

// ---------------------------------------------------------------------------
// compare

inline int run_compare(const fs::path& manifest_path, std::size_t repeats, const fs::path& out_dir,
                       const detail::SolverFlags& flags) {
  require(repeats >= 1, "compare: repeats must be positive");
  auto m = load_experiment_manifest(manifest_path);
  flags.apply(m.config);
  auto resolved = resolve_experiment(m);

  const Method methods[] = {Method::LpClassic, Method::RgdLp, Method::RgdLpMin};
  std::ostringstream csv;
  csv << "method,iterations,seconds,seconds_per_iter\n";
  std::printf("%-12s %12s %12s %12s\n", "method", "iterations", "seconds", "s/iter");
  bool all_converged = true;

  for (Method method : methods) {
    SolverConfig cfg = m.config;
    cfg.method = method;
    cfg.stop_rule.reset();  // each method times its own natural stopping metric
    cfg.trace_every = 0;
    cfg.final_eval = false;
    cfg.track_lift = false;
    std::vector<double> seconds;
    SolveReport rep;
    for (std::size_t r = 0; r < repeats; ++r) {
      rep = solve(resolved.family, resolved.target, m.x0, cfg);
      seconds.push_back(rep.wall_seconds);
    }
    if (rep.status != SolveStatus::Converged) all_converged = false;
    const double sec = detail::median(std::move(seconds));
    const double per = sec / double(std::max<std::size_t>(1, rep.iterations));
    char sec_s[32], per_s[32];
    std::snprintf(sec_s, sizeof sec_s, "%.4g", sec);
    std::snprintf(per_s, sizeof per_s, "%.4g", per);
    std::printf("%-12s %12zu %12s %12s\n", method_name(method), rep.iterations, sec_s, per_s);
    csv << method_name(method) << "," << rep.iterations << "," << sec_s << "," << per_s << "\n";
  }

  fs::create_directories(out_dir);
  detail::write_text_atomic(out_dir / (m.name + ".compare.csv"), csv.str());
  return all_converged ? 0 : 1;
}

// ---------------------------------------------------------------------------
// verify

namespace detail {

// rebuild a solver-shaped trace from a CSV by re-decomposing at each x
inline SolveReport replay_trace(const TraceData& data, const AffineFamily& fam,
                                const SpectralTarget& tgt, Method method,
                                CheckResult& consistency) {
  SolveReport rep;
  rep.method = method;
  rep.status = SolveStatus::MaxIters;
  rep.final_evaluated = false;
  consistency = {"trace-consistency", CheckOutcome::Pass, 0.0, ""};

  for (const auto& row : data.rows) {
    require(row.x.size() == fam.param_count(), "verify: trace row arity mismatch");
    auto full = eig_full_sym(fam.evaluate(row.x));
    auto asg = assign_monotone_dp(full.values, tgt.values());
    auto pairs = select_pairs(full, asg.indices);
    auto eval = evaluate_objective(fam, pairs, tgt);

    IterateRecord rec;
    rec.k = row.k;
    rec.x = row.x;
    rec.f = eval.f;
    rec.grad = eval.gradient;
    rec.grad_norm = norm2(eval.gradient);
    rec.step_bnorm = row.step_bnorm;
    rec.assignment = asg.indices;
    rec.millis = row.millis;
    rep.trace.push_back(std::move(rec));

    const double ftol = 1e-6 * std::max(1.0, std::abs(eval.f));
    const double fgap = std::abs(eval.f - row.f) - ftol;
    const double gtol = 1e-6 * std::max(1.0, rep.trace.back().grad_norm);
    const double ggap = std::abs(rep.trace.back().grad_norm - row.grad_norm) - gtol;
    const double gap = std::max(fgap, ggap);
    if (gap > consistency.worst_violation) {
      consistency.outcome = CheckOutcome::Fail;
      consistency.worst_violation = gap;
      consistency.location = "k=" + std::to_string(row.k);
    }
  }
  rep.iterations = data.rows.back().k;
  rep.x = data.rows.back().x;
  rep.f = rep.trace.back().f;
  rep.grad_norm = rep.trace.back().grad_norm;
  return rep;
}

}  // namespace detail

inline int run_verify(const fs::path& manifest_path, const fs::path& report_path,
                      const fs::path& family_path, const fs::path& targets_path,
                      const std::string& method_str, const fs::path& out_dir,
                      CLI::App* cmd) {
  const bool report_mode = cmd->count("--report") > 0;
  VerificationReport vr;
  std::string stem;

  if (report_mode) {
    AffineFamily fam = [&]() {
      if (cmd->count("--family")) return load_family(family_path);
      require(cmd->count("--manifest") > 0, "verify: --report needs --family or --manifest");
      return build_family(load_experiment_manifest(manifest_path));
    }();
    SpectralTarget tgt = [&]() {
      if (cmd->count("--targets")) return load_targets(targets_path);
      require(cmd->count("--manifest") > 0, "verify: --report needs --targets or --manifest");
      auto m = load_experiment_manifest(manifest_path);
      return build_targets(m, fam);
    }();

    auto data = read_trace_csv_file(report_path);
    const Method method = method_from_name(method_str);
    CheckResult consistency;
    auto rep = detail::replay_trace(data, fam, tgt, method, consistency);
    vr.checks.push_back(consistency);
    vr.checks.push_back(check_descent(fam, rep));
    vr.checks.push_back(check_loewner(fam, tgt, rep));
    if (data.rows.size() >= 2)
      vr.checks.push_back(check_equivalence(fam, tgt, data.rows.front().x,
                                            std::min<std::size_t>(10, data.rows.size() - 1)));
    stem = report_path.stem().string();
  } else {
    require(cmd->count("--manifest") > 0, "verify: pass --manifest or --report");
    auto m = load_experiment_manifest(manifest_path);
    auto resolved = resolve_experiment(m);
    vr = verify_all(resolved.family, resolved.target, m.x0, m.config);
    stem = m.name;
  }

  std::fputs(vr.to_text().c_str(), stdout);
  fs::create_directories(out_dir);
  detail::write_text_atomic(out_dir / (stem + ".verify.csv"), vr.to_csv());
  return vr.no_failures() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// sweep

inline int run_sweep(const fs::path& manifest_path, const std::string& grid_spec,
                     std::size_t threads, const fs::path& out_dir,
                     const detail::SolverFlags& flags) {
  require(threads >= 1, "sweep: threads must be positive");
  auto m = load_experiment_manifest(manifest_path);
  flags.apply(m.config);
  auto resolved = resolve_experiment(m);
  const std::size_t ell = resolved.family.param_count();

  auto axes = detail::parse_grid(grid_spec, ell);
  std::size_t total = 1;
  for (const auto& ax : axes) {
    require(total <= 100000 / ax.size(), "sweep: grid exceeds 1e5 points");
    total *= ax.size();
  }

  SolverConfig cfg = m.config;
  cfg.trace_every = 0;
  cfg.track_lift = false;

  struct PointResult {
    std::vector<double> x0;
    SolveStatus status = SolveStatus::MaxIters;
    std::size_t iterations = 0;
    double f = 0.0, grad_norm = 0.0, seconds = 0.0;
  };
  std::vector<PointResult> results(total);

  auto point_x0 = [&](std::size_t idx) {
    std::vector<double> x(ell);
    for (std::size_t j = ell; j-- > 0;) {
      x[j] = axes[j][idx % axes[j].size()];
      idx /= axes[j].size();
    }
    return x;
  };
  auto work = [&](std::size_t first) {
    for (std::size_t i = first; i < total; i += threads) {
      auto x0 = point_x0(i);
      auto rep = solve(resolved.family, resolved.target, x0, cfg);
      results[i] = {std::move(x0), rep.status, rep.iterations, rep.f, rep.grad_norm,
                    rep.wall_seconds};
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }

  std::ostringstream csv;
  for (std::size_t j = 0; j < ell; ++j) csv << "x0_" << j << ",";
  csv << "status,iterations,F,grad_norm,seconds\n";
  std::size_t converged = 0;
  std::size_t best = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const auto& r = results[i];
    if (r.status == SolveStatus::Converged) ++converged;
    if (r.f < results[best].f) best = i;
    for (double v : r.x0) csv << detail::fmt_g17(v) << ",";
    char sec_s[32];
    std::snprintf(sec_s, sizeof sec_s, "%.4g", r.seconds);
    csv << status_name(r.status) << "," << r.iterations << "," << detail::fmt_g17(r.f) << ","
        << detail::fmt_g17(r.grad_norm) << "," << sec_s << "\n";
  }
  fs::create_directories(out_dir);
  detail::write_text_atomic(out_dir / (m.name + ".sweep.csv"), csv.str());

  std::printf("sweep: %zu points, %zu converged (%.1f%%)\n", total, converged,
              100.0 * double(converged) / double(total));
  std::printf("best point: F = %.6e at %s\n", results[best].f,
              detail::join_reals(results[best].x0).c_str());
  return converged > 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------

inline int run(int argc, char** argv) {
  CLI::App app{"least-squares inverse eigenvalue solver toolkit"};
  app.require_subcommand(1);

  std::string out_dir_s = ".";
  app.add_option("--out-dir", out_dir_s, "directory for output files")->capture_default_str();

  auto* gen = app.add_subcommand("gen", "emit a problem instance as manifest plus matrix files");
  std::string problem = "toeplitz", gen_name;
  std::size_t gen_n = 500, gen_ell = 40;
  double gen_density = 1.0;
  unsigned long long gen_seed = 1;
  gen->add_option("--problem", problem, "toeplitz, random, mn12, cr6, mn6")
      ->capture_default_str();
  gen->add_option("--n", gen_n, "matrix dimension")->capture_default_str();
  gen->add_option("--ell", gen_ell, "number of basis matrices")->capture_default_str();
  gen->add_option("--density", gen_density, "fill of random instances")->capture_default_str();
  gen->add_option("--seed", gen_seed, "seed for random instances")->capture_default_str();
  gen->add_option("--name", gen_name, "basename for the written files");
  detail::SolverFlags gen_flags;
  gen_flags.attach(gen);

  auto* solve_cmd = app.add_subcommand("solve", "run one experiment manifest");
  std::string solve_manifest;
  solve_cmd->add_option("--manifest", solve_manifest, "experiment manifest")->required();
  detail::SolverFlags solve_flags;
  solve_flags.attach(solve_cmd);

  auto* compare = app.add_subcommand("compare", "time lp, rgd and rgd-min on one manifest");
  std::string compare_manifest;
  std::size_t repeats = 3;
  compare->add_option("--manifest", compare_manifest, "experiment manifest")->required();
  compare->add_option("--repeats", repeats, "timing repeats per method")->capture_default_str();
  detail::SolverFlags compare_flags;
  compare_flags.attach(compare);

  auto* verify = app.add_subcommand("verify", "check a run against the solver guarantees");
  std::string verify_manifest, verify_report, verify_family, verify_targets;
  std::string verify_method = "rgd";
  verify->add_option("--manifest", verify_manifest, "experiment manifest");
  verify->add_option("--report", verify_report, "trace csv to replay");
  verify->add_option("--family", verify_family, "family manifest for --report");
  verify->add_option("--targets", verify_targets, "target file for --report");
  verify->add_option("--method", verify_method, "step rule the trace was produced with")
      ->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "solve from a grid of start vectors");
  std::string sweep_manifest, grid_spec;
  std::size_t threads = 1;
  sweep->add_option("--manifest", sweep_manifest, "experiment manifest")->required();
  sweep->add_option("--grid", grid_spec,
                    "per-parameter axes, comma-separated: fixed:V, lin:LO:HI:K, log:LO:HI:K")
      ->required();
  sweep->add_option("--threads", threads, "worker threads")->capture_default_str();
  detail::SolverFlags sweep_flags;
  sweep_flags.attach(sweep);

  try {
    app.parse(argc, argv);
    const fs::path out_dir = out_dir_s;
    if (app.got_subcommand(gen))
      return run_gen(problem, gen_n, gen_ell, gen_density, gen_seed, gen_name, out_dir, gen_flags);
    if (app.got_subcommand(solve_cmd)) return run_solve(solve_manifest, out_dir, solve_flags);
    if (app.got_subcommand(compare))
      return run_compare(compare_manifest, repeats, out_dir, compare_flags);
    if (app.got_subcommand(verify))
      return run_verify(verify_manifest, verify_report, verify_family, verify_targets,
                        verify_method, out_dir, verify);
    if (app.got_subcommand(sweep)) return run_sweep(sweep_manifest, grid_spec, threads, out_dir,
                                                    sweep_flags);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const EigenFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace lsiep::cli

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lsiep/manifest.hpp"
#include "lsiep/problems.hpp"
#include "lsiep/solvers.hpp"
#include "lsiep/trace_io.hpp"

using namespace lsiep;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path = fs::temp_directory_path() /
           ("lsiep-io-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void patch_file(const fs::path& p, const std::string& from, const std::string& to) {
  std::string text = slurp(p);
  auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, from.size(), to);
  std::ofstream out(p, std::ios::binary);
  out << text;
}

ExperimentManifest simulate_manifest() {
  ExperimentManifest m;
  m.name = "banded-sim";
  m.family_source = FamilySource::Toeplitz;
  m.n = 12;
  m.ell = 3;
  m.target_source = TargetSource::Simulate;
  m.x_true = {1.25, -0.5, 0.75};
  m.target_count = 4;
  m.x0 = {1.0, 1.0, 1.0};
  m.config.method = Method::RgdLp;
  m.config.epsilon = 1e-6;
  m.config.max_iters = 400;
  return m;
}

}  // namespace

TEST_CASE("family manifests round trip through matrix market files") {
  TempDir dir;
  auto fam = toeplitz_family(8, 3);
  save_family(dir.path, "banded8", fam);

  REQUIRE(fs::exists(dir.path / "banded8.family"));
  REQUIRE(fs::exists(dir.path / "banded8.a0.mtx"));
  REQUIRE(fs::exists(dir.path / "banded8.b2.mtx"));
  REQUIRE(!fs::exists(dir.path / "banded8.family.tmp"));

  auto back = load_family(dir.path / "banded8.family");
  REQUIRE(back.dim() == 8);
  REQUIRE(back.param_count() == 3);
  for (std::size_t k = 0; k < 3; ++k)
    REQUIRE(back.basis(k).materialize() == fam.basis(k).materialize());
  REQUIRE(back.a0().materialize() == fam.a0().materialize());
}

TEST_CASE("family manifest loader rejects malformed input") {
  TempDir dir;
  save_family(dir.path, "f", toeplitz_family(6, 2));
  const auto mpath = dir.path / "f.family";

  SECTION("unknown key") {
    patch_file(mpath, "name = f", "name = f\ncolor = blue");
    REQUIRE_THROWS_AS(load_family(mpath), IoError);
  }
  SECTION("wrong version header") {
    patch_file(mpath, "lsiep-family v1", "lsiep-family v2");
    REQUIRE_THROWS_AS(load_family(mpath), IoError);
  }
  SECTION("missing basis entry") {
    patch_file(mpath, "basis_1", "basis_7");
    REQUIRE_THROWS_AS(load_family(mpath), IoError);
  }
  SECTION("dimension mismatch against the matrix files") {
    patch_file(mpath, "n = 6", "n = 7");
    REQUIRE_THROWS_AS(load_family(mpath), IoError);
  }
  SECTION("duplicate key") {
    patch_file(mpath, "ell = 2", "ell = 2\nell = 2");
    REQUIRE_THROWS_AS(load_family(mpath), IoError);
  }
}

TEST_CASE("target files round trip") {
  TempDir dir;
  std::vector<double> vals = {-3.25, 0.0, 0.5000000000000001, 7.75};
  save_targets(dir.path / "t.targets", vals);
  auto back = load_targets(dir.path / "t.targets");
  REQUIRE(back.count() == 4);
  for (std::size_t i = 0; i < 4; ++i) REQUIRE(back.values()[i] == vals[i]);

  patch_file(dir.path / "t.targets", "lsiep-targets v1", "targets");
  REQUIRE_THROWS_AS(load_targets(dir.path / "t.targets"), IoError);
}

TEST_CASE("experiment manifests serialize to a parse fixpoint") {
  auto m = simulate_manifest();
  m.expect_status = SolveStatus::Converged;
  m.expect_iters_max = 150;
  m.expect_f_below = 1e-12;

  auto text = serialize_experiment_manifest(m);
  std::istringstream in(text);
  auto parsed = parse_experiment_manifest(in);
  REQUIRE(serialize_experiment_manifest(parsed) == text);

  REQUIRE(parsed.name == "banded-sim");
  REQUIRE(parsed.family_source == FamilySource::Toeplitz);
  REQUIRE(parsed.n == 12);
  REQUIRE(parsed.target_source == TargetSource::Simulate);
  REQUIRE(parsed.x_true == m.x_true);
  REQUIRE(parsed.target_count == 4);
  REQUIRE(parsed.config.epsilon == 1e-6);
  REQUIRE(parsed.expect_status == SolveStatus::Converged);
  REQUIRE(parsed.expect_iters_max == 150);

  ExperimentManifest v;
  v.name = "inline-values";
  v.family_source = FamilySource::Random;
  v.n = 9;
  v.ell = 2;
  v.density = 0.4;
  v.seed = 99;
  v.target_source = TargetSource::Values;
  v.target_values = {-1.0, 2.5};
  v.x0 = {0.0, 0.0};
  auto vtext = serialize_experiment_manifest(v);
  std::istringstream vin(vtext);
  REQUIRE(serialize_experiment_manifest(parse_experiment_manifest(vin)) == vtext);
}

TEST_CASE("experiment manifest parser is strict") {
  auto base = serialize_experiment_manifest(simulate_manifest());

  auto parse_with_line = [&](const std::string& key, const std::string& replacement) {
    std::string text = base;
    auto pos = text.find("\n" + key);
    REQUIRE(pos != std::string::npos);
    auto end = text.find('\n', pos + 1);
    text.replace(pos + 1, end - pos - 1, replacement);
    std::istringstream in(text);
    return parse_experiment_manifest(in);
  };

  REQUIRE_THROWS_AS(parse_with_line("name =", "name = x\nfrobnicate = 1"), IoError);
  REQUIRE_THROWS_AS(parse_with_line("method =", "method = newton"), InvalidArgument);
  REQUIRE_THROWS_AS(parse_with_line("x0 =", "x0_typo = 1 1 1"), IoError);
  REQUIRE_THROWS_AS(parse_with_line("family =", "family = toeplitz 12"), IoError);
  REQUIRE_THROWS_AS(parse_with_line("epsilon =", "epsilon = fast"), IoError);
  REQUIRE_THROWS_AS(parse_with_line("targets =", "targets = guess"), IoError);

  std::string wrong_version = base;
  wrong_version.replace(0, std::string("lsiep-manifest v1").size(), "lsiep-manifest v9");
  std::istringstream in(wrong_version);
  REQUIRE_THROWS_AS(parse_experiment_manifest(in), IoError);
}

TEST_CASE("resolving a manifest builds the family and targets") {
  auto m = simulate_manifest();
  auto resolved = resolve_experiment(m);
  REQUIRE(resolved.family.dim() == 12);
  REQUIRE(resolved.family.param_count() == 3);
  REQUIRE(resolved.target.count() == 4);

  auto rep = solve(resolved.family, resolved.target, m.x0, m.config);
  REQUIRE(rep.status == SolveStatus::Converged);

  m.expect_status = SolveStatus::Converged;
  m.expect_f_below = 1.0;
  REQUIRE(check_expectations(m, rep).empty());

  m.expect_iters_min = rep.iterations + 1;
  auto violations = check_expectations(m, rep);
  REQUIRE(violations.size() == 1);
  REQUIRE(violations[0].find("iterations") != std::string::npos);

  m.x0 = {1.0};
  REQUIRE_THROWS_AS(resolve_experiment(m), InvalidArgument);
}

TEST_CASE("file-referenced families and targets resolve relative to the manifest") {
  TempDir dir;
  auto fam = toeplitz_family(10, 2);
  save_family(dir.path, "banded10", fam);
  save_targets(dir.path / "banded10.targets", std::vector<double>{-2.0, -1.5, 0.25});

  ExperimentManifest m;
  m.name = "from-files";
  m.family_source = FamilySource::File;
  m.family_path = "banded10.family";
  m.target_source = TargetSource::File;
  m.target_path = "banded10.targets";
  m.x0 = {0.5, 0.5};
  save_experiment_manifest(dir.path / "exp.manifest", m);

  auto loaded = load_experiment_manifest(dir.path / "exp.manifest");
  auto resolved = resolve_experiment(loaded);
  REQUIRE(resolved.family.dim() == 10);
  REQUIRE(resolved.target.count() == 3);
  REQUIRE(resolved.target.values()[2] == 0.25);
}

TEST_CASE("trace csv round trips bit for bit") {
  auto m = simulate_manifest();
  auto resolved = resolve_experiment(m);
  auto rep = solve(resolved.family, resolved.target, m.x0, m.config);
  REQUIRE(rep.trace.size() >= 3);

  std::ostringstream buf;
  write_trace_csv(buf, rep);
  std::istringstream in(buf.str());
  auto data = read_trace_csv(in);

  REQUIRE(data.ell == 3);
  REQUIRE(data.rows.size() == rep.trace.size());
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    const auto& got = data.rows[i];
    const auto& want = rep.trace[i];
    REQUIRE(got.k == want.k);
    REQUIRE(got.x == want.x);
    REQUIRE(got.f == want.f);
    REQUIRE(got.grad_norm == want.grad_norm);
    REQUIRE(got.step_bnorm == want.step_bnorm);
    REQUIRE(got.assignment == want.assignment);
    REQUIRE(got.eig_iters == want.eig.iterations);
    REQUIRE(got.millis == want.millis);
  }

  const std::string header = buf.str().substr(0, buf.str().find('\n'));
  REQUIRE(header == "k,x_0,x_1,x_2,F,grad_norm,step_Bnorm,assignment,eig_iters,millis");
}

TEST_CASE("trace csv reader rejects malformed input") {
  std::istringstream empty("");
  REQUIRE_THROWS_AS(read_trace_csv(empty), IoError);

  std::istringstream bad_header("k,x_0,F\n0,1,2\n");
  REQUIRE_THROWS_AS(read_trace_csv(bad_header), IoError);

  std::istringstream short_row(
      "k,x_0,F,grad_norm,step_Bnorm,assignment,eig_iters,millis\n0,1.0,2.0\n");
  REQUIRE_THROWS_AS(read_trace_csv(short_row), IoError);

  std::istringstream no_rows("k,x_0,F,grad_norm,step_Bnorm,assignment,eig_iters,millis\n");
  REQUIRE_THROWS_AS(read_trace_csv(no_rows), IoError);
}

TEST_CASE("convergence series carry a log hint and the objective column") {
  TempDir dir;
  auto m = simulate_manifest();
  auto resolved = resolve_experiment(m);
  auto rep = solve(resolved.family, resolved.target, m.x0, m.config);

  auto [obj, grad] = emit_convergence_data(dir.path / "run", rep);
  REQUIRE(fs::exists(obj));
  REQUIRE(fs::exists(grad));

  auto text = slurp(obj);
  REQUIRE(text.rfind("# y-scale: log\nk,F\n", 0) == 0);

  // one line per trace row after the two header lines
  std::size_t lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  REQUIRE(lines == rep.trace.size() + 2);

  auto gtext = slurp(grad);
  REQUIRE(gtext.find("k,grad_norm") != std::string::npos);

  // a converged run from the truth keeps a single iterate
  auto fixed = solve(resolved.family, resolved.target, m.x_true, m.config);
  REQUIRE(fixed.iterations == 1);
  std::ostringstream single;
  write_convergence_series(single, fixed, "F");
  std::size_t single_lines = 0;
  for (char c : single.str())
    if (c == '\n') ++single_lines;
  REQUIRE(single_lines == fixed.trace.size() + 2);

  std::ostringstream bad;
  REQUIRE_THROWS_AS(write_convergence_series(bad, rep, "speed"), InvalidArgument);
}

#pragma once
// Versioned plain-text manifests.  A family manifest lists the operator
// files of one affine family; an experiment manifest names a family (file or
// generator), a target source, a start vector, solver settings, and optional
// expected outcomes.  Unknown or duplicate keys are rejected.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lsiep/family.hpp"
#include "lsiep/matrix_market.hpp"
#include "lsiep/problems.hpp"
#include "lsiep/solvers.hpp"

namespace lsiep {

inline constexpr const char* kFamilyManifestVersion = "lsiep-family v1";
inline constexpr const char* kExperimentManifestVersion = "lsiep-manifest v1";
inline constexpr const char* kTargetFileVersion = "lsiep-targets v1";

namespace detail {

inline void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.close();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// key = value lines after a fixed version header; '#' lines are comments
inline std::map<std::string, std::string> parse_kv(std::istream& in, const char* version,
                                                   const std::string& what) {
  std::map<std::string, std::string> kv;
  std::string line;
  bool saw_version = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!saw_version) {
      if (t != version)
        throw IoError(what + ": expected header '" + std::string(version) + "', got '" + t + "'");
      saw_version = true;
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw IoError(what + ": line " + std::to_string(lineno) + " is not 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw IoError(what + ": empty key on line " + std::to_string(lineno));
    if (!kv.emplace(key, value).second) throw IoError(what + ": duplicate key '" + key + "'");
  }
  if (!saw_version) throw IoError(what + ": missing '" + std::string(version) + "' header");
  return kv;
}

inline std::string take(std::map<std::string, std::string>& kv, const std::string& key,
                        const std::string& what) {
  auto it = kv.find(key);
  if (it == kv.end()) throw IoError(what + ": missing key '" + key + "'");
  std::string v = it->second;
  kv.erase(it);
  return v;
}

inline std::optional<std::string> take_opt(std::map<std::string, std::string>& kv,
                                           const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) return std::nullopt;
  std::string v = it->second;
  kv.erase(it);
  return v;
}

inline void reject_unknown(const std::map<std::string, std::string>& kv, const std::string& what) {
  if (!kv.empty()) throw IoError(what + ": unknown key '" + kv.begin()->first + "'");
}

inline double parse_real(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (trim(s.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw IoError(what + ": bad number '" + s + "'");
}

inline std::size_t parse_count(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (trim(s.substr(used)).empty() && v >= 0) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw IoError(what + ": bad count '" + s + "'");
}

inline std::vector<double> parse_reals(const std::string& s, const std::string& what) {
  std::istringstream in(s);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_real(tok, what));
  if (out.empty()) throw IoError(what + ": empty number list");
  return out;
}

inline std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline std::string join_reals(std::span<const double> v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += fmt_g17(v[i]);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// family manifests

inline void save_family(const std::filesystem::path& dir, const std::string& name,
                        const AffineFamily& fam) {
  require(!name.empty(), "save_family: empty name");
  std::filesystem::create_directories(dir);
  auto matrix_file = [&](const std::string& stem, const SymMatrix& a) {
    std::ostringstream buf;
    write_matrix_market(buf, a);
    detail::write_text_atomic(dir / stem, buf.str());
  };
  matrix_file(name + ".a0.mtx", fam.a0());
  for (std::size_t k = 0; k < fam.param_count(); ++k)
    matrix_file(name + ".b" + std::to_string(k) + ".mtx", fam.basis(k));

  std::ostringstream out;
  out << kFamilyManifestVersion << "\n";
  out << "name = " << name << "\n";
  out << "n = " << fam.dim() << "\n";
  out << "ell = " << fam.param_count() << "\n";
  out << "a0 = " << name << ".a0.mtx\n";
  for (std::size_t k = 0; k < fam.param_count(); ++k)
    out << "basis_" << k << " = " << name << ".b" << k << ".mtx\n";
  detail::write_text_atomic(dir / (name + ".family"), out.str());
}

inline AffineFamily load_family(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open '" + manifest_path.string() + "'");
  const std::string what = "family manifest";
  auto kv = detail::parse_kv(in, kFamilyManifestVersion, what);
  detail::take(kv, "name", what);
  const std::size_t n = detail::parse_count(detail::take(kv, "n", what), what);
  const std::size_t ell = detail::parse_count(detail::take(kv, "ell", what), what);
  if (ell == 0) throw IoError(what + ": ell must be positive");
  const auto dir = manifest_path.parent_path();
  auto load = [&](const std::string& rel) {
    auto a = read_matrix_market_file((dir / rel).string());
    if (a.dim() != n)
      throw IoError(what + ": '" + rel + "' has dimension " + std::to_string(a.dim()) +
                    ", manifest says " + std::to_string(n));
    return a;
  };
  SymMatrix a0 = load(detail::take(kv, "a0", what));
  std::vector<SymMatrix> basis;
  basis.reserve(ell);
  for (std::size_t k = 0; k < ell; ++k)
    basis.push_back(load(detail::take(kv, "basis_" + std::to_string(k), what)));
  detail::reject_unknown(kv, what);
  return AffineFamily(std::move(a0), std::move(basis));
}

// ---------------------------------------------------------------------------
// target files: one value per line

inline void save_targets(const std::filesystem::path& path, std::span<const double> values) {
  std::ostringstream out;
  out << kTargetFileVersion << "\n";
  for (double v : values) out << detail::fmt_g17(v) << "\n";
  detail::write_text_atomic(path, out.str());
}

inline SpectralTarget load_targets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  bool saw_version = false;
  std::vector<double> values;
  while (std::getline(in, line)) {
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!saw_version) {
      if (t != kTargetFileVersion)
        throw IoError("target file: expected header '" + std::string(kTargetFileVersion) + "'");
      saw_version = true;
      continue;
    }
    values.push_back(detail::parse_real(t, "target file"));
  }
  if (!saw_version) throw IoError("target file: missing version header");
  return SpectralTarget(std::move(values));
}

// ---------------------------------------------------------------------------
// experiment manifests

enum class FamilySource { File, Toeplitz, Random, Mn12, Cr6, Mn6 };
enum class TargetSource { Values, File, Simulate };

struct ExperimentManifest {
  std::string name = "experiment";

  FamilySource family_source = FamilySource::Toeplitz;
  std::filesystem::path family_path;  // File
  std::size_t n = 0, ell = 0;         // Toeplitz, Random
  double density = 1.0;               // Random
  unsigned long long seed = 0;        // Random

  TargetSource target_source = TargetSource::Values;
  std::vector<double> target_values;   // Values
  std::filesystem::path target_path;   // File
  std::vector<double> x_true;          // Simulate
  std::size_t target_count = 0;        // Simulate
  TargetSelector selector = TargetSelector::SmallestM;

  std::vector<double> x0;
  SolverConfig config;

  std::optional<SolveStatus> expect_status;
  std::optional<std::size_t> expect_iters_min, expect_iters_max;
  std::optional<double> expect_f_below;
};

inline ExperimentManifest parse_experiment_manifest(std::istream& in,
                                                    const std::filesystem::path& base_dir = {}) {
  const std::string what = "experiment manifest";
  auto kv = detail::parse_kv(in, kExperimentManifestVersion, what);
  ExperimentManifest m;
  if (auto v = detail::take_opt(kv, "name")) m.name = *v;

  auto fam = detail::split_words(detail::take(kv, "family", what));
  require(!fam.empty(), "experiment manifest: empty family value");
  auto want_args = [&](const std::string& kind, std::size_t n_args) {
    if (fam.size() != n_args + 1)
      throw IoError(what + ": family '" + kind + "' takes " + std::to_string(n_args) +
                    " argument(s)");
  };
  if (fam[0] == "file") {
    want_args("file", 1);
    m.family_source = FamilySource::File;
    m.family_path = base_dir / fam[1];
  } else if (fam[0] == "toeplitz") {
    want_args("toeplitz", 2);
    m.family_source = FamilySource::Toeplitz;
    m.n = detail::parse_count(fam[1], what);
    m.ell = detail::parse_count(fam[2], what);
  } else if (fam[0] == "random") {
    want_args("random", 4);
    m.family_source = FamilySource::Random;
    m.n = detail::parse_count(fam[1], what);
    m.ell = detail::parse_count(fam[2], what);
    m.density = detail::parse_real(fam[3], what);
    m.seed = detail::parse_count(fam[4], what);
  } else if (fam[0] == "mn12") {
    want_args("mn12", 0);
    m.family_source = FamilySource::Mn12;
  } else if (fam[0] == "cr6") {
    want_args("cr6", 0);
    m.family_source = FamilySource::Cr6;
  } else if (fam[0] == "mn6") {
    want_args("mn6", 0);
    m.family_source = FamilySource::Mn6;
  } else {
    throw IoError(what + ": unknown family kind '" + fam[0] + "'");
  }

  auto tgt = detail::split_words(detail::take(kv, "targets", what));
  require(!tgt.empty(), "experiment manifest: empty targets value");
  if (tgt[0] == "values") {
    m.target_source = TargetSource::Values;
    m.target_values = detail::parse_reals(detail::take(kv, "target_values", what), what);
  } else if (tgt[0] == "file") {
    if (tgt.size() != 2) throw IoError(what + ": targets 'file' takes a path");
    m.target_source = TargetSource::File;
    m.target_path = base_dir / tgt[1];
  } else if (tgt[0] == "simulate") {
    m.target_source = TargetSource::Simulate;
    m.x_true = detail::parse_reals(detail::take(kv, "x_true", what), what);
    m.target_count = detail::parse_count(detail::take(kv, "target_count", what), what);
    if (auto v = detail::take_opt(kv, "target_selector")) {
      if (*v == "smallest")
        m.selector = TargetSelector::SmallestM;
      else if (*v == "all")
        m.selector = TargetSelector::All;
      else
        throw IoError(what + ": unknown target_selector '" + *v + "'");
    }
  } else {
    throw IoError(what + ": unknown target kind '" + tgt[0] + "'");
  }

  m.x0 = detail::parse_reals(detail::take(kv, "x0", what), what);

  if (auto v = detail::take_opt(kv, "method")) m.config.method = method_from_name(*v);
  if (auto v = detail::take_opt(kv, "epsilon")) m.config.epsilon = detail::parse_real(*v, what);
  if (auto v = detail::take_opt(kv, "max_iters"))
    m.config.max_iters = detail::parse_count(*v, what);
  if (auto v = detail::take_opt(kv, "stop_rule")) m.config.stop_rule = stop_rule_from_name(*v);
  if (auto v = detail::take_opt(kv, "eig_tol")) m.config.eig_tol = detail::parse_real(*v, what);
  if (auto v = detail::take_opt(kv, "degeneracy_delta"))
    m.config.degeneracy_delta = detail::parse_real(*v, what);
  if (auto v = detail::take_opt(kv, "trace_every"))
    m.config.trace_every = detail::parse_count(*v, what);

  if (auto v = detail::take_opt(kv, "expect_status")) m.expect_status = status_from_name(*v);
  if (auto v = detail::take_opt(kv, "expect_iters_min"))
    m.expect_iters_min = detail::parse_count(*v, what);
  if (auto v = detail::take_opt(kv, "expect_iters_max"))
    m.expect_iters_max = detail::parse_count(*v, what);
  if (auto v = detail::take_opt(kv, "expect_f_below"))
    m.expect_f_below = detail::parse_real(*v, what);

  detail::reject_unknown(kv, what);
  return m;
}

inline ExperimentManifest load_experiment_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return parse_experiment_manifest(in, path.parent_path());
}

// Paths are written as given; callers that want relocatable manifests pass
// paths relative to the manifest's directory.
inline std::string serialize_experiment_manifest(const ExperimentManifest& m) {
  std::ostringstream out;
  out << kExperimentManifestVersion << "\n";
  out << "name = " << m.name << "\n";
  switch (m.family_source) {
    case FamilySource::File: out << "family = file " << m.family_path.string() << "\n"; break;
    case FamilySource::Toeplitz: out << "family = toeplitz " << m.n << " " << m.ell << "\n"; break;
    case FamilySource::Random:
      out << "family = random " << m.n << " " << m.ell << " " << detail::fmt_g17(m.density) << " "
          << m.seed << "\n";
      break;
    case FamilySource::Mn12: out << "family = mn12\n"; break;
    case FamilySource::Cr6: out << "family = cr6\n"; break;
    case FamilySource::Mn6: out << "family = mn6\n"; break;
  }
  switch (m.target_source) {
    case TargetSource::Values:
      out << "targets = values\n";
      out << "target_values = " << detail::join_reals(m.target_values) << "\n";
      break;
    case TargetSource::File: out << "targets = file " << m.target_path.string() << "\n"; break;
    case TargetSource::Simulate:
      out << "targets = simulate\n";
      out << "x_true = " << detail::join_reals(m.x_true) << "\n";
      out << "target_count = " << m.target_count << "\n";
      out << "target_selector = " << (m.selector == TargetSelector::All ? "all" : "smallest")
          << "\n";
      break;
  }
  out << "x0 = " << detail::join_reals(m.x0) << "\n";
  out << "method = " << method_name(m.config.method) << "\n";
  out << "epsilon = " << detail::fmt_g17(m.config.epsilon) << "\n";
  out << "max_iters = " << m.config.max_iters << "\n";
  if (m.config.stop_rule) out << "stop_rule = " << stop_rule_name(*m.config.stop_rule) << "\n";
  out << "eig_tol = " << detail::fmt_g17(m.config.eig_tol) << "\n";
  out << "degeneracy_delta = " << detail::fmt_g17(m.config.degeneracy_delta) << "\n";
  out << "trace_every = " << m.config.trace_every << "\n";
  if (m.expect_status) out << "expect_status = " << status_name(*m.expect_status) << "\n";
  if (m.expect_iters_min) out << "expect_iters_min = " << *m.expect_iters_min << "\n";
  if (m.expect_iters_max) out << "expect_iters_max = " << *m.expect_iters_max << "\n";
  if (m.expect_f_below) out << "expect_f_below = " << detail::fmt_g17(*m.expect_f_below) << "\n";
  return out.str();
}

inline void save_experiment_manifest(const std::filesystem::path& path,
                                     const ExperimentManifest& m) {
  detail::write_text_atomic(path, serialize_experiment_manifest(m));
}

inline AffineFamily build_family(const ExperimentManifest& m) {
  switch (m.family_source) {
    case FamilySource::File: return load_family(m.family_path);
    case FamilySource::Toeplitz: return toeplitz_family(m.n, m.ell);
    case FamilySource::Random: return random_family(m.n, m.ell, m.density, m.seed);
    case FamilySource::Mn12: return mn12_family();
    case FamilySource::Cr6: return cr6_family();
    case FamilySource::Mn6: return mn6_family();
  }
  throw InvalidArgument("build_family: bad source");
}

inline SpectralTarget build_targets(const ExperimentManifest& m, const AffineFamily& fam) {
  switch (m.target_source) {
    case TargetSource::Values: return SpectralTarget(m.target_values);
    case TargetSource::File: return load_targets(m.target_path);
    case TargetSource::Simulate:
      return simulate_targets(fam, m.x_true, m.target_count, m.selector, m.config.eig_tol);
  }
  throw InvalidArgument("build_targets: bad source");
}

struct ResolvedExperiment {
  AffineFamily family;
  SpectralTarget target;
};

inline ResolvedExperiment resolve_experiment(const ExperimentManifest& m) {
  AffineFamily fam = build_family(m);
  require(m.x0.size() == fam.param_count(), "experiment manifest: x0 length mismatch");
  SpectralTarget tgt = build_targets(m, fam);
  require(tgt.count() <= fam.dim(), "experiment manifest: more targets than dimensions");
  return {std::move(fam), std::move(tgt)};
}

// Expected-outcome keys turn a solve into a checkable claim.
inline std::vector<std::string> check_expectations(const ExperimentManifest& m,
                                                   const SolveReport& rep) {
  std::vector<std::string> violations;
  if (m.expect_status && rep.status != *m.expect_status)
    violations.push_back(std::string("status ") + status_name(rep.status) + ", expected " +
                         status_name(*m.expect_status));
  if (m.expect_iters_min && rep.iterations < *m.expect_iters_min)
    violations.push_back("iterations " + std::to_string(rep.iterations) + " below " +
                         std::to_string(*m.expect_iters_min));
  if (m.expect_iters_max && rep.iterations > *m.expect_iters_max)
    violations.push_back("iterations " + std::to_string(rep.iterations) + " above " +
                         std::to_string(*m.expect_iters_max));
  if (m.expect_f_below && !(rep.f < *m.expect_f_below))
    violations.push_back("final objective " + detail::fmt_g17(rep.f) + " not below " +
                         detail::fmt_g17(*m.expect_f_below));
  return violations;
}

}  // namespace lsiep

#pragma once
// Iterate traces as CSV, plus two-column convergence series for plotting.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lsiep/manifest.hpp"
#include "lsiep/solvers.hpp"

namespace lsiep {

namespace detail {

inline std::string join_assignment(std::span<const std::size_t> idx) {
  std::string out;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(idx[i]);
  }
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace detail

inline std::string trace_csv_header(std::size_t ell) {
  std::string h = "k";
  for (std::size_t j = 0; j < ell; ++j) h += ",x_" + std::to_string(j);
  h += ",F,grad_norm,step_Bnorm,assignment,eig_iters,millis";
  return h;
}

inline void write_trace_csv(std::ostream& out, const SolveReport& rep) {
  require(!rep.trace.empty(), "write_trace_csv: empty trace");
  const std::size_t ell = rep.trace.front().x.size();
  out << trace_csv_header(ell) << "\n";
  for (const auto& rec : rep.trace) {
    require(rec.x.size() == ell, "write_trace_csv: ragged trace");
    out << rec.k;
    for (double v : rec.x) out << "," << detail::fmt_g17(v);
    out << "," << detail::fmt_g17(rec.f);
    out << "," << detail::fmt_g17(rec.grad_norm);
    out << "," << detail::fmt_g17(rec.step_bnorm);
    out << "," << detail::join_assignment(rec.assignment);
    out << "," << rec.eig.iterations;
    out << "," << detail::fmt_g17(rec.millis);
    out << "\n";
  }
  if (!out) throw IoError("trace csv: write failed");
}

inline void write_trace_csv_file(const std::filesystem::path& path, const SolveReport& rep) {
  std::ostringstream buf;
  write_trace_csv(buf, rep);
  detail::write_text_atomic(path, buf.str());
}

struct TraceRow {
  std::size_t k = 0;
  std::vector<double> x;
  double f = 0.0;
  double grad_norm = 0.0;
  double step_bnorm = 0.0;
  std::vector<std::size_t> assignment;
  std::size_t eig_iters = 0;
  double millis = 0.0;
};

struct TraceData {
  std::size_t ell = 0;
  std::vector<TraceRow> rows;
};

inline TraceData read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("trace csv: empty stream");
  auto head = detail::split_csv_line(line);
  if (head.size() < 7 || head[0] != "k") throw IoError("trace csv: bad header");
  std::size_t ell = 0;
  while (1 + ell < head.size() && head[1 + ell] == "x_" + std::to_string(ell)) ++ell;
  std::string normalized;
  for (std::size_t i = 0; i < head.size(); ++i) {
    if (i) normalized += ',';
    normalized += head[i];
  }
  if (head.size() != ell + 7 || normalized != trace_csv_header(ell))
    throw IoError("trace csv: bad header");

  TraceData data;
  data.ell = ell;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != ell + 7) throw IoError("trace csv: wrong cell count");
    TraceRow row;
    std::size_t c = 0;
    row.k = detail::parse_count(cells[c++], "trace csv");
    row.x.resize(ell);
    for (std::size_t j = 0; j < ell; ++j) row.x[j] = detail::parse_real(cells[c++], "trace csv");
    row.f = detail::parse_real(cells[c++], "trace csv");
    row.grad_norm = detail::parse_real(cells[c++], "trace csv");
    row.step_bnorm = detail::parse_real(cells[c++], "trace csv");
    const std::string& asg = cells[c++];
    std::string tok;
    std::istringstream as(asg);
    while (std::getline(as, tok, ';'))
      if (!tok.empty()) row.assignment.push_back(detail::parse_count(tok, "trace csv"));
    row.eig_iters = detail::parse_count(cells[c++], "trace csv");
    row.millis = detail::parse_real(cells[c++], "trace csv");
    data.rows.push_back(std::move(row));
  }
  if (data.rows.empty()) throw IoError("trace csv: no data rows");
  return data;
}

inline TraceData read_trace_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_trace_csv(in);
}

// (k, F) or (k, grad_norm) series for external plotting.
inline void write_convergence_series(std::ostream& out, const SolveReport& rep,
                                     const std::string& column) {
  require(!rep.trace.empty(), "convergence series: empty trace");
  require(column == "F" || column == "grad_norm", "convergence series: unknown column");
  out << "# y-scale: log\n";
  out << "k," << column << "\n";
  for (const auto& rec : rep.trace)
    out << rec.k << "," << detail::fmt_g17(column == "F" ? rec.f : rec.grad_norm) << "\n";
  if (!out) throw IoError("convergence series: write failed");
}

// writes <stem>.objective.csv and <stem>.gradient.csv
inline std::pair<std::filesystem::path, std::filesystem::path> emit_convergence_data(
    const std::filesystem::path& stem, const SolveReport& rep) {
  auto obj = stem;
  obj += ".objective.csv";
  auto grad = stem;
  grad += ".gradient.csv";
  std::ostringstream a, b;
  write_convergence_series(a, rep, "F");
  write_convergence_series(b, rep, "grad_norm");
  detail::write_text_atomic(obj, a.str());
  detail::write_text_atomic(grad, b.str());
  return {obj, grad};
}

}  // namespace lsiep

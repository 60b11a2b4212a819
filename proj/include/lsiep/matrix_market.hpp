#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lsiep/errors.hpp"
#include "lsiep/sym_matrix.hpp"

namespace lsiep {

namespace detail {

inline std::string lower_copy(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// MatrixMarket reader for square real matrices.  Coordinate and array
// formats are accepted; pattern and complex fields are not.  A matrix tagged
// "general" must still be numerically symmetric, since only symmetric
// matrices have a home here.
inline SymMatrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("matrix market: empty stream");
  std::istringstream head(line);
  std::string banner, object, format, field, symmetry;
  head >> banner >> object >> format >> field >> symmetry;
  if (detail::lower_copy(banner) != "%%matrixmarket")
    throw IoError("matrix market: missing %%MatrixMarket banner");
  object = detail::lower_copy(object);
  format = detail::lower_copy(format);
  field = detail::lower_copy(field);
  symmetry = detail::lower_copy(symmetry);
  if (object != "matrix") throw IoError("matrix market: object '" + object + "' not supported");
  if (field == "pattern") throw IoError("matrix market: pattern field not supported");
  if (field == "complex") throw IoError("matrix market: complex field not supported");
  if (field != "real" && field != "integer")
    throw IoError("matrix market: field '" + field + "' not supported");
  if (symmetry == "skew-symmetric" || symmetry == "hermitian")
    throw IoError("matrix market: symmetry '" + symmetry + "' not supported");
  if (symmetry != "general" && symmetry != "symmetric")
    throw IoError("matrix market: unknown symmetry '" + symmetry + "'");
  const bool coordinate = (format == "coordinate");
  if (!coordinate && format != "array")
    throw IoError("matrix market: unknown format '" + format + "'");

  // comments and blank lines end at the size line
  std::size_t rows = 0, cols = 0, nnz = 0;
  for (;;) {
    if (!std::getline(in, line)) throw IoError("matrix market: missing size line");
    std::size_t pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '%') continue;
    std::istringstream sz(line);
    if (coordinate) {
      if (!(sz >> rows >> cols >> nnz)) throw IoError("matrix market: bad size line");
    } else {
      if (!(sz >> rows >> cols)) throw IoError("matrix market: bad size line");
    }
    break;
  }
  if (rows != cols) throw IoError("matrix market: matrix is not square");
  const std::size_t n = rows;

  auto check_pair = [](double a, double b) {
    const double tol = 1e-12 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
    return std::abs(a - b) <= tol;
  };

  if (coordinate) {
    std::vector<Triplet> lower;
    lower.reserve(nnz);
    std::vector<Triplet> upper;
    for (std::size_t k = 0; k < nnz; ++k) {
      std::size_t i, j;
      double v;
      if (!(in >> i >> j >> v)) throw IoError("matrix market: truncated entry list");
      if (i < 1 || j < 1 || i > n || j > n) throw IoError("matrix market: index out of range");
      --i;
      --j;
      if (j > i)
        upper.push_back({j, i, v});
      else
        lower.push_back({i, j, v});
    }
    if (symmetry == "symmetric") {
      if (!upper.empty()) throw IoError("matrix market: symmetric file stores upper entries");
      return SymMatrix::from_triplets(n, std::move(lower), Storage::Sparse);
    }
    // general: both halves must be present and agree
    auto key = [](const Triplet& t) { return std::tie(t.row, t.col); };
    auto lt = [&](const Triplet& a, const Triplet& b) { return key(a) < key(b); };
    std::sort(lower.begin(), lower.end(), lt);
    std::sort(upper.begin(), upper.end(), lt);
    std::size_t iu = 0;
    for (const auto& e : lower) {
      if (e.row == e.col) continue;
      if (iu >= upper.size() || upper[iu].row != e.row || upper[iu].col != e.col ||
          !check_pair(upper[iu].value, e.value))
        throw IoError("matrix market: general matrix is not symmetric");
      ++iu;
    }
    if (iu != upper.size()) throw IoError("matrix market: general matrix is not symmetric");
    return SymMatrix::from_triplets(n, std::move(lower), Storage::Sparse);
  }

  // array format
  if (symmetry == "symmetric") {
    SymMatrix m = SymMatrix::dense_zero(n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = j; i < n; ++i) {
        double v;
        if (!(in >> v)) throw IoError("matrix market: truncated array data");
        m.set(i, j, v);
      }
    return m;
  }
  std::vector<double> full(n * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      double v;
      if (!(in >> v)) throw IoError("matrix market: truncated array data");
      full[i * n + j] = v;
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (!check_pair(full[i * n + j], full[j * n + i]))
        throw IoError("matrix market: general matrix is not symmetric");
  return SymMatrix::from_full(n, full, Storage::Dense);
}

// Sparse matrices go out as coordinate/symmetric, dense ones as
// array/symmetric; either way only the lower triangle is written.
inline void write_matrix_market(std::ostream& out, const SymMatrix& a,
                                const std::string& comment = "") {
  const std::size_t n = a.dim();
  if (a.is_sparse()) {
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    if (!comment.empty()) out << "% " << comment << "\n";
    std::size_t nnz = 0;
    a.for_each_stored([&](std::size_t, std::size_t, double v) {
      if (v != 0.0) ++nnz;
    });
    out << n << " " << n << " " << nnz << "\n";
    a.for_each_stored([&](std::size_t i, std::size_t j, double v) {
      if (v != 0.0) out << (i + 1) << " " << (j + 1) << " " << detail::fmt_g17(v) << "\n";
    });
  } else {
    out << "%%MatrixMarket matrix array real symmetric\n";
    if (!comment.empty()) out << "% " << comment << "\n";
    out << n << " " << n << "\n";
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = j; i < n; ++i) out << detail::fmt_g17(a.at(i, j)) << "\n";
  }
  if (!out) throw IoError("matrix market: write failed");
}

inline SymMatrix read_matrix_market_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_matrix_market(in);
}

inline void write_matrix_market_file(const std::string& path, const SymMatrix& a,
                                     const std::string& comment = "") {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_matrix_market(out, a, comment);
  out.close();
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace lsiep

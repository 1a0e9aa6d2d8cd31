#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "crossq/error.hpp"
#include "crossq/matrix.hpp"

namespace crossq {

// Gram or cross-kernel matrix. Cross kernels are (test rows) x (train columns).
struct KernelMatrix {
  RMatrix values;
  bool symmetric = false;

  std::size_t rows() const { return values.rows(); }
  std::size_t cols() const { return values.cols(); }
  double operator()(std::size_t i, std::size_t j) const { return values(i, j); }

  // Checks finiteness, and symmetry when flagged.
  void validate(double sym_tol = 1e-12) const {
    for (double v : values.data())
      if (!std::isfinite(v)) throw ContractError("kernel matrix has a non-finite entry");
    if (!symmetric) return;
    if (!values.square()) throw ContractError("symmetric kernel matrix must be square");
    for (std::size_t i = 0; i < rows(); ++i)
      for (std::size_t j = i + 1; j < cols(); ++j)
        if (std::abs(values(i, j) - values(j, i)) > sym_tol)
          throw ContractError("kernel matrix flagged symmetric is not symmetric at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
  }
};

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_kernel_csv(const KernelMatrix& k, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < k.rows(); ++i) {
    for (std::size_t j = 0; j < k.cols(); ++j) {
      if (j) out << ',';
      out << format_real(k(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

// Plain CSV of reals, no header. Marked symmetric when square and symmetric
// within 1e-12.
inline KernelMatrix read_kernel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw IoError(path + ":" + std::to_string(lineno) + ": not a number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("'" + path + "' holds no kernel rows");
  KernelMatrix k{RMatrix(rows.size(), rows.front().size()), false};
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) k.values(i, j) = rows[i][j];
  if (k.values.square()) {
    k.symmetric = true;
    for (std::size_t i = 0; i < k.rows() && k.symmetric; ++i)
      for (std::size_t j = i + 1; j < k.cols(); ++j)
        if (std::abs(k(i, j) - k(j, i)) > 1e-12) {
          k.symmetric = false;
          break;
        }
  }
  return k;
}

}  // namespace crossq

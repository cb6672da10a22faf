#pragma once

// Dense numeric text matrices and CSV output.

#include <array>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/algorithm/string.hpp>

#include "crescent/errors.hpp"

namespace crescent::io {

/// Reads a whitespace- or comma-delimited matrix, one row per line.
/// Blank lines and lines starting with '#' are skipped.
inline Eigen::MatrixXd load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open matrix file '" + path + "'");
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    boost::algorithm::trim(line);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    boost::algorithm::split(fields, line, boost::algorithm::is_any_of(", \t"),
                            boost::algorithm::token_compress_on);
    std::size_t count = 0;
    for (const auto& f : fields) {
      if (f.empty()) continue;
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(f, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != f.size()) {
        throw input_error(path + ":" + std::to_string(lineno) + ": not a number: '" + f + "'");
      }
      values.push_back(v);
      ++count;
    }
    if (rows == 0) cols = count;
    if (count != cols) {
      throw input_error(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(cols) + " columns, found " + std::to_string(count));
    }
    ++rows;
  }
  if (rows == 0 || cols == 0) throw input_error("matrix file '" + path + "' is empty");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * cols + j];
    }
  }
  return m;
}

/// Shortest decimal that reads back to the same double.
inline std::string format_double(double x) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

}  // namespace crescent::io

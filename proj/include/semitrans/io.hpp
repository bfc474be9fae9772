#pragma once

#include <Eigen/Dense>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "semitrans/dataset.hpp"

namespace semitrans {

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_finite(const std::string& cell, int line_no, std::size_t col) {
  const std::string t = trim(cell);
  const char* begin = t.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v)) {
    std::ostringstream msg;
    msg << "line " << line_no << ", column " << (col + 1) << ": non-numeric value '" << t << "'";
    throw std::runtime_error(msg.str());
  }
  return v;
}

} // namespace detail

//! Reads a dataset from CSV with a header row naming covariate columns then
//! a final column 'y'. Accepts LF or CRLF line endings.
inline Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2 || detail::trim(header.back()) != "y")
    throw std::runtime_error(path + ": header must name covariate columns followed by 'y'");
  const std::size_t d = header.size() - 1;

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      std::ostringstream msg;
      msg << path << ": line " << line_no << ": expected " << header.size() << " cells, got "
          << cells.size();
      throw std::runtime_error(msg.str());
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      try {
        row[c] = detail::parse_finite(cells[c], line_no, c);
      } catch (const std::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no data rows");

  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j)
      x(i, static_cast<Eigen::Index>(j)) = rows[static_cast<std::size_t>(i)][j];
    y[i] = rows[static_cast<std::size_t>(i)][d];
  }
  return Dataset(std::move(x), std::move(y));
}

//! Writes a dataset as CSV with header x1..xd,y at full double precision, so
//! a write/read round trip reproduces the values exactly.
inline void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  out << std::setprecision(17);
  for (Eigen::Index j = 0; j < data.dim(); ++j) out << "x" << (j + 1) << ",";
  out << "y\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.dim(); ++j) out << data.x(i, j) << ",";
    out << data.y[i] << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

} // namespace semitrans

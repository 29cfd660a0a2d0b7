#include "mrd/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mrd/errors.hpp"

namespace mrd {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // Trim surrounding whitespace.
    std::size_t b = field.find_first_not_of(" \t\r");
    std::size_t e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string()
                                         : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

double parse_double(const std::string& field, long row, long col) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size() || errno == ERANGE) {
    throw ParseError("cannot parse number '" + field + "'", row, col);
  }
  return v;
}

}  // namespace

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open file " + path, 0, 0);
  }
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") {
      continue;
    }
    rows.push_back(split_line(line));
  }
  return rows;
}

Dataset load_feature_csv(const std::string& path) {
  auto rows = read_csv_rows(path);
  if (rows.empty()) {
    throw ParseError("empty file " + path, 0, 0);
  }
  const auto& header = rows.front();
  const bool has_y = !header.empty() && header.back() == "y";
  const int d = static_cast<int>(header.size()) - (has_y ? 1 : 0);
  if (d < 1) {
    throw ParseError("header has no feature columns", 1, 1);
  }
  const long n = static_cast<long>(rows.size()) - 1;
  if (n < 1) {
    throw ParseError("no data rows in " + path, 2, 1);
  }

  Dataset data;
  data.x.resize(n, d);
  if (has_y) {
    data.y.resize(n);
  }
  for (long i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i + 1)];
    if (static_cast<long>(row.size()) != static_cast<long>(header.size())) {
      throw ShapeError("ragged row " + std::to_string(i + 2) + " in " + path);
    }
    for (int j = 0; j < d; ++j) {
      data.x(i, j) =
          parse_double(row[static_cast<std::size_t>(j)], i + 2, j + 1);
    }
    if (has_y) {
      data.y[i] = parse_double(row.back(), i + 2, d + 1);
    }
  }
  return data;
}

std::vector<int> load_truth_sidecar(const std::string& path, int d) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open sidecar " + path, 0, 0);
  }
  std::vector<int> out;
  std::string line;
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") {
      continue;
    }
    errno = 0;
    char* end = nullptr;
    long v = std::strtol(line.c_str(), &end, 10);
    while (end && (*end == ' ' || *end == '\r' || *end == '\t')) {
      ++end;
    }
    if (end == line.c_str() || (end && *end != '\0') || errno == ERANGE) {
      throw ParseError("cannot parse index '" + line + "'", row, 1);
    }
    if (v < 1 || v > d) {
      throw ParseError("truth index " + std::to_string(v) +
                           " outside [1, " + std::to_string(d) + "]",
                       row, 1);
    }
    out.push_back(static_cast<int>(v - 1));  // to 0-based
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  const bool with_y = data.has_response();
  for (int j = 0; j < data.d(); ++j) {
    out << 'x' << (j + 1) << (j + 1 < data.d() || with_y ? "," : "");
  }
  if (with_y) {
    out << 'y';
  }
  out << '\n';
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.d(); ++j) {
      out << format_double(data.x(i, j))
          << (j + 1 < data.d() || with_y ? "," : "");
    }
    if (with_y) {
      out << format_double(data.y[i]);
    }
    out << '\n';
  }
}

void save_truth_sidecar(const std::string& path,
                        const std::vector<int>& nonnull) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  for (int j : nonnull) {
    out << (j + 1) << '\n';  // 1-based on disk
  }
}

}  // namespace mrd

#pragma once

#include <stdexcept>
#include <string>

namespace mrd {

// A feature column (or the response) has zero sample variance.
class ConstantColumnError : public std::runtime_error {
 public:
  explicit ConstantColumnError(int column)
      : std::runtime_error("column " + std::to_string(column) +
                           " has zero variance"),
        column_(column) {}
  int column() const { return column_; }

 private:
  int column_;
};

class InvalidFractionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidKError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SingularCovarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A mixture component lost all mass or its covariance collapsed.
class DegenerateComponentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalUnderflowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string msg, long row, long col)
      : std::runtime_error(std::move(msg) + " (row " + std::to_string(row) +
                           ", column " + std::to_string(col) + ")"),
        row_(row),
        col_(col) {}
  long row() const { return row_; }
  long col() const { return col_; }

 private:
  long row_;
  long col_;
};

// Invalid experiment configuration; the CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mrd

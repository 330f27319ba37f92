#pragma once

#include <stdexcept>
#include <string>

namespace mgstc {

/// Base class of every error raised by the library. `category()` drives the
/// CLI exit code: usage/config errors map to 1, data errors to 2, numeric
/// faults to 3.
class Error : public std::runtime_error {
 public:
  enum class Category { usage, config, data, numeric };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

/// Tensor shapes that do not agree for an operation.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(Category::usage, what) {}
};

/// API misuse, e.g. calling backward() on a non-scalar.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(Category::usage, what) {}
};

/// Invalid configuration values (chunk geometry, thresholds, capacities, ...).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Category::config, what) {}
};

/// Arguments outside the region where a closed form is valid.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(Category::usage, what) {}
};

/// Malformed input data. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(Category::data, line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed rows that violate a structural rule (non-uniform interval, ...).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(Category::data, what) {}
};

/// NaN/Inf produced inside the model; the message names the layer.
class NumericFault : public Error {
 public:
  explicit NumericFault(const std::string& what) : Error(Category::numeric, what) {}
};

}  // namespace mgstc

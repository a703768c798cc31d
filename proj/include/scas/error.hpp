#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scas {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
  DimensionError(const std::string& what, std::size_t expected, std::size_t actual)
      : Error(what + ": expected dimension " + std::to_string(expected) + ", got " +
              std::to_string(actual)),
        expected_(expected), actual_(actual) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

private:
  std::size_t expected_;
  std::size_t actual_;
};

/// Invalid tunables or an unsupported problem shape.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// The y-subproblem has no closed form for the given B / c.
class UnsupportedConstraint : public ConfigError {
public:
  using ConfigError::ConfigError;
};

class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// A solver produced a non-finite iterate.
class SolverAbort : public Error {
public:
  SolverAbort(std::size_t iteration, double norm, const std::string& where)
      : Error(where + ": non-finite iterate at iteration " + std::to_string(iteration) +
              " (norm " + std::to_string(norm) + ")"),
        iteration_(iteration), norm_(norm) {}

  std::size_t iteration() const noexcept { return iteration_; }
  double norm() const noexcept { return norm_; }

private:
  std::size_t iteration_;
  double norm_;
};

class IoError : public Error {
public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

} // namespace scas

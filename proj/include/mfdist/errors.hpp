#pragma once

#include <stdexcept>
#include <string>

namespace mfdist {

/// Too few atoms or rows for the requested statistic or fit.
class InsufficientSamples : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// The budget cannot pay for the requested sampling plan.
class Infeasible : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An iterative solver hit its iteration cap or lost its basis.
class SolverFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; the message carries the file location.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Invalid suite or experiment configuration.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mfdist

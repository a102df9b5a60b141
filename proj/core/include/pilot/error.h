#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pilot {

// Contract violations and unrecoverable conditions are reported as
// exceptions. Expected outcomes (no capacity, FD exhaustion, rejected
// submissions) are return values.

class IllegalTransition : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class TimeRegression : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DoubleFree : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IncompleteJob : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class SinkClosed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IncompleteRun : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BackendCrashed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace pilot

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hdrsplat {

// Raised for malformed or inconsistent run configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for unreadable, unwritable or malformed data files (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A DataError that points at a specific line and record of a text file.
class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, std::size_t record,
             const std::string& message)
      : DataError(source + ":" + std::to_string(line) + ": record " +
                  std::to_string(record) + ": " + message),
        line_(line),
        record_(record) {}

  std::size_t line() const { return line_; }
  std::size_t record() const { return record_; }

 private:
  std::size_t line_;
  std::size_t record_;
};

// Non-finite values during optimization (CLI exit code 4).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& component, long long step,
                 const std::string& message)
      : std::runtime_error("step " + std::to_string(step) + ": " + component +
                           ": " + message),
        component_(component),
        step_(step) {}

  const std::string& component() const { return component_; }
  long long step() const { return step_; }

 private:
  std::string component_;
  long long step_;
};

}  // namespace hdrsplat

#pragma once

#include <stdexcept>
#include <string>

namespace focus {

// Process exit codes shared by every subcommand.
enum class ExitCode : int {
  kSuccess = 0,
  kInputError = 2,
  kDataError = 3,
  kNumericError = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Malformed or unreadable input: bad syntax, out-of-range values, missing files.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ExitCode::kInputError, what) {}
};

/// Well-formed input that cannot be used: single-class data, too few samples, bad config values.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::kDataError, what) {}
};

/// NaN/Inf encountered inside a numeric routine.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ExitCode::kNumericError, what) {}
};

}  // namespace focus

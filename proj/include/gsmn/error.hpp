#pragma once

#include <stdexcept>
#include <string>

namespace gsmn {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
  config = 1,
  numeric = 2,
  format = 3,
  verification = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

// Invalid distribution or algorithm parameters.
struct ParameterError : Error {
  explicit ParameterError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(ErrorKind::format, what) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& what) : Error(ErrorKind::format, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

struct DivergenceError : Error {
  DivergenceError(const std::string& what, std::size_t epoch)
      : Error(ErrorKind::numeric, what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

struct UnsupportedTaskError : Error {
  explicit UnsupportedTaskError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct VerificationError : Error {
  explicit VerificationError(const std::string& what) : Error(ErrorKind::verification, what) {}
};

}  // namespace gsmn

#pragma once

#include <stdexcept>
#include <string>

namespace e2emd {

// Base of every error the library throws. `code()` is a stable
// machine-readable tag (the service forwards it verbatim).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Tensor or layer shapes that do not fit together.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& message) : Error("dimension_error", message) {}
};

// Invalid builder or run configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config_error", message) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& message) : Error("index_error", message) {}
};

// Weight store / gradient set / optimizer state disagree with each other.
class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& message) : Error("consistency_error", message) {}
};

// Malformed bytes in one of the file formats. The code distinguishes the
// failure kind, e.g. "bad_magic", "truncated", "fortran_order".
class ParseError : public Error {
 public:
  ParseError(std::string code, const std::string& message) : Error(std::move(code), message) {}
};

// Well-formed input whose contents violate a data invariant.
class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error("data_error", message) {}
};

// Dataset directory does not have the expected structure.
class LayoutError : public Error {
 public:
  explicit LayoutError(const std::string& message) : Error("layout_error", message) {}
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& message) : Error("divergence", message) {}
};

}  // namespace e2emd

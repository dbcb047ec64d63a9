#pragma once

#include <stdexcept>
#include <string>

namespace geofm {

/// Base class for every error raised by the library. `code()` is a short
/// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Precondition violated by the caller.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error("contract", what) {}
};

class InvalidGeometry : public Error {
 public:
  explicit InvalidGeometry(const std::string& what) : Error("invalid_geometry", what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error("parse", what) {}
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(const std::string& id) : Error("duplicate_id", "duplicate id: " + id), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class DimMismatch : public Error {
 public:
  explicit DimMismatch(const std::string& what) : Error("dim_mismatch", what) {}
};

class UndefinedRate : public Error {
 public:
  explicit UndefinedRate(const std::string& what) : Error("undefined_rate", what) {}
};

/// R^2 with a constant truth vector. Reported as not-applicable, never as 0.
class UndefinedMetric : public Error {
 public:
  explicit UndefinedMetric(const std::string& what) : Error("undefined_metric", what) {}
};

class DuplicateLocation : public Error {
 public:
  explicit DuplicateLocation(const std::string& what) : Error("duplicate_location", what) {}
};

class FitError : public Error {
 public:
  explicit FitError(const std::string& what) : Error("fit", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

}  // namespace geofm

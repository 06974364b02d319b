#pragma once

#include <stdexcept>
#include <string>

namespace samlab {

// Invalid configuration or arguments. The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Arguments outside the mathematical domain of a closed-form evaluator.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Base of every numerical failure. The CLI maps it to exit code 3.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define SAMLAB_NUMERIC_ERROR(Name)                                  \
  class Name : public NumericError {                                \
   public:                                                          \
    explicit Name(const std::string& what) : NumericError(#Name, what) {} \
  }

SAMLAB_NUMERIC_ERROR(NonFiniteLoss);
SAMLAB_NUMERIC_ERROR(NonFiniteState);
SAMLAB_NUMERIC_ERROR(ZeroDirection);
SAMLAB_NUMERIC_ERROR(ZeroIterate);
SAMLAB_NUMERIC_ERROR(DegenerateVector);
SAMLAB_NUMERIC_ERROR(GapViolated);
SAMLAB_NUMERIC_ERROR(DimensionTooLarge);

#undef SAMLAB_NUMERIC_ERROR

// Malformed or inconsistent input data (IDX files, datasets).
class DataError : public std::runtime_error {
 public:
  DataError(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class BadMagic : public DataError {
 public:
  explicit BadMagic(const std::string& what) : DataError("BadMagic", what) {}
};
class TruncatedFile : public DataError {
 public:
  explicit TruncatedFile(const std::string& what) : DataError("TruncatedFile", what) {}
};
class CountMismatch : public DataError {
 public:
  explicit CountMismatch(const std::string& what) : DataError("CountMismatch", what) {}
};
class EmptyDataset : public DataError {
 public:
  explicit EmptyDataset(const std::string& what) : DataError("EmptyDataset", what) {}
};

}  // namespace samlab

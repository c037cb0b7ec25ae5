#pragma once

#include <stdexcept>
#include <string>

namespace segfuse {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape / dimension mismatch between operands.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

/// Semantically invalid argument (empty input, out-of-range value, unknown mode).
class InvalidInputError : public Error {
 public:
  explicit InvalidInputError(const std::string& msg) : Error(msg) {}
};

/// A persisted file failed validation (bad JSON, bad base64, inconsistent sizes).
class CorruptFileError : public Error {
 public:
  explicit CorruptFileError(const std::string& msg) : Error(msg) {}
};

/// Synthetic scene generation could not satisfy its constraints.
class GenerationError : public Error {
 public:
  explicit GenerationError(const std::string& msg) : Error(msg) {}
};

/// Invalid run configuration (missing checkpoint, bad hyperparameter).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Optimization failed (non-finite gradient).
class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& msg) : Error(msg) {}
};

/// A function evaluation produced a non-finite value where finiteness is required.
class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& msg) : Error(msg) {}
};

}  // namespace segfuse

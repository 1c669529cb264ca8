#pragma once

#include <stdexcept>
#include <string>

namespace advmark {

// File or checkpoint contents do not parse as the expected format.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// A stored artifact no longer matches its recorded digest.
class IntegrityError : public std::runtime_error {
 public:
  explicit IntegrityError(const std::string& what) : std::runtime_error(what) {}
};

// A checkpoint or config is structurally valid but incompatible with the
// requested operation (e.g. resuming with a different architecture).
class IncompatibilityError : public std::runtime_error {
 public:
  explicit IncompatibilityError(const std::string& what) : std::runtime_error(what) {}
};

// A computation produced NaN/Inf where finite values are required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// An input is legal by type but degenerate for the requested math
// (e.g. a zero-norm feature vector fed to a cosine similarity).
class DegenerateInputError : public std::runtime_error {
 public:
  explicit DegenerateInputError(const std::string& what) : std::runtime_error(what) {}
};

// A configuration is self-inconsistent (e.g. attack loss enabled with an
// empty target registry).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// The requested operation needs gradients but the target cannot provide them.
class UnsupportedTargetError : public std::runtime_error {
 public:
  explicit UnsupportedTargetError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace advmark

#pragma once

#include <stdexcept>
#include <string>

namespace mimetic {

/// Input rejected by a precondition check (degenerate geometry, unknown or
/// duplicate word ids, non-finite coordinates).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed template or a template rendered without a required binding.
class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problem reading a versioned document (layout, log, transcript).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The document declares a format or schema version we do not understand.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A slate holding nothing but mode markers cannot be turned into a poem.
class EmptyPoemError : public std::runtime_error {
 public:
  EmptyPoemError() : std::runtime_error("slate holds no word tiles") {}
};

}  // namespace mimetic

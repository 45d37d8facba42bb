#pragma once

#include <stdexcept>
#include <string>

namespace shrinke {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Operands have incompatible dimensions.
class DimensionError : public Error {
  public:
    using Error::Error;
};

/// An entity/relation id is outside the vocabulary.
class LookupError : public Error {
  public:
    using Error::Error;
};

/// A text or JSON record could not be parsed.
class ParseError : public Error {
  public:
    using Error::Error;
};

/// Invalid configuration value.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// File or directory could not be read/written.
class IoError : public Error {
  public:
    using Error::Error;
};

/// An operation was called with arguments that make no sense (e.g. empty input).
class UsageError : public Error {
  public:
    using Error::Error;
};

/// Checkpoint vocabulary does not match the dataset vocabulary.
class VocabMismatchError : public Error {
  public:
    using Error::Error;
};

/// Benchmark dump record does not match the expected schema or profile.
class ConvertError : public Error {
  public:
    using Error::Error;
};

}  // namespace shrinke

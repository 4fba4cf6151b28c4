#pragma once

#include <stdexcept>
#include <string>

namespace bassl {

// Base for every error the library raises. Each subclass maps to one failure
// family so callers (the CLI in particular) can translate them to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes that do not fit together.
class DimensionError : public Error {
public:
    using Error::Error;
};

// An integer index (class label, axis) outside its valid range.
class IndexError : public Error {
public:
    using Error::Error;
};

// A precondition on the calling protocol was violated (e.g. non-scalar root).
class ContractError : public Error {
public:
    using Error::Error;
};

// An object used in the wrong state (e.g. backward twice on one graph).
class StateError : public Error {
public:
    using Error::Error;
};

// A numeric argument outside its admissible range (e.g. temperature <= 0).
class ParameterError : public Error {
public:
    using Error::Error;
};

// Bad configuration: unknown keys, unparsable values, impossible settings.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed external input file (dataset or checkpoint layout).
class FormatError : public Error {
public:
    using Error::Error;
};

// Checkpoint failed its integrity checks (magic, version, CRC).
class CorruptCheckpointError : public FormatError {
public:
    using FormatError::FormatError;
};

// NaN or Inf appeared where only finite values are allowed.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace bassl

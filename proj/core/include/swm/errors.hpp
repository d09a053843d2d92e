#pragma once

#include <stdexcept>

namespace swm {

/// Base of every file-format failure.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BadMagicError : public FormatError {
public:
    using FormatError::FormatError;
};

class VersionMismatchError : public FormatError {
public:
    using FormatError::FormatError;
};

class TruncatedError : public FormatError {
public:
    using FormatError::FormatError;
};

/// A block or record has different dimensions than required.
class ShapeMismatchError : public FormatError {
public:
    using FormatError::FormatError;
};

/// A referenced file could not be opened.
class MissingFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace swm

#pragma once

#include <stdexcept>
#include <string>

namespace xfmr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A log or sqrt argument left its domain, or a relative loss saw a zero target.
class DomainError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class SizeError : public Error {
public:
    using Error::Error;
};

/// A standardized feature or an R^2 target dimension is constant.
class DegenerateFeatureError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class AlreadyExcludedError : public Error {
public:
    using Error::Error;
};

class SingularSystemError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t epoch, std::size_t step)
        : Error(what), epoch_(epoch), step_(step) {}

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t epoch_;
    std::size_t step_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class CorruptFileError : public IoError {
public:
    using IoError::IoError;
};

class VersionMismatchError : public IoError {
public:
    using IoError::IoError;
};

}  // namespace xfmr

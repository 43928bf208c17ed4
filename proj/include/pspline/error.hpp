#pragma once

#include <stdexcept>
#include <string>

namespace pspline {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller-supplied argument violated a documented precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A linear system that must be positive definite was not.
class SingularSystem : public Error {
public:
    using Error::Error;
};

/// Malformed input file (CSV, config, JSON artifact).
class ParseError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument(what);
}

}  // namespace detail
}  // namespace pspline

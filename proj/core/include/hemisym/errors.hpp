#pragma once

#include <stdexcept>
#include <string>

namespace hemisym {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad arguments, malformed configuration, or violated preconditions.
class InputError : public Error {
public:
    explicit InputError(const std::string& msg) : Error(msg) {}
};

/// File system and codec failures. Messages carry the offending path.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Numerical failures: diverged optimizations, degenerate fits, empty regions
/// where geometry was required.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

} // namespace hemisym

#pragma once

#include <stdexcept>
#include <string>

namespace kelfi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes of points, scales or matrices do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An argument is outside its documented domain (non-positive scale, empty set, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Cholesky factorization of L + m*lambda*I failed.
class FactorizationError : public Error {
public:
    using Error::Error;
};

/// A posterior query was refused because the marginal surrogate likelihood q(y) <= 0.
class RefusalError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace kelfi

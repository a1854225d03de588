#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace otshift {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// A vector that cannot be normalized or has no direction.
class DegenerateVector : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

// Source and target measures carry different total mass.
class MassMismatch : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class PlacementFailure : public Error {
public:
    using Error::Error;
};

// A forward cache no longer matches the network it came from.
class CacheError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// NaN or infinity encountered during an iterative procedure.
class NumericalFailure : public Error {
public:
    NumericalFailure(const std::string& what, std::size_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace otshift

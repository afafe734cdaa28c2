#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace schedmix {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter violates an operation's precondition.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// An iterative solver ran out of iterations, retries or horizon.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// A computation would leave the domain of the model (a vanishing denominator,
/// a logarithm of a non-positive number, an exhausted enumeration budget).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Chunk scheduling strategy. LDF fetches the missing chunk with the smallest
/// buffer index (newest), EDF the one with the largest (closest to playback).
enum class Strategy : std::uint8_t { LDF, EDF };

inline std::string_view to_string(Strategy s) { return s == Strategy::LDF ? "LDF" : "EDF"; }

inline Strategy parse_strategy(std::string_view s)
{
    if (s == "LDF" || s == "ldf") return Strategy::LDF;
    if (s == "EDF" || s == "edf") return Strategy::EDF;
    throw InvalidParameter("unknown strategy '" + std::string(s) + "'");
}

inline void require(bool condition, const std::string& message)
{
    if (!condition) throw InvalidParameter(message);
}

} // namespace schedmix

#pragma once

#include <stdexcept>
#include <string>

namespace bflow {

/// Configuration / precondition violations (CLI exit code 1).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failures: NaN fields, norm blow-up, excessive dropouts (CLI exit code 2).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace bflow

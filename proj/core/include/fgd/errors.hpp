#pragma once

#include <stdexcept>

namespace fgd {

/// Raised when tensor extents, axes or channel counts disagree.
class DimensionError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for out-of-domain scalar parameters (temperature, weights, modes).
class ParameterError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an API is used against its contract (e.g. backward on a non-scalar).
class ContractError : public std::logic_error {
   public:
    using std::logic_error::logic_error;
};

/// Raised for invalid run configurations, scene layouts and config files.
class ConfigError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

}  // namespace fgd

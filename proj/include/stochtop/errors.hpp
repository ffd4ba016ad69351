#pragma once

#include <stdexcept>
#include <string>

namespace stochtop {

/// Invalid argument or configuration value.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Global stiffness assembly or factorization failed (non-SPD system,
/// missing Dirichlet constraints, nonpositive densities).
class AssemblyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A cached quantity was used with a design it was not computed for.
class StaleCacheError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Correction ratio cannot be formed because the estimator value vanishes.
class DegenerateCorrectionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Statistic has no gradient at this point (sigma = 0).
class SingularGradientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Optimizer failed to make progress; message carries iterate context.
class OptimizerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Run configuration is syntactically or semantically invalid.
class ConfigError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

} // namespace stochtop

#pragma once

#include <stdexcept>
#include <string>

namespace ctrlsense {

// Two families, mapped by the CLI to distinct exit codes:
// ConfigError -> 2 (bad model/config input), NumericError -> 3 (numeric failure at runtime).

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public ConfigError {
public:
    DimensionMismatch(const std::string& what, std::size_t expected, std::size_t got)
        : ConfigError(what + ": expected dimension " + std::to_string(expected) + ", got " +
                      std::to_string(got)) {}
};

/// A transition-matrix column (1-based index in the message) that does not sum to one.
class NonStochastic : public ConfigError {
public:
    NonStochastic(std::size_t column, double sum)
        : ConfigError("transition matrix column " + std::to_string(column + 1) + " sums to " +
                      std::to_string(sum) + " (must be column-stochastic)"),
          column_(column), sum_(sum) {}

    std::size_t column() const noexcept { return column_; }
    double sum() const noexcept { return sum_; }

private:
    std::size_t column_;
    double sum_;
};

class NegativeEntry : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class InvalidARParameter : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class BudgetExceeded : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class EmptyControl : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class InvalidTestPoint : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class CholeskyFailure : public NumericError {
public:
    using NumericError::NumericError;
};

class SingularInnovation : public NumericError {
public:
    using NumericError::NumericError;
};

class NonPDMixture : public NumericError {
public:
    using NumericError::NumericError;
};

class DegenerateLikelihood : public NumericError {
public:
    using NumericError::NumericError;
};

} // namespace ctrlsense

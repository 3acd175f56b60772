#pragma once

#include <stdexcept>
#include <string>

namespace spinodal {

// Base class for all library errors. `code()` is a stable machine-readable
// tag used by the CLI for structured error output.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// Mismatched truncations, projections past the truncation, or a field with
// energy outside an operator's domain.
struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error("ShapeError", m) {}
};

// Non-finite values produced by a transform or drift evaluation.
struct NumericsError : Error {
    explicit NumericsError(const std::string& m) : Error("NumericsError", m) {}
};

// Argument outside the mathematical domain of a pointwise function.
struct DomainError : Error {
    explicit DomainError(const std::string& m) : Error("DomainError", m) {}
};

// Operation invoked on the wrong noise variant.
struct VariantError : Error {
    explicit VariantError(const std::string& m) : Error("VariantError", m) {}
};

// Parameter combination violating a structural assumption.
struct ValidationError : Error {
    explicit ValidationError(const std::string& m) : Error("ValidationError", m) {}
};

// Non-positive implicit-solve denominator.
struct StabilityError : Error {
    explicit StabilityError(const std::string& m) : Error("StabilityError", m) {}
};

// A trajectory left the guard ball or became non-finite.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& m, long long step)
        : Error("DivergenceError", m + " at step " + std::to_string(step)), step_(step) {}
    long long step() const noexcept { return step_; }

private:
    long long step_;
};

// Coupling schedule evaluated outside [0, T).
struct ScheduleError : Error {
    explicit ScheduleError(const std::string& m) : Error("ScheduleError", m) {}
};

// A Monte-Carlo estimator with no usable paths or non-finite weights.
struct EstimatorError : Error {
    explicit EstimatorError(const std::string& m) : Error("EstimatorError", m) {}
};

}  // namespace spinodal

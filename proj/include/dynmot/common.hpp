#pragma once

// Shared status codes, error types and small numeric helpers used across the
// library.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynmot {

// Outcome of a solve.  `numerical_failure` covers iteration caps, non-finite
// data and failed cross-checks; the CLI maps each value to a distinct exit
// code.
enum class Status { optimal, infeasible, unbounded, numerical_failure };

inline const char* to_string(Status s) noexcept {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::unbounded: return "unbounded";
        case Status::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

// Configuration / input validation failure.  Carries every schema violation
// found, each message prefixed with the offending field path.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(std::vector<std::string> messages)
        : std::runtime_error(join(messages)), messages_(std::move(messages)) {}
    explicit ConfigError(const std::string& message)
        : ConfigError(std::vector<std::string>{message}) {}

    const std::vector<std::string>& messages() const noexcept { return messages_; }

  private:
    static std::string join(const std::vector<std::string>& msgs) {
        std::string out;
        for (const auto& m : msgs) {
            if (!out.empty()) out += "\n";
            out += m;
        }
        return out;
    }
    std::vector<std::string> messages_;
};

// Numerical breakdown (iteration cap, non-finite values, failed residual
// check).  Distinct from infeasibility, which is a property of the inputs.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A pricing rule whose band is empty (lower > upper) at a concrete prefix.
// The witness names the time index, option and prefix values so the caller
// can report exactly where the rule broke.
class InfeasibleRuleError : public std::runtime_error {
  public:
    InfeasibleRuleError(std::string what, std::vector<double> prefix)
        : std::runtime_error(std::move(what)), prefix_(std::move(prefix)) {}

    const std::vector<double>& prefix() const noexcept { return prefix_; }

  private:
    std::vector<double> prefix_;
};

// Relative-absolute hybrid tolerance: |a - b| <= tol * (1 + max(|a|,|b|)).
inline bool close(double a, double b, double tol) noexcept {
    return std::abs(a - b) <= tol * (1.0 + std::max(std::abs(a), std::abs(b)));
}

inline bool is_finite(double x) noexcept { return std::isfinite(x); }

inline void require_finite(const std::vector<double>& xs, const char* what) {
    for (double x : xs)
        if (!std::isfinite(x)) throw NumericalError(std::string(what) + ": non-finite value");
}

}  // namespace dynmot

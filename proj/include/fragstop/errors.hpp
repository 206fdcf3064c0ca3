#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fragstop {

/// Argument outside the domain of a function (e.g. Φ at p ≤ p_lower).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A dislocation model or parameter set that violates its own invariants.
class InvalidModel : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Violation of a modelling assumption (A1, A2, q > 0, κ > γ, ...).
/// Carries every violated assumption, not just the first one.
class AssumptionViolation : public std::runtime_error {
public:
    explicit AssumptionViolation(std::vector<std::string> violations)
        : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out = "assumption violated:";
        for (const auto& s : v) out += " [" + s + "]";
        return out;
    }

    std::vector<std::string> violations_;
};

/// A simulation ran past its safety horizon or step cap.
class HorizonExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A configured resource cap (block count, bracket doublings) was hit.
class ResourceCapExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unknown configuration input; lists every problem found.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : ConfigError(std::vector<std::string>{what}) {}
    explicit ConfigError(std::vector<std::string> problems)
        : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out = "config error:";
        for (const auto& s : v) out += " [" + s + "]";
        return out;
    }

    std::vector<std::string> problems_;
};

}  // namespace fragstop

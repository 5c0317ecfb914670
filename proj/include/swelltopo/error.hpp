#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace swelltopo {

/// Failure classes. The numeric values double as CLI exit codes where a
/// class maps onto one (config 2, forward 3, adjoint 4, I/O 5).
enum class ErrorKind {
    config = 2,
    forward_nonconvergence = 3,
    adjoint = 4,
    io = 5,
    invalid_design = 10,
    domain = 11,
    bracket = 12,
    singular_equilibrium = 13,
    inverted_element = 14,
    contract = 15,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Carries every violation found, not just the first.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> violations)
        : Error(ErrorKind::config, join(violations)), violations_(std::move(violations)) {}
    explicit ConfigError(const std::string& violation) : ConfigError(std::vector<std::string>{violation}) {}
    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out = "configuration invalid:";
        for (const auto& s : v) out += "\n  - " + s;
        return out;
    }
    std::vector<std::string> violations_;
};

class InvalidDesignError : public Error {
public:
    explicit InvalidDesignError(const std::string& w) : Error(ErrorKind::invalid_design, w) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& w) : Error(ErrorKind::domain, w) {}
};

class BracketError : public Error {
public:
    explicit BracketError(const std::string& w) : Error(ErrorKind::bracket, w) {}
};

class SingularEquilibriumError : public Error {
public:
    explicit SingularEquilibriumError(const std::string& w) : Error(ErrorKind::singular_equilibrium, w) {}
};

class InvertedElementError : public Error {
public:
    explicit InvertedElementError(const std::string& w) : Error(ErrorKind::inverted_element, w) {}
};

class ContractError : public Error {
public:
    explicit ContractError(const std::string& w) : Error(ErrorKind::contract, w) {}
};

class AdjointError : public Error {
public:
    explicit AdjointError(const std::string& w) : Error(ErrorKind::adjoint, w) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};

/// Newton or load-stepping failure. Keeps the last iterate so callers can
/// inspect or retry.
class NonconvergenceError : public Error {
public:
    NonconvergenceError(const std::string& w, int load_step, std::vector<double> last_iterate,
                        std::vector<double> residual_history)
        : Error(ErrorKind::forward_nonconvergence, w),
          load_step_(load_step),
          last_iterate_(std::move(last_iterate)),
          residual_history_(std::move(residual_history)) {}

    int load_step() const noexcept { return load_step_; }
    const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
    const std::vector<double>& residual_history() const noexcept { return residual_history_; }

private:
    int load_step_;
    std::vector<double> last_iterate_;
    std::vector<double> residual_history_;
};

inline int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::config:
    case ErrorKind::invalid_design:
    case ErrorKind::contract:
        return 2;
    case ErrorKind::forward_nonconvergence:
    case ErrorKind::domain:
    case ErrorKind::bracket:
    case ErrorKind::inverted_element:
        return 3;
    case ErrorKind::adjoint:
    case ErrorKind::singular_equilibrium:
        return 4;
    case ErrorKind::io:
        return 5;
    }
    return 1;
}

} // namespace swelltopo

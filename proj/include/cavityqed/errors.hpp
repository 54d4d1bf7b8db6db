#pragma once

#include <stdexcept>
#include <string>

namespace cavityqed {

/// Failure categories. The CLI maps these onto process exit codes.
enum class error_kind {
    config,           ///< invalid input or configuration
    domain,           ///< argument outside the mathematical domain
    convergence,      ///< numerical non-convergence
    invariant,        ///< internal invariant violated
};

class error : public std::runtime_error {
public:
    error(error_kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] error_kind kind() const noexcept { return kind_; }

private:
    error_kind kind_;
};

struct config_error : error {
    explicit config_error(const std::string& w) : error(error_kind::config, w) {}
};

struct domain_error : error {
    explicit domain_error(const std::string& w) : error(error_kind::domain, w) {}
};

struct convergence_error : error {
    explicit convergence_error(const std::string& w) : error(error_kind::convergence, w) {}
};

struct invariant_error : error {
    explicit invariant_error(const std::string& w) : error(error_kind::invariant, w) {}
};

/// Exit codes of the command line tool.
[[nodiscard]] inline int exit_code(error_kind k) noexcept {
    switch (k) {
    case error_kind::config: return 2;
    case error_kind::domain: return 2;
    case error_kind::convergence: return 3;
    case error_kind::invariant: return 4;
    }
    return 4;
}

} // namespace cavityqed

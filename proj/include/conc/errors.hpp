#pragma once

#include <stdexcept>
#include <string>

namespace conc {

/// Bad or missing input: unreadable files, malformed formats, invalid config.
/// CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// The computation itself cannot proceed: empty sessions, degenerate
/// quantiles, rank-deficient designs. CLI maps this to exit code 1.
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace conc

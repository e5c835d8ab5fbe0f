#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coscpmm {

enum class ErrorKind {
    model_definition,
    evaluation,
    parameter,
    configuration,
    no_convergence,
    degenerate_solution,
    aliasing,
    rank_deficiency,
    degenerate_spectrum,
    floquet_consistency,
    internal_consistency,
    dead_node,
    resonant_denominator,
    contract,
    instability,
    numerical,
    io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for every failure in the engine; `kind()` says which
/// contract was violated so callers (the CLI, tests) can dispatch on it.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace coscpmm

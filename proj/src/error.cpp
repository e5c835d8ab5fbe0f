#include "coscpmm/error.hpp"

namespace coscpmm {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::model_definition: return "model-definition error";
    case ErrorKind::evaluation: return "evaluation error";
    case ErrorKind::parameter: return "parameter error";
    case ErrorKind::configuration: return "configuration error";
    case ErrorKind::no_convergence: return "no-convergence error";
    case ErrorKind::degenerate_solution: return "degenerate-solution error";
    case ErrorKind::aliasing: return "aliasing error";
    case ErrorKind::rank_deficiency: return "rank-deficiency error";
    case ErrorKind::degenerate_spectrum: return "degenerate-spectrum error";
    case ErrorKind::floquet_consistency: return "Floquet-consistency error";
    case ErrorKind::internal_consistency: return "internal-consistency error";
    case ErrorKind::dead_node: return "dead-node error";
    case ErrorKind::resonant_denominator: return "resonant-denominator error";
    case ErrorKind::contract: return "contract error";
    case ErrorKind::instability: return "instability error";
    case ErrorKind::numerical: return "numerical error";
    case ErrorKind::io: return "I/O error";
    }
    return "error";
}

}  // namespace coscpmm

#pragma once

#include <stdexcept>
#include <string>

namespace anisofem {

enum class ErrorCode {
    invalid_mesh,
    invalid_split,
    invalid_source,
    out_of_domain,
    ambiguous_gradient,
    non_nested,
    invalid_epsilon,
    invalid_delta,
    degenerate_cutoff,
    assumption_violated,
    non_convergence,
    not_spd,
    singular_matrix,
    invalid_sample,
    undefined_ratio,
    unsupported_mesh,
    invalid_quadrature,
    invalid_config,
    io_error,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_mesh: return "invalid-mesh";
        case ErrorCode::invalid_split: return "invalid-split";
        case ErrorCode::invalid_source: return "invalid-source";
        case ErrorCode::out_of_domain: return "out-of-domain";
        case ErrorCode::ambiguous_gradient: return "ambiguous-gradient";
        case ErrorCode::non_nested: return "non-nested";
        case ErrorCode::invalid_epsilon: return "invalid-epsilon";
        case ErrorCode::invalid_delta: return "invalid-delta";
        case ErrorCode::degenerate_cutoff: return "degenerate-cutoff";
        case ErrorCode::assumption_violated: return "assumption-violated";
        case ErrorCode::non_convergence: return "non-convergence";
        case ErrorCode::not_spd: return "not-spd";
        case ErrorCode::singular_matrix: return "singular";
        case ErrorCode::invalid_sample: return "invalid-sample";
        case ErrorCode::undefined_ratio: return "undefined-ratio";
        case ErrorCode::unsupported_mesh: return "unsupported-mesh";
        case ErrorCode::invalid_quadrature: return "invalid-quadrature";
        case ErrorCode::invalid_config: return "invalid-config";
        case ErrorCode::io_error: return "io-error";
    }
    return "unknown";
}

/// Library error with a stable machine-checkable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace anisofem

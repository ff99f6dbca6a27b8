#pragma once

#include <stdexcept>
#include <string>

namespace mvreflect {

// Machine-readable error codes, stable across versions. The CLI maps these
// to exit statuses and prints them as error[<code>].
enum class ErrorCode {
    domain_range,        // time outside [0, T]
    geometry_search,     // boundary search failed to bracket
    projection_failure,  // oblique projection exceeded max iterations
    shape,               // dimension mismatch in vectors/matrices
    argument,            // invalid argument (empty measure, grid mismatch, ...)
    fixed_point,         // Picard iteration failed to converge
    optimization,        // rate minimization diverged past the energy ceiling
    config,              // experiment config failed validation
    unknown_preset,      // config names a preset that does not exist
    invalid_grid,        // config grid fails its range checks
    io,                  // file read/write failure
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::domain_range: return "E_DOMAIN_RANGE";
        case ErrorCode::geometry_search: return "E_GEOMETRY_SEARCH";
        case ErrorCode::projection_failure: return "E_PROJECTION_FAILURE";
        case ErrorCode::shape: return "E_SHAPE";
        case ErrorCode::argument: return "E_ARGUMENT";
        case ErrorCode::fixed_point: return "E_FIXED_POINT";
        case ErrorCode::optimization: return "E_OPTIMIZATION";
        case ErrorCode::config: return "E_CONFIG";
        case ErrorCode::unknown_preset: return "E_UNKNOWN_PRESET";
        case ErrorCode::invalid_grid: return "E_INVALID_GRID";
        case ErrorCode::io: return "E_IO";
    }
    return "E_UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + msg), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace mvreflect

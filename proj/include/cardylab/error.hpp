#pragma once

#include <stdexcept>
#include <string>

namespace cardylab {

enum class ErrorCode {
    EMPTY_SEGMENT,
    NO_INTERIOR_HEXAGON,
    MARKED_POINT_COLLISION,
    MARKED_POINT_ORDER,
    EMPTY_REGULARIZATION,
    DEGENERATE_FIT,
    MALFORMED_QUERY,
    TOO_LARGE,
    POINT_OUTSIDE_DOMAIN,
    POINT_NOT_ESTIMATED,
    INSUFFICIENT_PAIRS,
    MISSING_VERTEX_VALUE,
    MC_NOISE_DOMINATED,
    TOO_CLOSE_TO_CONTOUR,
    POINT_ON_CURVE,
    EMPTY_SHRUNKEN,
    OUT_OF_RANGE,
    INSUFFICIENT_POINTS,
    SEPARATION_VIOLATED,
    TOO_CLOSE,
    NOT_SEPARATING,
    WINDOW_UNREACHABLE,
    GEOMETRY_DEGENERATE,
    NO_BOX_PATH,
    UNSUPPORTED_CINF,
    BAD_CONFIG,
    IO_ERROR,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
    case ErrorCode::EMPTY_SEGMENT: return "EMPTY_SEGMENT";
    case ErrorCode::NO_INTERIOR_HEXAGON: return "NO_INTERIOR_HEXAGON";
    case ErrorCode::MARKED_POINT_COLLISION: return "MARKED_POINT_COLLISION";
    case ErrorCode::MARKED_POINT_ORDER: return "MARKED_POINT_ORDER";
    case ErrorCode::EMPTY_REGULARIZATION: return "EMPTY_REGULARIZATION";
    case ErrorCode::DEGENERATE_FIT: return "DEGENERATE_FIT";
    case ErrorCode::MALFORMED_QUERY: return "MALFORMED_QUERY";
    case ErrorCode::TOO_LARGE: return "TOO_LARGE";
    case ErrorCode::POINT_OUTSIDE_DOMAIN: return "POINT_OUTSIDE_DOMAIN";
    case ErrorCode::POINT_NOT_ESTIMATED: return "POINT_NOT_ESTIMATED";
    case ErrorCode::INSUFFICIENT_PAIRS: return "INSUFFICIENT_PAIRS";
    case ErrorCode::MISSING_VERTEX_VALUE: return "MISSING_VERTEX_VALUE";
    case ErrorCode::MC_NOISE_DOMINATED: return "MC_NOISE_DOMINATED";
    case ErrorCode::TOO_CLOSE_TO_CONTOUR: return "TOO_CLOSE_TO_CONTOUR";
    case ErrorCode::POINT_ON_CURVE: return "POINT_ON_CURVE";
    case ErrorCode::EMPTY_SHRUNKEN: return "EMPTY_SHRUNKEN";
    case ErrorCode::OUT_OF_RANGE: return "OUT_OF_RANGE";
    case ErrorCode::INSUFFICIENT_POINTS: return "INSUFFICIENT_POINTS";
    case ErrorCode::SEPARATION_VIOLATED: return "SEPARATION_VIOLATED";
    case ErrorCode::TOO_CLOSE: return "TOO_CLOSE";
    case ErrorCode::NOT_SEPARATING: return "NOT_SEPARATING";
    case ErrorCode::WINDOW_UNREACHABLE: return "WINDOW_UNREACHABLE";
    case ErrorCode::GEOMETRY_DEGENERATE: return "GEOMETRY_DEGENERATE";
    case ErrorCode::NO_BOX_PATH: return "NO_BOX_PATH";
    case ErrorCode::UNSUPPORTED_CINF: return "UNSUPPORTED_CINF";
    case ErrorCode::BAD_CONFIG: return "BAD_CONFIG";
    case ErrorCode::IO_ERROR: return "IO_ERROR";
    }
    return "UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace cardylab

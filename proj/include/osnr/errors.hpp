#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace osnr {

namespace detail {

inline std::string num(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", value);
    return buf;
}

}  // namespace detail

enum class ErrorKind {
    Validation,
    Topology,
    Dimension,
    Range,
    Usage,
    Evaluation,
    Domain,
    Singular,
    NonConvergence,
    Divergence,
    Io,
};

[[nodiscard]] constexpr const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Topology: return "topology";
        case ErrorKind::Dimension: return "dimension";
        case ErrorKind::Range: return "range";
        case ErrorKind::Usage: return "usage";
        case ErrorKind::Evaluation: return "evaluation";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Singular: return "singular";
        case ErrorKind::NonConvergence: return "non-convergence";
        case ErrorKind::Divergence: return "divergence";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

/// Process exit code for an error kind: 1 validation, 2 numerical failure, 3 I/O.
[[nodiscard]] constexpr int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Validation:
        case ErrorKind::Topology:
        case ErrorKind::Dimension:
        case ErrorKind::Range:
        case ErrorKind::Usage:
            return 1;
        case ErrorKind::Io:
            return 3;
        default:
            return 2;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Channel-scoped numerical failure (OSNR denominator, log argument, singular update).
class ChannelError : public Error {
public:
    ChannelError(ErrorKind kind, std::size_t channel, const std::string& what)
        : Error(kind, what + " (channel " + std::to_string(channel + 1) + ")"), channel_(channel) {}

    [[nodiscard]] std::size_t channel() const noexcept { return channel_; }

private:
    std::size_t channel_;
};

/// Factorization hit a pivot below the singularity threshold.
class SingularError : public Error {
public:
    SingularError(double smallest_pivot, double threshold)
        : Error(ErrorKind::Singular,
                "matrix is singular: smallest pivot " + detail::num(smallest_pivot) +
                    " below threshold " + detail::num(threshold)),
          smallest_pivot_(smallest_pivot) {}

    [[nodiscard]] double smallest_pivot() const noexcept { return smallest_pivot_; }

private:
    double smallest_pivot_;
};

}  // namespace osnr

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace repcap {

enum class ErrorKind {
    // numeric
    InfiniteMean,
    ZeroSupport,
    DegenerateTruncation,
    NoConvergence,
    MultichainDetected,
    StateExplosion,
    NonLatticeDelta,
    IncommensurateSupport,
    TooManyServers,
    // contract violations
    InvalidPartition,
    InvalidDistribution,
    InconsistentObservation,
    PolicyError,
    // input
    ConfigError,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` tells callers which
/// contract was broken. The CLI maps kinds onto exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// True for failures of a numeric computation on otherwise valid input.
    bool is_numeric() const noexcept;

private:
    ErrorKind kind_;
};

}  // namespace repcap

#include "repcap/error.hpp"

namespace repcap {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InfiniteMean: return "InfiniteMean";
        case ErrorKind::ZeroSupport: return "ZeroSupport";
        case ErrorKind::DegenerateTruncation: return "DegenerateTruncation";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::MultichainDetected: return "MultichainDetected";
        case ErrorKind::StateExplosion: return "StateExplosion";
        case ErrorKind::NonLatticeDelta: return "NonLatticeDelta";
        case ErrorKind::IncommensurateSupport: return "IncommensurateSupport";
        case ErrorKind::TooManyServers: return "TooManyServers";
        case ErrorKind::InvalidPartition: return "InvalidPartition";
        case ErrorKind::InvalidDistribution: return "InvalidDistribution";
        case ErrorKind::InconsistentObservation: return "InconsistentObservation";
        case ErrorKind::PolicyError: return "PolicyError";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

bool Error::is_numeric() const noexcept {
    switch (kind_) {
        case ErrorKind::InfiniteMean:
        case ErrorKind::ZeroSupport:
        case ErrorKind::DegenerateTruncation:
        case ErrorKind::NoConvergence:
        case ErrorKind::MultichainDetected:
        case ErrorKind::StateExplosion:
        case ErrorKind::NonLatticeDelta:
        case ErrorKind::IncommensurateSupport:
        case ErrorKind::TooManyServers:
            return true;
        default:
            return false;
    }
}

}  // namespace repcap

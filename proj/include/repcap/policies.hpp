#pragma once

#include "repcap/analytic.hpp"
#include "repcap/distribution.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace repcap {

/// A job currently in service. Servers are 0-based, in launch order, so
/// `servers.front()` runs the original copy.
struct JobView {
    std::uint64_t id = 0;
    std::vector<int> servers;
    std::vector<Time> elapsed;  // per replica, aligned with servers

    Time origin_elapsed() const { return elapsed.front(); }
};

/// What a policy sees when a server is idle.
struct Observation {
    int idle_server = 0;
    std::vector<int> idle_servers;  // ascending, contains idle_server
    bool queue_nonempty = true;
    std::vector<JobView> jobs;
    std::vector<Time> cancel_remaining;  // per server; 0 when not cancelling
    std::span<const ServiceDistribution> laws;
    Time delta = 0.0;

    int num_servers() const { return static_cast<int>(laws.size()); }
    /// Throws InconsistentObservation.
    void validate() const;
};

struct Decision {
    enum class Kind { New, Replicate, Wait };
    Kind kind = Kind::Wait;
    /// New: servers receiving the fresh job, ascending, all idle.
    std::vector<int> servers;
    /// Replicate: the job that gets a copy on the idle server.
    std::uint64_t job = 0;

    static Decision fresh(std::vector<int> servers) { return {Kind::New, std::move(servers), 0}; }
    static Decision replicate(std::uint64_t job) { return {Kind::Replicate, {}, job}; }
    static Decision wait() { return {}; }

    friend bool operator==(const Decision&, const Decision&) = default;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual Decision decide(const Observation& obs) const = 0;
    /// Spec string that parses back to an equivalent policy.
    virtual std::string spec() const = 0;
};

using PolicyInstance = std::shared_ptr<const Policy>;

class NoRep final : public Policy {
public:
    Decision decide(const Observation& obs) const override;
    std::string spec() const override { return "norep"; }
};

class FullRep final : public Policy {
public:
    Decision decide(const Observation& obs) const override;
    std::string spec() const override { return "fullrep"; }
};

class Upfront final : public Policy {
public:
    explicit Upfront(Partition p) : partition_(std::move(p)) {}
    Decision decide(const Observation& obs) const override;
    std::string spec() const override { return "upfront:" + partition_.to_string(); }
    const Partition& partition() const { return partition_; }

private:
    Partition partition_;
};

enum class MaxRateDelta { Include, Exclude };

class MaxRate final : public Policy {
public:
    explicit MaxRate(MaxRateDelta delta_mode = MaxRateDelta::Include) : mode_(delta_mode) {}
    Decision decide(const Observation& obs) const override;
    std::string spec() const override { return mode_ == MaxRateDelta::Include ? "maxrate" : "maxrate:exclude-delta"; }
    MaxRateDelta delta_mode() const { return mode_; }

private:
    MaxRateDelta mode_;
};

/// Thresholds on the elapsed service time of a job's original copy.
struct AdaRepThresholds {
    /// Heterogeneous table keyed by (servers already running the job, target).
    /// A single-element history doubles as the origin->target pair and is the
    /// fallback for longer histories with the same origin.
    std::map<std::pair<std::vector<int>, int>, Time> table;
    /// Homogeneous list: the i-th additional copy needs elapsed >= tau[i-1].
    std::optional<std::vector<Time>> homogeneous;

    /// Threshold for adding `target` to a job running on `history`; inf when absent.
    Time lookup(std::span<const int> history, int target) const;
};

class AdaRep final : public Policy {
public:
    explicit AdaRep(AdaRepThresholds t);
    Decision decide(const Observation& obs) const override;
    std::string spec() const override;
    const AdaRepThresholds& thresholds() const { return t_; }

private:
    AdaRepThresholds t_;
};

/// Sum over jobs present after `action` of 1 / E[time to departure], with
/// no further replication. `Wait` evaluates the current jobs only.
double instantaneous_rate(const Observation& obs, const Decision& action,
                          MaxRateDelta delta_mode = MaxRateDelta::Include);

/// `norep`, `fullrep`, `upfront:[[1,2],[3]]`, `maxrate`, `maxrate:exclude-delta`,
/// `adarep:{1->2:inf, 2->1:1.0}`, `adarep:{1,3->2:0.5}`, `adarep-hom:[0.1,0.2]`.
/// Server indices in text are 1-based. Throws ConfigError.
PolicyInstance parse_policy(std::string_view text, int num_servers);

}  // namespace repcap

#pragma once

#include "repcap/distribution.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace repcap {

/// Servers are 0-based here; text forms print them 1-based.
struct Partition {
    std::vector<std::vector<int>> groups;

    /// Throws InvalidPartition unless the groups are disjoint, nonempty and cover 0..k-1.
    void validate(int k) const;
    /// `[[1,2],[3]]`
    std::string to_string() const;
    static Partition singletons(int k);
    static Partition full(int k);
    /// Groups from a restricted-growth string (rgs[i] = group of server i).
    static Partition from_growth_string(std::span<const int> rgs);
};

struct ThroughputReport {
    double value = 0.0;
    std::vector<double> components;
};

ThroughputReport throughput_norep(std::span<const ServiceDistribution> ds);
ThroughputReport throughput_fullrep(std::span<const ServiceDistribution> ds, Time delta);
ThroughputReport throughput_upfront(const Partition& p, std::span<const ServiceDistribution> ds, Time delta);

/// Number of set partitions of k elements.
std::uint64_t bell_number(int k);

inline constexpr std::uint64_t kMaxEnumeratedPartitions = 5'000'000;

struct BestPartition {
    Partition partition;
    ThroughputReport report;
    std::uint64_t enumerated = 0;
};

/// Exhaustive search over set partitions. Ties go to fewer groups, then the
/// lexicographically smallest growth string. Throws TooManyServers when the
/// Bell number exceeds kMaxEnumeratedPartitions.
BestPartition best_partition(std::span<const ServiceDistribution> ds, Time delta);

struct HomogeneousR {
    int r = 1;
    double bound = 0.0;
    /// The bound is attained by upfront groups of size r only when r divides k.
    bool attainable = false;
    std::vector<double> cost;  // cost[r-1] = r * (E[X_{1:r}] + delta), inf when undefined
};

HomogeneousR best_homogeneous_r(const ServiceDistribution& d, Time delta, int k);

}  // namespace repcap

#pragma once

#include "repcap/distribution.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace repcap {

/// Replication thresholds for two servers; kInfinity means never.
struct ThresholdPair {
    Time t_1to2 = kInfinity;
    Time t_2to1 = kInfinity;
};

struct BoundReport {
    double bound = 0.0;
    /// Pause bound: {t_1to2, t_2to1}. Homogeneous bound: start times t_2..t_K.
    std::vector<Time> argument;
    double stderr = 0.0;
    /// Homogeneous bound only: the minimised expected computing time.
    double cost = 0.0;
    std::uint64_t evaluations = 0;
};

/// Throughput of the two-server pause-and-replicate system under threshold pair `t`.
double adarep_pause_throughput(std::span<const ServiceDistribution> ds, Time delta, ThresholdPair t);

/// Same system with t_1to2 = inf, written through the effective service time
/// of server-2 jobs.
double one_sided_pause_throughput(std::span<const ServiceDistribution> ds, Time delta, Time t_2to1);

/// Candidate thresholds for one server: 0, its atoms, the 5%..95% quantiles, inf.
std::vector<Time> threshold_grid(const ServiceDistribution& d);

/// Grid search over both thresholds with local refinement around the
/// incumbent. Ties prefer larger thresholds.
BoundReport optimize_pause_bound(std::span<const ServiceDistribution> ds, Time delta);
BoundReport optimize_pause_bound(std::span<const ServiceDistribution> ds, Time delta,
                                 const std::vector<Time>& grid_1, const std::vector<Time>& grid_2);

/// How the cancellation term of the homogeneous cost is charged.
enum class DeltaCharging {
    /// Every server that started the job, the original copy included, once
    /// any replica has started.
    AsPrinted,
    /// Replica servers only.
    ReplicasOnly,
};

struct CostEstimate {
    double mean = 0.0;
    double stderr = 0.0;
};

/// Common-random-number sample of service times, n_paths rows of K draws.
class PathSample {
public:
    PathSample(const ServiceDistribution& d, int k, std::uint64_t n_paths, std::uint64_t seed);
    int k() const { return k_; }
    std::uint64_t n_paths() const { return n_; }
    const double* row(std::uint64_t i) const { return draws_.data() + i * static_cast<std::uint64_t>(k_); }

private:
    int k_;
    std::uint64_t n_;
    std::vector<double> draws_;
};

/// Expected computing time of one job whose K copies start at 0, t_2, ..., t_K.
/// `starts` holds t_2..t_K (nondecreasing, entries may be inf).
/// Without `paths` the value is computed exactly from the survival product of
/// S; otherwise it is the sample mean over the paths.
CostEstimate homogeneous_cost(const ServiceDistribution& d, Time delta, std::span<const Time> starts,
                              const PathSample* paths = nullptr, DeltaCharging charging = DeltaCharging::AsPrinted);

struct MinimizerConfig {
    /// Monte-Carlo paths; 0 selects the exact estimator.
    std::uint64_t n_paths = 0;
    std::uint64_t seed = 1;
    int log_points = 16;
    int max_sweeps = 50;
    double rel_tol = 1e-5;
    DeltaCharging charging = DeltaCharging::AsPrinted;
    /// Extra candidate start times added to the grid.
    std::vector<Time> extra_grid;
};

/// K / min over start-time vectors of the expected computing time, by
/// coordinate descent from every r-copies-upfront corner.
BoundReport homogeneous_bound(const ServiceDistribution& d, Time delta, int k, const MinimizerConfig& config = {});

/// Candidate start times used by homogeneous_bound.
std::vector<Time> start_time_grid(const ServiceDistribution& d, int log_points);

}  // namespace repcap

#pragma once

#include "repcap/distribution.hpp"
#include "repcap/policies.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace repcap {

struct SystemConfig {
    std::vector<ServiceDistribution> servers;
    Time delta = 0.0;

    int num_servers() const { return static_cast<int>(servers.size()); }
};

struct RunResult {
    std::string policy;
    std::uint64_t seed = 0;
    double lambda = 0.0;  // 0 in saturated mode
    std::uint64_t n_jobs = 0;
    std::uint64_t n_runs = 1;

    // Saturated mode, after warm-up.
    std::uint64_t counted_jobs = 0;
    Time horizon = 0.0;
    double throughput = 0.0;
    double throughput_stderr = 0.0;
    double mean_computing_time = 0.0;
    double computing_time_stderr = 0.0;
    /// Server-time consumed per unit time; equals K for work-conserving policies.
    double work_rate = 0.0;
    double work_rate_stderr = 0.0;
    /// Total time servers sat idle between becoming free and receiving work.
    Time idle_time = 0.0;

    // Poisson mode.
    double mean_response = std::numeric_limits<double>::quiet_NaN();
    double response_stderr = std::numeric_limits<double>::quiet_NaN();
    /// Departure rate while jobs were waiting, pooled over runs.
    double busy_departure_rate = std::numeric_limits<double>::quiet_NaN();
    bool unstable = false;
};

struct TraceEvent {
    Time time;
    std::string event;  // arrival | start | depart | cancel | cancel_end
    std::uint64_t job;
    int server;  // 1-based; 0 when not tied to a server
    std::string detail;
};

inline constexpr int kSaturatedBatches = 50;

/// Saturated central queue. The first 1% of departures is warm-up.
RunResult run_saturated(const SystemConfig& config, const PolicyInstance& policy, std::uint64_t n_jobs,
                        std::uint64_t seed);

/// Poisson arrivals; `n_runs` independent runs of `n_jobs` arrivals each,
/// every run continuing until all of its jobs have departed.
RunResult run_poisson(const SystemConfig& config, const PolicyInstance& policy, double lambda, std::uint64_t n_jobs,
                      std::uint64_t n_runs, std::uint64_t seed);

/// Saturated run up to time `horizon`, logging every event.
std::vector<TraceEvent> event_trace(const SystemConfig& config, const PolicyInstance& policy, Time horizon,
                                    std::uint64_t seed);

/// `time,event,job_id,server,detail` with a header row.
std::string trace_to_csv(const std::vector<TraceEvent>& trace);

/// Uniform on (0, 1] for the service draw of `job` on `server`. Shared by all
/// policies so that runs with the same seed see the same service times.
double service_uniform(std::uint64_t seed, std::uint64_t run, std::uint64_t job, int server);

}  // namespace repcap

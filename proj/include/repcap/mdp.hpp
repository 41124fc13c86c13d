#pragma once

#include "repcap/distribution.hpp"
#include "repcap/policies.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace repcap {

/// Snapshot of the saturated system on the service-time lattice. Times are
/// integer multiples of the kernel's unit.
struct MdpState {
    static constexpr int kIdle = -1;
    static constexpr int kCancelling = -2;

    /// Per server: job label (0, 1, ... by lowest server), kIdle or kCancelling.
    std::vector<int> job;
    /// Per server: elapsed service of its replica in units; 0 unless busy.
    std::vector<int> elapsed;
    /// Per server: remaining cancellation window in units; 0 unless cancelling.
    std::vector<int> cancel;
    /// Departures still to be credited after a simultaneous completion.
    int pending = 0;

    friend bool operator<(const MdpState& a, const MdpState& b) {
        return std::tie(a.job, a.elapsed, a.cancel, a.pending) < std::tie(b.job, b.elapsed, b.cancel, b.pending);
    }
    friend bool operator==(const MdpState&, const MdpState&) = default;

    int num_jobs() const;
    /// Lowest idle server, or -1.
    int first_idle() const;
    /// Relabels jobs in order of their lowest server.
    void canonicalize();
};

struct Transition {
    std::uint32_t next;
    double prob;
    double cost;        // server-time, K times the elapsed time
    double departures;  // 0 or 1
};

struct MdpAction {
    enum class Kind { Null, New, Rep };
    Kind kind = Kind::Null;
    /// Rep: lowest server (0-based) of the job receiving the copy.
    int target = -1;
    std::vector<Transition> outcomes;

    /// `null`, `new`, `rep:<server>` with a 1-based server.
    std::string to_string() const;
};

struct TransitionKernel {
    int k = 0;
    Time unit = 1.0;
    int delta_units = 0;
    std::vector<MdpState> states;
    std::vector<std::vector<MdpAction>> actions;
    std::uint32_t initial = 0;  // all servers idle

    std::size_t size() const { return states.size(); }
    /// e.g. `B={1}{2 3};t=(0 1 1);c=(0 0 0);D=0`
    std::string key(std::uint32_t s) const;
};

inline constexpr std::size_t kDefaultStateCap = 1'000'000;

/// Breadth-first construction from the all-idle state. Every law must have
/// finite support and the cancellation delay must sit on the common lattice.
/// Throws StateExplosion, NonLatticeDelta, IncommensurateSupport, InvalidDistribution.
TransitionKernel build_mdp(std::span<const ServiceDistribution> ds, Time delta,
                           std::size_t state_cap = kDefaultStateCap);

/// Largest u such that every atom is an integer multiple of u.
Time lattice_unit(std::span<const ServiceDistribution> ds);

struct MdpSolution {
    std::vector<int> policy;  // action index per state
    double gain = 0.0;        // server-time per departure
    double throughput = 0.0;  // k / gain
    int outer_iterations = 0;
    long inner_iterations = 0;
};

/// Minimises long-run server-time per departure. Each outer step solves an
/// average-cost problem for costs c - g d by relative value iteration and
/// updates g to the ratio attained by the greedy policy.
/// Throws NoConvergence or MultichainDetected.
MdpSolution solve_average_cost(const TransitionKernel& kernel, double tol = 1e-9, long max_iters = 1'000'000);

/// Long-run server-time per departure of a fixed stationary policy, from the
/// all-idle state. Throws MultichainDetected if more than one closed class is reachable.
double evaluate_policy(const TransitionKernel& kernel, std::span<const int> policy);

/// Action indices chosen by `policy` in every decision state. Throws
/// PolicyError if the policy would leave a server idle.
std::vector<int> policy_actions(const TransitionKernel& kernel, std::span<const ServiceDistribution> ds,
                                Time delta, const Policy& policy);

/// The policy's view of a decision state. Job ids follow launch order: the
/// oldest copy first, ties to the lower server.
Observation observation_of(const TransitionKernel& kernel, std::uint32_t s, std::span<const ServiceDistribution> ds,
                           Time delta);

/// `# unit=<u>` then `state,action` rows for decision states.
std::string policy_to_csv(const TransitionKernel& kernel, std::span<const int> policy);

/// Policy table replayed by the simulator. The state key is rebuilt from the
/// observation on the same lattice.
class TabularPolicy final : public Policy {
public:
    TabularPolicy(int k, Time unit, std::map<std::string, std::string> table);
    static TabularPolicy from_csv(std::string_view csv, int k);

    Decision decide(const Observation& obs) const override;
    std::string spec() const override { return "tabular"; }
    std::size_t size() const { return table_.size(); }

private:
    int k_;
    Time unit_;
    std::map<std::string, std::string> table_;
};

/// Key of the state the observation corresponds to.
std::string state_key_of(const Observation& obs, Time unit);

}  // namespace repcap

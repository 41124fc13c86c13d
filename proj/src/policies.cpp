#include "repcap/policies.hpp"

#include "cursor.hpp"
#include "repcap/error.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace repcap {

void Observation::validate() const {
    const int k = num_servers();
    auto bad = [](const std::string& what) { throw Error(ErrorKind::InconsistentObservation, what); };
    if (k == 0) bad("no servers");
    if (idle_server < 0 || idle_server >= k) bad("idle server out of range");
    if (!std::is_sorted(idle_servers.begin(), idle_servers.end()) ||
        std::find(idle_servers.begin(), idle_servers.end(), idle_server) == idle_servers.end())
        bad("idle set must be ascending and contain the idle server");
    std::vector<int> owner(static_cast<std::size_t>(k), 0);
    for (const auto& j : jobs) {
        if (j.servers.empty() || j.servers.size() != j.elapsed.size()) bad(fmt::format("job {} has malformed replicas", j.id));
        for (std::size_t r = 0; r < j.servers.size(); ++r) {
            const int s = j.servers[r];
            if (s < 0 || s >= k) bad(fmt::format("job {} on unknown server", j.id));
            if (owner[static_cast<std::size_t>(s)]++) bad(fmt::format("server {} hosts two replicas", s + 1));
            if (!(j.elapsed[r] >= 0.0)) bad(fmt::format("job {} has negative elapsed time", j.id));
        }
    }
    for (int s : idle_servers)
        if (s < 0 || s >= k || owner[static_cast<std::size_t>(s)]) bad(fmt::format("idle server {} is busy", s + 1));
    if (!cancel_remaining.empty() && cancel_remaining.size() != static_cast<std::size_t>(k)) bad("cancel vector size");
}

Decision NoRep::decide(const Observation& obs) const {
    return obs.queue_nonempty ? Decision::fresh({obs.idle_server}) : Decision::wait();
}

Decision FullRep::decide(const Observation& obs) const {
    if (!obs.queue_nonempty || static_cast<int>(obs.idle_servers.size()) != obs.num_servers()) return Decision::wait();
    return Decision::fresh(obs.idle_servers);
}

Decision Upfront::decide(const Observation& obs) const {
    if (!obs.queue_nonempty) return Decision::wait();
    for (const auto& g : partition_.groups) {
        if (std::find(g.begin(), g.end(), obs.idle_server) == g.end()) continue;
        for (int s : g)
            if (!std::binary_search(obs.idle_servers.begin(), obs.idle_servers.end(), s)) return Decision::wait();
        auto servers = g;
        std::sort(servers.begin(), servers.end());
        return Decision::fresh(std::move(servers));
    }
    throw Error(ErrorKind::InconsistentObservation, fmt::format("server {} not in the partition", obs.idle_server + 1));
}

namespace {

// Expected time to departure of a job on `servers` at `elapsed`, no further copies.
double time_to_departure(const Observation& obs, std::span<const int> servers, std::span<const Time> elapsed,
                         MaxRateDelta mode) {
    std::vector<ResidualDistribution> rs;
    rs.reserve(servers.size());
    for (std::size_t r = 0; r < servers.size(); ++r)
        rs.emplace_back(obs.laws[static_cast<std::size_t>(servers[r])], elapsed[r]);
    double d = min_expectation(rs);
    if (servers.size() >= 2 && mode == MaxRateDelta::Include) d += obs.delta;
    return d;
}

double job_rate(const Observation& obs, const JobView& j, MaxRateDelta mode) {
    return 1.0 / time_to_departure(obs, j.servers, j.elapsed, mode);
}

double rate_with_copy(const Observation& obs, const JobView& j, MaxRateDelta mode) {
    auto servers = j.servers;
    auto elapsed = j.elapsed;
    servers.push_back(obs.idle_server);
    elapsed.push_back(0.0);
    return 1.0 / time_to_departure(obs, servers, elapsed, mode);
}

const JobView& find_job(const Observation& obs, std::uint64_t id) {
    for (const auto& j : obs.jobs)
        if (j.id == id) return j;
    throw Error(ErrorKind::InconsistentObservation, fmt::format("no job {}", id));
}

// Oldest first, then smallest id.
bool older(const JobView& a, const JobView& b) {
    if (a.origin_elapsed() != b.origin_elapsed()) return a.origin_elapsed() > b.origin_elapsed();
    return a.id < b.id;
}

}  // namespace

double instantaneous_rate(const Observation& obs, const Decision& action, MaxRateDelta mode) {
    double total = 0.0;
    for (const auto& j : obs.jobs)
        total += action.kind == Decision::Kind::Replicate && action.job == j.id ? rate_with_copy(obs, j, mode)
                                                                                 : job_rate(obs, j, mode);
    if (action.kind == Decision::Kind::Replicate) (void)find_job(obs, action.job);
    if (action.kind == Decision::Kind::New && !action.servers.empty()) {
        const std::vector<Time> zero(action.servers.size(), 0.0);
        total += 1.0 / time_to_departure(obs, action.servers, zero, mode);
    }
    return total;
}

Decision MaxRate::decide(const Observation& obs) const {
    // Only the affected job changes the sum, so compare increments.
    Decision best = obs.queue_nonempty ? Decision::fresh({obs.idle_server}) : Decision::wait();
    double best_gain = obs.queue_nonempty ? 1.0 / obs.laws[static_cast<std::size_t>(obs.idle_server)].mean() : 0.0;

    std::vector<const JobView*> order;
    for (const auto& j : obs.jobs) order.push_back(&j);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return older(*a, *b); });
    for (const auto* j : order) {
        const double gain = rate_with_copy(obs, *j, mode_) - job_rate(obs, *j, mode_);
        if (gain > best_gain + 1e-9 * std::max(1.0, std::abs(best_gain))) {
            best_gain = gain;
            best = Decision::replicate(j->id);
        }
    }
    return best;
}

Time AdaRepThresholds::lookup(std::span<const int> history, int target) const {
    if (homogeneous) {
        const auto n = history.size();
        return n - 1 < homogeneous->size() ? (*homogeneous)[n - 1] : kInfinity;
    }
    std::vector<int> key(history.begin(), history.end());
    if (auto it = table.find({key, target}); it != table.end()) return it->second;
    if (auto it = table.find({{history.front()}, target}); it != table.end()) return it->second;
    return kInfinity;
}

AdaRep::AdaRep(AdaRepThresholds t) : t_(std::move(t)) {
    if (t_.homogeneous) {
        const auto& h = *t_.homogeneous;
        if (!std::is_sorted(h.begin(), h.end())) throw Error(ErrorKind::ConfigError, "homogeneous thresholds must be nondecreasing");
        for (Time x : h)
            if (!(x >= 0.0)) throw Error(ErrorKind::ConfigError, "thresholds must be >= 0");
    }
    for (const auto& [key, x] : t_.table)
        if (!(x >= 0.0)) throw Error(ErrorKind::ConfigError, "thresholds must be >= 0");
}

Decision AdaRep::decide(const Observation& obs) const {
    const JobView* pick = nullptr;
    for (const auto& j : obs.jobs) {
        // An empty queue leaves nothing else for the idle server, so any job qualifies.
        const bool eligible = !obs.queue_nonempty || j.origin_elapsed() >= t_.lookup(j.servers, obs.idle_server);
        if (eligible && (!pick || older(j, *pick))) pick = &j;
    }
    if (pick) return Decision::replicate(pick->id);
    return obs.queue_nonempty ? Decision::fresh({obs.idle_server}) : Decision::wait();
}

namespace {

std::string time_text(Time t) { return is_infinite(t) ? "inf" : fmt::format("{}", t); }

}  // namespace

std::string AdaRep::spec() const {
    if (t_.homogeneous) {
        std::string out = "adarep-hom:[";
        for (std::size_t i = 0; i < t_.homogeneous->size(); ++i) out += (i ? "," : "") + time_text((*t_.homogeneous)[i]);
        return out + "]";
    }
    std::string out = "adarep:{";
    bool first = true;
    for (const auto& [key, x] : t_.table) {
        if (!first) out += ", ";
        first = false;
        for (std::size_t i = 0; i < key.first.size(); ++i) out += (i ? "," : "") + std::to_string(key.first[i] + 1);
        out += "->" + std::to_string(key.second + 1) + ":" + time_text(x);
    }
    return out + "}";
}

namespace {

int read_server(detail::Cursor& c, int k) {
    const double v = c.expression();
    if (v != static_cast<int>(v) || v < 1 || v > k) c.fail(fmt::format("server index must be in 1..{}", k));
    return static_cast<int>(v) - 1;
}

}  // namespace

PolicyInstance parse_policy(std::string_view text, int k) {
    detail::Cursor c(text);
    const std::string name = c.identifier();
    PolicyInstance out;
    if (name == "norep") {
        out = std::make_shared<NoRep>();
    } else if (name == "fullrep") {
        out = std::make_shared<FullRep>();
    } else if (name == "maxrate") {
        auto mode = MaxRateDelta::Include;
        if (c.accept(':')) {
            const auto opt = c.identifier();
            if (opt == "exclude-delta") mode = MaxRateDelta::Exclude;
            else if (opt != "include-delta") c.fail("expected include-delta or exclude-delta");
        }
        out = std::make_shared<MaxRate>(mode);
    } else if (name == "upfront") {
        c.expect(':');
        c.expect('[');
        Partition p;
        do {
            c.expect('[');
            p.groups.emplace_back();
            do p.groups.back().push_back(read_server(c, k));
            while (c.accept(','));
            c.expect(']');
        } while (c.accept(','));
        c.expect(']');
        try {
            p.validate(k);
        } catch (const Error& e) {
            c.fail(e.what());
        }
        out = std::make_shared<Upfront>(std::move(p));
    } else if (name == "adarep") {
        c.expect(':');
        c.expect('{');
        AdaRepThresholds t;
        if (!c.accept('}')) {
            do {
                std::vector<int> history;
                do history.push_back(read_server(c, k));
                while (c.accept(','));
                if (!c.accept("->")) c.fail("expected '->'");
                const int target = read_server(c, k);
                if (std::find(history.begin(), history.end(), target) != history.end()) c.fail("target already in history");
                c.expect(':');
                t.table[{history, target}] = c.expression();
            } while (c.accept(','));
            c.expect('}');
        }
        out = std::make_shared<AdaRep>(std::move(t));
    } else if (name == "adarep-hom") {
        c.expect(':');
        c.expect('[');
        AdaRepThresholds t;
        t.homogeneous.emplace();
        if (!c.accept(']')) {
            do t.homogeneous->push_back(c.expression());
            while (c.accept(','));
            c.expect(']');
        }
        out = std::make_shared<AdaRep>(std::move(t));
    } else {
        c.fail("unknown policy '" + name + "'");
    }
    if (!c.at_end()) c.fail("trailing characters");
    return out;
}

}  // namespace repcap

#include "repcap/engine.hpp"

#include "repcap/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <queue>
#include <random>
#include <tuple>

namespace repcap {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

double service_uniform(std::uint64_t seed, std::uint64_t run, std::uint64_t job, int server) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ run);
    h = splitmix64(h ^ job);
    h = splitmix64(h ^ static_cast<std::uint64_t>(server));
    return (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;
}

namespace {

enum class EventKind { Departure, CancelEnd, Arrival };

struct Event {
    Time time;
    EventKind kind;
    std::uint64_t job;
    int server;

    bool operator>(const Event& o) const {
        return std::tie(time, kind, job, server) > std::tie(o.time, o.kind, o.job, o.server);
    }
};

struct Replica {
    int server;
    Time start;
};

struct Job {
    Time arrival = 0.0;
    std::vector<Replica> replicas;
};

struct Server {
    enum class Status { Idle, Busy, Cancelling } status = Status::Idle;
    Time cancel_until = 0.0;
    Time idle_since = 0.0;
};

struct Departure {
    Time time;
    double computing_time;
    Time response;
};

class Simulator {
public:
    Simulator(const SystemConfig& config, const PolicyInstance& policy, std::uint64_t seed, std::uint64_t run,
              bool saturated, std::vector<TraceEvent>* trace)
        : config_(config),
          policy_(policy),
          seed_(seed),
          run_(run),
          saturated_(saturated),
          trace_(trace),
          servers_(config.servers.size()) {
        if (config.servers.empty()) throw Error(ErrorKind::ConfigError, "no servers");
        if (!(config.delta >= 0.0)) throw Error(ErrorKind::ConfigError, "cancellation delay must be >= 0");
    }

    /// Saturated: run until `max_departures` or until time passes `horizon`.
    void run_saturated(std::uint64_t max_departures, Time horizon) {
        assign(0.0);
        while (departures_.size() < max_departures) {
            if (events_.empty()) throw Error(ErrorKind::PolicyError, "policy left every server idle");
            if (events_.top().time > horizon) break;
            step();
        }
    }

    void run_poisson(double lambda, std::uint64_t n_jobs) {
        std::seed_seq sq{seed_, run_, std::uint64_t{0x5eed}};
        std::mt19937_64 g(sq);
        std::exponential_distribution<double> gap(lambda);
        Time t = 0.0;
        // Arrivals are generated lazily, one ahead.
        auto schedule = [&] {
            if (arrivals_scheduled_ >= n_jobs) return;
            t += gap(g);
            events_.push({t, EventKind::Arrival, ++arrivals_scheduled_, 0});
        };
        schedule();
        next_arrival_ = schedule;
        while (departures_.size() < n_jobs) {
            if (events_.empty()) throw Error(ErrorKind::PolicyError, "jobs left waiting with nothing in service");
            step();
        }
    }

    const std::vector<Departure>& departures() const { return departures_; }
    Time idle_time() const { return idle_time_; }
    Time busy_time() const { return busy_time_; }
    std::uint64_t busy_departures() const { return busy_departures_; }

private:
    void step() {
        const Time now = events_.top().time;
        if (!queue_.empty()) busy_time_ += now - last_time_;
        const bool waiting = !queue_.empty();
        last_time_ = now;
        while (!events_.empty() && events_.top().time == now) {
            const Event e = events_.top();
            events_.pop();
            switch (e.kind) {
                case EventKind::Departure:
                    if (depart(e, now) && waiting) ++busy_departures_;
                    break;
                case EventKind::CancelEnd: {
                    auto& s = servers_[static_cast<std::size_t>(e.server)];
                    s.status = Server::Status::Idle;
                    s.idle_since = now;
                    log(now, "cancel_end", e.job, e.server, "");
                    break;
                }
                case EventKind::Arrival:
                    queue_.push_back({e.job, now});
                    log(now, "arrival", e.job, -1, "");
                    next_arrival_();
                    break;
            }
        }
        assign(now);
    }

    bool depart(const Event& e, Time now) {
        auto it = active_.find(e.job);
        if (it == active_.end()) return false;  // a sibling finished first
        const Job& job = it->second;
        const auto n = job.replicas.size();
        double c = 0.0;
        for (const auto& r : job.replicas) c += now - r.start;
        const bool cancel = n >= 2;
        if (cancel) c += static_cast<double>(n) * config_.delta;
        log(now, "depart", e.job, e.server, fmt::format("C={}", c));
        for (const auto& r : job.replicas) {
            auto& s = servers_[static_cast<std::size_t>(r.server)];
            if (cancel && config_.delta > 0.0) {
                s.status = Server::Status::Cancelling;
                s.cancel_until = now + config_.delta;
                events_.push({s.cancel_until, EventKind::CancelEnd, e.job, r.server});
                log(now, "cancel", e.job, r.server, fmt::format("until={}", s.cancel_until));
            } else {
                s.status = Server::Status::Idle;
                s.idle_since = now;
            }
        }
        departures_.push_back({now, c, now - job.arrival});
        active_.erase(it);
        return true;
    }

    Observation observe(int idle, Time now) const {
        Observation obs;
        obs.idle_server = idle;
        obs.queue_nonempty = saturated_ || !queue_.empty();
        obs.laws = config_.servers;
        obs.delta = config_.delta;
        obs.cancel_remaining.assign(servers_.size(), 0.0);
        for (std::size_t s = 0; s < servers_.size(); ++s) {
            if (servers_[s].status == Server::Status::Idle) obs.idle_servers.push_back(static_cast<int>(s));
            if (servers_[s].status == Server::Status::Cancelling) obs.cancel_remaining[s] = servers_[s].cancel_until - now;
        }
        for (const auto& [id, job] : active_) {
            JobView v;
            v.id = id;
            for (const auto& r : job.replicas) {
                v.servers.push_back(r.server);
                v.elapsed.push_back(now - r.start);
            }
            obs.jobs.push_back(std::move(v));
        }
        return obs;
    }

    void launch(std::uint64_t id, int server, Time now, const char* how) {
        auto& s = servers_[static_cast<std::size_t>(server)];
        idle_time_ += now - s.idle_since;
        s.status = Server::Status::Busy;
        active_[id].replicas.push_back({server, now});
        const double u = service_uniform(seed_, run_, id, server);
        const Time x = config_.servers[static_cast<std::size_t>(server)].tail_quantile(u);
        events_.push({now + x, EventKind::Departure, id, server});
        log(now, "start", id, server, how);
    }

    bool is_idle(int s) const { return servers_[static_cast<std::size_t>(s)].status == Server::Status::Idle; }

    // Offers idle servers to the policy in ascending order until nothing changes.
    void assign(Time now) {
        const int k = static_cast<int>(servers_.size());
        for (bool changed = true; changed;) {
            changed = false;
            for (int s = 0; s < k && !changed; ++s) {
                if (!is_idle(s)) continue;
                const Decision d = policy_->decide(observe(s, now));
                switch (d.kind) {
                    case Decision::Kind::Wait:
                        break;
                    case Decision::Kind::New: {
                        if (d.servers.empty() || std::find(d.servers.begin(), d.servers.end(), s) == d.servers.end())
                            throw Error(ErrorKind::PolicyError, "new job must use the offered server");
                        for (int t : d.servers)
                            if (t < 0 || t >= k || !is_idle(t))
                                throw Error(ErrorKind::PolicyError, fmt::format("server {} is not idle", t + 1));
                        std::uint64_t id;
                        if (saturated_) {
                            id = ++next_job_;
                            active_[id].arrival = now;
                        } else {
                            if (queue_.empty()) throw Error(ErrorKind::PolicyError, "new job requested from an empty queue");
                            id = queue_.front().first;
                            active_[id].arrival = queue_.front().second;
                            queue_.pop_front();
                        }
                        bool first = true;
                        for (int t : d.servers) {
                            launch(id, t, now, first ? "new" : "rep");
                            first = false;
                        }
                        changed = true;
                        break;
                    }
                    case Decision::Kind::Replicate: {
                        if (!active_.count(d.job))
                            throw Error(ErrorKind::PolicyError, fmt::format("job {} has no active copies", d.job));
                        launch(d.job, s, now, "rep");
                        changed = true;
                        break;
                    }
                }
            }
        }
    }

    void log(Time t, const char* event, std::uint64_t job, int server, std::string detail) {
        if (trace_) trace_->push_back({t, event, job, server + 1, std::move(detail)});
    }

    const SystemConfig& config_;
    const PolicyInstance& policy_;
    std::uint64_t seed_;
    std::uint64_t run_;
    bool saturated_;
    std::vector<TraceEvent>* trace_;

    std::vector<Server> servers_;
    std::map<std::uint64_t, Job> active_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
    std::deque<std::pair<std::uint64_t, Time>> queue_;
    std::vector<Departure> departures_;
    std::uint64_t next_job_ = 0;
    std::uint64_t arrivals_scheduled_ = 0;
    std::function<void()> next_arrival_ = [] {};
    Time idle_time_ = 0.0;
    Time last_time_ = 0.0;
    Time busy_time_ = 0.0;
    std::uint64_t busy_departures_ = 0;
};

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe r;
    if (xs.empty()) return r;
    for (double x : xs) r.mean += x;
    r.mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return r;
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
    return r;
}

}  // namespace

RunResult run_saturated(const SystemConfig& config, const PolicyInstance& policy, std::uint64_t n_jobs,
                        std::uint64_t seed) {
    if (n_jobs < 1) throw Error(ErrorKind::ConfigError, "need at least one job");
    Simulator sim(config, policy, seed, 0, true, nullptr);
    sim.run_saturated(n_jobs, kInfinity);
    const auto& d = sim.departures();

    RunResult r;
    r.policy = policy->spec();
    r.seed = seed;
    r.n_jobs = n_jobs;
    r.idle_time = sim.idle_time();

    const std::size_t warm = n_jobs >= 100 ? n_jobs / 100 : 0;
    const Time t0 = warm ? d[warm - 1].time : 0.0;
    const std::size_t counted = d.size() - warm;
    r.counted_jobs = counted;
    r.horizon = d.back().time - t0;
    double total_c = 0.0;
    for (std::size_t i = warm; i < d.size(); ++i) total_c += d[i].computing_time;
    r.throughput = static_cast<double>(counted) / r.horizon;
    r.mean_computing_time = total_c / static_cast<double>(counted);
    r.work_rate = total_c / r.horizon;

    // Batch means over consecutive departures.
    const std::size_t batches = std::min<std::size_t>(kSaturatedBatches, counted / 2);
    if (batches >= 2) {
        std::vector<double> thr, cbar, work;
        Time start = t0;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t lo = warm + b * counted / batches;
            const std::size_t hi = warm + (b + 1) * counted / batches;
            const Time end = d[hi - 1].time;
            double c = 0.0;
            for (std::size_t i = lo; i < hi; ++i) c += d[i].computing_time;
            const double m = static_cast<double>(hi - lo);
            if (end > start) {
                thr.push_back(m / (end - start));
                work.push_back(c / (end - start));
            }
            cbar.push_back(c / m);
            start = end;
        }
        r.throughput_stderr = mean_se(thr).se;
        r.computing_time_stderr = mean_se(cbar).se;
        r.work_rate_stderr = mean_se(work).se;
    }
    return r;
}

RunResult run_poisson(const SystemConfig& config, const PolicyInstance& policy, double lambda, std::uint64_t n_jobs,
                      std::uint64_t n_runs, std::uint64_t seed) {
    if (!(lambda > 0.0)) throw Error(ErrorKind::ConfigError, "arrival rate must be positive");
    if (n_jobs < 1 || n_runs < 1) throw Error(ErrorKind::ConfigError, "need at least one job and one run");
    RunResult r;
    r.policy = policy->spec();
    r.seed = seed;
    r.lambda = lambda;
    r.n_jobs = n_jobs;
    r.n_runs = n_runs;

    std::vector<double> per_run;
    std::vector<double> all;
    double busy_time = 0.0, busy_departures = 0.0, total_c = 0.0;
    for (std::uint64_t run = 0; run < n_runs; ++run) {
        Simulator sim(config, policy, seed, run, false, nullptr);
        sim.run_poisson(lambda, n_jobs);
        double s = 0.0;
        for (const auto& d : sim.departures()) {
            s += d.response;
            total_c += d.computing_time;
            all.push_back(d.response);
        }
        per_run.push_back(s / static_cast<double>(n_jobs));
        busy_time += sim.busy_time();
        busy_departures += static_cast<double>(sim.busy_departures());
    }
    const auto m = n_runs >= 2 ? mean_se(per_run) : mean_se(all);
    r.mean_response = m.mean;
    r.response_stderr = m.se;
    r.mean_computing_time = total_c / static_cast<double>(n_jobs * n_runs);
    r.busy_departure_rate = busy_time > 0.0 ? busy_departures / busy_time : kInfinity;
    r.unstable = lambda >= r.busy_departure_rate;
    return r;
}

std::vector<TraceEvent> event_trace(const SystemConfig& config, const PolicyInstance& policy, Time horizon,
                                    std::uint64_t seed) {
    std::vector<TraceEvent> trace;
    Simulator sim(config, policy, seed, 0, true, &trace);
    sim.run_saturated(std::numeric_limits<std::uint64_t>::max(), horizon);
    return trace;
}

std::string trace_to_csv(const std::vector<TraceEvent>& trace) {
    std::string out = "time,event,job_id,server,detail\n";
    for (const auto& e : trace) out += fmt::format("{},{},{},{},{}\n", e.time, e.event, e.job, e.server, e.detail);
    return out;
}

}  // namespace repcap

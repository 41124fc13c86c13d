#include "repcap/mdp.hpp"

#include "repcap/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>
#include <sstream>

namespace repcap {

int MdpState::num_jobs() const {
    int n = 0;
    for (int j : job) n = std::max(n, j + 1);
    return n;
}

int MdpState::first_idle() const {
    for (std::size_t s = 0; s < job.size(); ++s)
        if (job[s] == kIdle) return static_cast<int>(s);
    return -1;
}

void MdpState::canonicalize() {
    std::vector<int> relabel(job.size() + 1, -1);
    int next = 0;
    for (int& j : job) {
        if (j < 0) continue;
        auto& r = relabel[static_cast<std::size_t>(j)];
        if (r < 0) r = next++;
        j = r;
    }
}

std::string MdpAction::to_string() const {
    switch (kind) {
        case Kind::Null: return "null";
        case Kind::New: return "new";
        case Kind::Rep: return fmt::format("rep:{}", target + 1);
    }
    return "?";
}

namespace {

std::string make_key(const std::vector<int>& job, const std::vector<long long>& t, const std::vector<long long>& c,
                     int pending) {
    std::string key = "B=";
    std::vector<std::vector<int>> groups;
    std::vector<int> first(job.size() + 1, -1);
    for (std::size_t s = 0; s < job.size(); ++s) {
        if (job[s] < 0) continue;
        auto& f = first[static_cast<std::size_t>(job[s])];
        if (f < 0) {
            f = static_cast<int>(groups.size());
            groups.emplace_back();
        }
        groups[static_cast<std::size_t>(f)].push_back(static_cast<int>(s) + 1);
    }
    for (const auto& g : groups) key += fmt::format("{{{}}}", fmt::join(g, " "));
    key += fmt::format(";t=({});c=({});D={}", fmt::join(t, " "), fmt::join(c, " "), pending);
    return key;
}

// Continued-fraction approximation p/q of v with q <= 10^4.
std::pair<long long, long long> rational(double v) {
    if (!(v > 0.0) || v > 1e9) throw Error(ErrorKind::IncommensurateSupport, fmt::format("atom {} is out of range", v));
    long long h0 = 0, h1 = 1, k0 = 1, k1 = 0;
    double x = v;
    for (int i = 0; i < 64; ++i) {
        const double a = std::floor(x);
        const auto ai = static_cast<long long>(a);
        const long long h2 = ai * h1 + h0, k2 = ai * k1 + k0;
        if (k2 > 10'000) break;
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        if (std::abs(v - static_cast<double>(h1) / static_cast<double>(k1)) <= 1e-10 * std::max(1.0, v)) return {h1, k1};
        const double frac = x - a;
        if (frac < 1e-15) break;
        x = 1.0 / frac;
    }
    throw Error(ErrorKind::IncommensurateSupport, fmt::format("atom {} has no small rational form", v));
}

struct Lattice {
    long long denom = 1;  // common denominator L
    long long step = 1;   // gcd of the scaled atoms
    Time unit() const { return static_cast<double>(step) / static_cast<double>(denom); }
};

std::vector<std::vector<Atom>> atoms_of(std::span<const ServiceDistribution> ds) {
    std::vector<std::vector<Atom>> out;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto a = ds[i].atoms();
        if (!a)
            throw Error(ErrorKind::InvalidDistribution,
                        fmt::format("server {} needs a finite-support service law", i + 1));
        out.push_back(std::move(*a));
    }
    return out;
}

Lattice make_lattice(const std::vector<std::vector<Atom>>& laws) {
    Lattice lat;
    std::vector<double> values;
    for (const auto& l : laws)
        for (const auto& a : l) values.push_back(a.value);
    for (double v : values) {
        const auto [p, q] = rational(v);
        (void)p;
        lat.denom = std::lcm(lat.denom, q);
        if (lat.denom > 1'000'000'000'000LL)
            throw Error(ErrorKind::IncommensurateSupport, "atoms have no common lattice of usable size");
    }
    long long g = 0;
    for (double v : values) {
        const double scaled = v * static_cast<double>(lat.denom);
        if (scaled > 9e15) throw Error(ErrorKind::IncommensurateSupport, "atoms have no common lattice of usable size");
        g = std::gcd(g, std::llround(scaled));
    }
    lat.step = std::max(g, 1LL);
    return lat;
}

struct UnitLaw {
    std::vector<int> value;  // ascending, in lattice units
    std::vector<double> prob;

    double tail(int e) const {
        double p = 0.0;
        for (std::size_t i = 0; i < value.size(); ++i)
            if (value[i] > e) p += prob[i];
        return p;
    }
    int next_after(int e) const {
        for (int v : value)
            if (v > e) return v;
        return -1;
    }
};

class Builder {
public:
    Builder(std::span<const ServiceDistribution> ds, Time delta, std::size_t cap) : cap_(cap) {
        if (ds.empty()) throw Error(ErrorKind::ConfigError, "need at least one server");
        if (!(delta >= 0.0) || !std::isfinite(delta))
            throw Error(ErrorKind::ConfigError, "cancellation delay must be finite and >= 0");
        const auto laws = atoms_of(ds);
        const Lattice lat = make_lattice(laws);
        kernel_.k = static_cast<int>(ds.size());
        kernel_.unit = lat.unit();
        for (const auto& l : laws) {
            UnitLaw u;
            for (const auto& a : l) {
                u.value.push_back(static_cast<int>(
                    std::llround(a.value * static_cast<double>(lat.denom)) / lat.step));
                u.prob.push_back(a.prob);
            }
            laws_.push_back(std::move(u));
        }
        const double d = delta / kernel_.unit;
        const long long du = std::llround(d);
        if (std::abs(d - static_cast<double>(du)) > 1e-6 * std::max(1.0, d))
            throw Error(ErrorKind::NonLatticeDelta,
                        fmt::format("delay {} is not a multiple of the lattice unit {}", delta, kernel_.unit));
        kernel_.delta_units = static_cast<int>(du);
    }

    TransitionKernel run() {
        const auto k = static_cast<std::size_t>(kernel_.k);
        MdpState idle{std::vector<int>(k, MdpState::kIdle), std::vector<int>(k, 0), std::vector<int>(k, 0), 0};
        kernel_.initial = intern(idle);
        for (std::size_t i = 0; i < kernel_.states.size(); ++i) {
            const MdpState s = kernel_.states[i];  // copy: interning grows the vector
            auto acts = expand(s);
            kernel_.actions.push_back(std::move(acts));
        }
        return std::move(kernel_);
    }

private:
    std::uint32_t intern(const MdpState& s) {
        auto [it, added] = index_.try_emplace(s, static_cast<std::uint32_t>(kernel_.states.size()));
        if (added) {
            if (kernel_.states.size() >= cap_)
                throw Error(ErrorKind::StateExplosion, fmt::format("more than {} states", cap_));
            kernel_.states.push_back(s);
        }
        return it->second;
    }

    std::vector<MdpAction> expand(const MdpState& s) {
        std::vector<MdpAction> acts;
        if (s.pending > 0) {
            MdpState n = s;
            --n.pending;
            acts.push_back({MdpAction::Kind::Null, -1, {{intern(n), 1.0, 0.0, 1.0}}});
            return acts;
        }
        const int idle = s.first_idle();
        if (idle >= 0) {
            const auto si = static_cast<std::size_t>(idle);
            MdpState n = s;
            n.job[si] = s.num_jobs();
            n.canonicalize();
            acts.push_back({MdpAction::Kind::New, -1, {{intern(n), 1.0, 0.0, 0.0}}});
            for (int b = 0; b < s.num_jobs(); ++b) {
                MdpState r = s;
                r.job[si] = b;
                r.canonicalize();
                const int lowest = static_cast<int>(std::find(s.job.begin(), s.job.end(), b) - s.job.begin());
                acts.push_back({MdpAction::Kind::Rep, lowest, {{intern(r), 1.0, 0.0, 0.0}}});
            }
            return acts;
        }
        acts.push_back(advance(s));
        return acts;
    }

    // No server is idle: move to the next instant at which a completion or a
    // cancellation end is possible.
    MdpAction advance(const MdpState& s) {
        const std::size_t k = s.job.size();
        int tau = std::numeric_limits<int>::max();
        for (std::size_t i = 0; i < k; ++i) {
            if (s.job[i] >= 0) tau = std::min(tau, laws_[i].next_after(s.elapsed[i]) - s.elapsed[i]);
            if (s.job[i] == MdpState::kCancelling) tau = std::min(tau, s.cancel[i]);
        }
        const int jobs = s.num_jobs();
        std::vector<double> finish(static_cast<std::size_t>(jobs), 1.0);
        std::vector<int> copies(static_cast<std::size_t>(jobs), 0);
        for (std::size_t i = 0; i < k; ++i) {
            if (s.job[i] < 0) continue;
            const auto b = static_cast<std::size_t>(s.job[i]);
            finish[b] *= laws_[i].tail(s.elapsed[i] + tau) / laws_[i].tail(s.elapsed[i]);
            ++copies[b];
        }
        for (double& f : finish) f = std::clamp(1.0 - f, 0.0, 1.0);

        MdpAction act{MdpAction::Kind::Null, -1, {}};
        const double cost = static_cast<double>(k) * tau * kernel_.unit;
        std::map<std::uint32_t, std::size_t> where;
        for (unsigned mask = 0; mask < (1u << jobs); ++mask) {
            double p = 1.0;
            int done = 0;
            for (int b = 0; b < jobs; ++b) {
                const bool fin = mask >> b & 1u;
                p *= fin ? finish[static_cast<std::size_t>(b)] : 1.0 - finish[static_cast<std::size_t>(b)];
                done += fin;
            }
            if (p <= 0.0) continue;
            MdpState n = s;
            for (std::size_t i = 0; i < k; ++i) {
                if (s.job[i] == MdpState::kCancelling) {
                    n.cancel[i] -= tau;
                    if (n.cancel[i] == 0) n.job[i] = MdpState::kIdle;
                } else if (s.job[i] >= 0) {
                    const auto b = static_cast<std::size_t>(s.job[i]);
                    if (mask >> b & 1u) {
                        n.elapsed[i] = 0;
                        if (copies[b] >= 2 && kernel_.delta_units > 0) {
                            n.job[i] = MdpState::kCancelling;
                            n.cancel[i] = kernel_.delta_units;
                        } else {
                            n.job[i] = MdpState::kIdle;
                        }
                    } else {
                        n.elapsed[i] += tau;
                    }
                }
            }
            n.pending = std::max(done - 1, 0);
            n.canonicalize();
            const auto id = intern(n);
            auto [it, added] = where.try_emplace(id, act.outcomes.size());
            if (added)
                act.outcomes.push_back({id, p, cost, done > 0 ? 1.0 : 0.0});
            else
                act.outcomes[it->second].prob += p;
        }
        return act;
    }

    std::size_t cap_;
    TransitionKernel kernel_;
    std::vector<UnitLaw> laws_;
    std::map<MdpState, std::uint32_t> index_;
};

struct Rewards {
    std::vector<std::vector<double>> cost, departures;  // expected, per state and action
};

Rewards rewards_of(const TransitionKernel& kr) {
    Rewards r;
    for (const auto& acts : kr.actions) {
        auto& c = r.cost.emplace_back();
        auto& d = r.departures.emplace_back();
        for (const auto& a : acts) {
            double ec = 0.0, ed = 0.0;
            for (const auto& o : a.outcomes) {
                ec += o.prob * o.cost;
                ed += o.prob * o.departures;
            }
            c.push_back(ec);
            d.push_back(ed);
        }
    }
    return r;
}

constexpr double kLazy = 0.5;  // aperiodicity transform weight

void check_policy(const TransitionKernel& kr, std::span<const int> policy) {
    if (policy.size() != kr.size()) throw Error(ErrorKind::ConfigError, "policy does not cover the state space");
    for (std::size_t s = 0; s < kr.size(); ++s)
        if (policy[s] < 0 || static_cast<std::size_t>(policy[s]) >= kr.actions[s].size())
            throw Error(ErrorKind::ConfigError, fmt::format("invalid action in state {}", kr.key(static_cast<std::uint32_t>(s))));
}

// States reachable from the initial state that lie in the unique closed
// class of the chain induced by `policy`.
std::vector<std::uint32_t> recurrent_class(const TransitionKernel& kr, std::span<const int> policy) {
    const std::size_t n = kr.size();
    auto succ = [&](std::uint32_t s) -> const std::vector<Transition>& {
        return kr.actions[s][static_cast<std::size_t>(policy[s])].outcomes;
    };
    std::vector<char> seen(n, 0);
    std::vector<std::uint32_t> order{kr.initial};
    seen[kr.initial] = 1;
    for (std::size_t i = 0; i < order.size(); ++i)
        for (const auto& t : succ(order[i]))
            if (!seen[t.next]) {
                seen[t.next] = 1;
                order.push_back(t.next);
            }

    // Tarjan, iterative, on the reachable subgraph.
    std::vector<int> idx(n, -1), low(n, 0), comp(n, -1);
    std::vector<char> on(n, 0);
    std::vector<std::uint32_t> stack;
    int counter = 0, ncomp = 0;
    for (std::uint32_t root : order) {
        if (idx[root] >= 0) continue;
        std::vector<std::pair<std::uint32_t, std::size_t>> call{{root, 0}};
        idx[root] = low[root] = counter++;
        stack.push_back(root);
        on[root] = 1;
        while (!call.empty()) {
            auto& [v, pos] = call.back();
            const auto& out = succ(v);
            if (pos < out.size()) {
                const auto w = out[pos++].next;
                if (idx[w] < 0) {
                    idx[w] = low[w] = counter++;
                    stack.push_back(w);
                    on[w] = 1;
                    call.emplace_back(w, 0);
                } else if (on[w]) {
                    low[v] = std::min(low[v], idx[w]);
                }
                continue;
            }
            if (low[v] == idx[v]) {
                std::uint32_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on[w] = 0;
                    comp[w] = ncomp;
                } while (w != v);
                ++ncomp;
            }
            const auto done = v;
            call.pop_back();
            if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
        }
    }
    std::vector<char> leaves(static_cast<std::size_t>(ncomp), 1);
    for (std::uint32_t v : order)
        for (const auto& t : succ(v))
            if (comp[t.next] != comp[v]) leaves[static_cast<std::size_t>(comp[v])] = 0;
    const auto closed = std::count(leaves.begin(), leaves.end(), 1);
    if (closed != 1)
        throw Error(ErrorKind::MultichainDetected,
                    fmt::format("policy has {} closed classes reachable from the all-idle state", closed));
    std::vector<std::uint32_t> out;
    for (std::uint32_t v : order)
        if (leaves[static_cast<std::size_t>(comp[v])]) out.push_back(v);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::string TransitionKernel::key(std::uint32_t s) const {
    const auto& st = states[s];
    return make_key(st.job, {st.elapsed.begin(), st.elapsed.end()}, {st.cancel.begin(), st.cancel.end()}, st.pending);
}

Time lattice_unit(std::span<const ServiceDistribution> ds) {
    return make_lattice(atoms_of(ds)).unit();
}

TransitionKernel build_mdp(std::span<const ServiceDistribution> ds, Time delta, std::size_t state_cap) {
    return Builder(ds, delta, state_cap).run();
}

double evaluate_policy(const TransitionKernel& kr, std::span<const int> policy) {
    check_policy(kr, policy);
    const auto cls = recurrent_class(kr, policy);
    const auto rw = rewards_of(kr);
    std::vector<long> local(kr.size(), -1);
    for (std::size_t i = 0; i < cls.size(); ++i) local[cls[i]] = static_cast<long>(i);

    // Value iteration for cost and departures per step on the closed class;
    // the spans of the differences bracket both averages.
    const std::size_t n = cls.size();
    std::vector<double> hc(n, 0.0), hd(n, 0.0), wc(n), wd(n);
    for (long it = 0; it < 10'000'000; ++it) {
        double cmin = kInfinity, cmax = -kInfinity, dmin = kInfinity, dmax = -kInfinity;
        for (std::size_t i = 0; i < n; ++i) {
            const auto s = cls[i];
            const auto a = static_cast<std::size_t>(policy[s]);
            double ec = rw.cost[s][a], ed = rw.departures[s][a];
            for (const auto& o : kr.actions[s][a].outcomes) {
                const auto j = static_cast<std::size_t>(local[o.next]);
                ec += o.prob * hc[j];
                ed += o.prob * hd[j];
            }
            wc[i] = kLazy * ec + (1.0 - kLazy) * hc[i];
            wd[i] = kLazy * ed + (1.0 - kLazy) * hd[i];
            cmin = std::min(cmin, wc[i] - hc[i]);
            cmax = std::max(cmax, wc[i] - hc[i]);
            dmin = std::min(dmin, wd[i] - hd[i]);
            dmax = std::max(dmax, wd[i] - hd[i]);
        }
        const double c0 = wc[0], d0 = wd[0];
        for (std::size_t i = 0; i < n; ++i) {
            hc[i] = wc[i] - c0;
            hd[i] = wd[i] - d0;
        }
        if (dmin > 0.0 && cmax - cmin <= 1e-13 * std::max(1.0, cmax) && dmax - dmin <= 1e-13 * dmax)
            return (cmin + cmax) / (dmin + dmax);
    }
    throw Error(ErrorKind::NoConvergence, "policy evaluation did not settle");
}

MdpSolution solve_average_cost(const TransitionKernel& kr, double tol, long max_iters) {
    const std::size_t n = kr.size();
    const auto rw = rewards_of(kr);
    MdpSolution sol;
    sol.policy.assign(n, 0);
    double g = evaluate_policy(kr, sol.policy);

    std::vector<double> h(n, 0.0), w(n);
    const auto ref = kr.initial;
    for (int outer = 0; outer < 200; ++outer) {
        ++sol.outer_iterations;
        // Relative value iteration for per-step cost c - g d.
        bool settled = false;
        for (long it = 0; it < max_iters; ++it) {
            ++sol.inner_iterations;
            double lo = kInfinity, hi = -kInfinity;
            for (std::size_t s = 0; s < n; ++s) {
                double best = kInfinity;
                for (std::size_t a = 0; a < kr.actions[s].size(); ++a) {
                    double v = rw.cost[s][a] - g * rw.departures[s][a];
                    for (const auto& o : kr.actions[s][a].outcomes) v += o.prob * h[o.next];
                    best = std::min(best, v);
                }
                w[s] = kLazy * best + (1.0 - kLazy) * h[s];
                lo = std::min(lo, w[s] - h[s]);
                hi = std::max(hi, w[s] - h[s]);
            }
            const double base = w[ref];
            for (std::size_t s = 0; s < n; ++s) h[s] = w[s] - base;
            if (hi - lo <= tol * std::max(1.0, g)) {
                settled = true;
                break;
            }
        }
        if (!settled) throw Error(ErrorKind::NoConvergence, "relative value iteration hit the iteration cap");

        // Greedy policy; near-ties keep the earlier action (new before rep).
        std::vector<int> next(n, 0);
        for (std::size_t s = 0; s < n; ++s) {
            double best = kInfinity;
            for (std::size_t a = 0; a < kr.actions[s].size(); ++a) {
                double v = rw.cost[s][a] - g * rw.departures[s][a];
                for (const auto& o : kr.actions[s][a].outcomes) v += o.prob * h[o.next];
                if (a == 0 || v < best - 1e-9 * std::max(1.0, std::abs(best))) {
                    best = v;
                    next[s] = static_cast<int>(a);
                }
            }
        }
        const double g_next = evaluate_policy(kr, next);
        const bool same = next == sol.policy;
        sol.policy = std::move(next);
        if (same || std::abs(g_next - g) <= 1e-12 * g) {
            sol.gain = g_next;
            sol.throughput = kr.k / g_next;
            return sol;
        }
        g = g_next;
    }
    throw Error(ErrorKind::NoConvergence, "ratio iteration did not settle");
}

Observation observation_of(const TransitionKernel& kr, std::uint32_t s, std::span<const ServiceDistribution> ds,
                           Time delta) {
    const auto& st = kr.states[s];
    Observation obs;
    obs.laws = ds;
    obs.delta = delta;
    obs.queue_nonempty = true;
    obs.cancel_remaining.assign(st.job.size(), 0.0);
    for (std::size_t i = 0; i < st.job.size(); ++i) {
        if (st.job[i] == MdpState::kIdle) obs.idle_servers.push_back(static_cast<int>(i));
        if (st.job[i] == MdpState::kCancelling) obs.cancel_remaining[i] = st.cancel[i] * kr.unit;
    }
    if (obs.idle_servers.empty()) throw Error(ErrorKind::ConfigError, "state has no idle server");
    obs.idle_server = obs.idle_servers.front();

    // Launch order: longest elapsed first, ties to the lower server.
    struct Copy {
        int elapsed, server;
    };
    std::vector<std::vector<Copy>> jobs(static_cast<std::size_t>(st.num_jobs()));
    for (std::size_t i = 0; i < st.job.size(); ++i)
        if (st.job[i] >= 0) jobs[static_cast<std::size_t>(st.job[i])].push_back({st.elapsed[i], static_cast<int>(i)});
    auto older = [](const Copy& a, const Copy& b) {
        return a.elapsed != b.elapsed ? a.elapsed > b.elapsed : a.server < b.server;
    };
    for (auto& j : jobs) std::sort(j.begin(), j.end(), older);
    std::sort(jobs.begin(), jobs.end(), [&](const auto& a, const auto& b) { return older(a.front(), b.front()); });
    for (std::size_t id = 0; id < jobs.size(); ++id) {
        JobView v;
        v.id = id;
        for (const auto& c : jobs[id]) {
            v.servers.push_back(c.server);
            v.elapsed.push_back(c.elapsed * kr.unit);
        }
        obs.jobs.push_back(std::move(v));
    }
    return obs;
}

std::vector<int> policy_actions(const TransitionKernel& kr, std::span<const ServiceDistribution> ds, Time delta,
                                const Policy& policy) {
    // Group launches are spread over consecutive decision states, so the walk
    // carries the servers still owed a copy of a just-launched job.
    using Owed = std::vector<std::pair<int, int>>;  // (server, lowest server of the job)
    std::vector<int> out(kr.size(), 0);
    std::vector<char> fixed(kr.size(), 0);
    std::set<std::pair<std::uint32_t, Owed>> seen;
    std::deque<std::pair<std::uint32_t, Owed>> todo{{kr.initial, {}}};
    auto find_action = [&](std::uint32_t s, MdpAction::Kind kind, int target) {
        const auto& acts = kr.actions[s];
        for (std::size_t a = 0; a < acts.size(); ++a)
            if (acts[a].kind == kind && (kind != MdpAction::Kind::Rep || acts[a].target == target))
                return static_cast<int>(a);
        throw Error(ErrorKind::PolicyError, fmt::format("no matching action in state {}", kr.key(s)));
    };
    while (!todo.empty()) {
        auto [s, owed] = todo.front();
        todo.pop_front();
        if (!seen.insert({s, owed}).second) continue;
        const auto& st = kr.states[s];
        int choice = 0;
        Owed next_owed = owed;
        const int idle = st.pending == 0 ? st.first_idle() : -1;
        if (idle >= 0) {
            auto it = std::find_if(owed.begin(), owed.end(), [&](const auto& o) { return o.first == idle; });
            if (it != owed.end()) {
                choice = find_action(s, MdpAction::Kind::Rep, it->second);
                next_owed.erase(next_owed.begin() + (it - owed.begin()));
            } else {
                const auto obs = observation_of(kr, s, ds, delta);
                const auto d = policy.decide(obs);
                if (d.kind == Decision::Kind::Wait)
                    throw Error(ErrorKind::PolicyError,
                                fmt::format("policy {} idles in saturated state {}", policy.spec(), kr.key(s)));
                if (d.kind == Decision::Kind::New) {
                    if (std::find(d.servers.begin(), d.servers.end(), idle) == d.servers.end())
                        throw Error(ErrorKind::PolicyError, "new job must use the offered server");
                    choice = find_action(s, MdpAction::Kind::New, -1);
                    const int lowest = *std::min_element(d.servers.begin(), d.servers.end());
                    if (lowest != idle) throw Error(ErrorKind::PolicyError, "group launch skips the lowest idle server");
                    for (int x : d.servers)
                        if (x != idle) next_owed.emplace_back(x, idle);
                } else {
                    const auto& job = obs.jobs.at(static_cast<std::size_t>(d.job));
                    choice = find_action(s, MdpAction::Kind::Rep, *std::min_element(job.servers.begin(), job.servers.end()));
                }
            }
        }
        if (fixed[s] && out[s] != choice)
            throw Error(ErrorKind::PolicyError,
                        fmt::format("policy {} is not a function of the lattice state {}", policy.spec(), kr.key(s)));
        fixed[s] = 1;
        out[s] = choice;
        for (const auto& o : kr.actions[s][static_cast<std::size_t>(choice)].outcomes) {
            Owed carry = next_owed;
            // A departure ends the instant; owed copies are then void.
            if (kr.actions[s][static_cast<std::size_t>(choice)].kind == MdpAction::Kind::Null) carry.clear();
            todo.emplace_back(o.next, std::move(carry));
        }
    }
    return out;
}

std::string policy_to_csv(const TransitionKernel& kr, std::span<const int> policy) {
    check_policy(kr, policy);
    std::string out = fmt::format("# unit={}\nstate,action\n", kr.unit);
    for (std::uint32_t s = 0; s < kr.size(); ++s) {
        const auto& a = kr.actions[s][static_cast<std::size_t>(policy[s])];
        if (a.kind == MdpAction::Kind::Null) continue;
        out += fmt::format("{},{}\n", kr.key(s), a.to_string());
    }
    return out;
}

std::string state_key_of(const Observation& obs, Time unit) {
    const auto k = static_cast<std::size_t>(obs.num_servers());
    auto units = [&](Time x) {
        const double u = x / unit;
        const long long r = std::llround(u);
        if (std::abs(u - static_cast<double>(r)) > 1e-6 * std::max(1.0, u))
            throw Error(ErrorKind::PolicyError, fmt::format("time {} is off the lattice of unit {}", x, unit));
        return r;
    };
    std::vector<int> job(k, MdpState::kIdle);
    std::vector<long long> t(k, 0), c(k, 0);
    for (std::size_t s = 0; s < k && s < obs.cancel_remaining.size(); ++s)
        if (obs.cancel_remaining[s] > 0.0) {
            job[s] = MdpState::kCancelling;
            c[s] = units(obs.cancel_remaining[s]);
        }
    for (std::size_t j = 0; j < obs.jobs.size(); ++j)
        for (std::size_t r = 0; r < obs.jobs[j].servers.size(); ++r) {
            const auto s = static_cast<std::size_t>(obs.jobs[j].servers[r]);
            job[s] = static_cast<int>(j);
            t[s] = units(obs.jobs[j].elapsed[r]);
        }
    return make_key(job, t, c, 0);
}

TabularPolicy::TabularPolicy(int k, Time unit, std::map<std::string, std::string> table)
    : k_(k), unit_(unit), table_(std::move(table)) {
    if (k < 1 || !(unit > 0.0)) throw Error(ErrorKind::ConfigError, "tabular policy needs servers and a positive unit");
}

TabularPolicy TabularPolicy::from_csv(std::string_view csv, int k) {
    std::istringstream in{std::string(csv)};
    std::string line;
    std::optional<Time> unit;
    std::map<std::string, std::string> table;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line == "state,action") continue;
        if (line.starts_with("# unit=")) {
            unit = std::stod(line.substr(7));
            continue;
        }
        if (line.front() == '#') continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) throw Error(ErrorKind::ConfigError, "policy row without an action: " + line);
        table[line.substr(0, comma)] = line.substr(comma + 1);
    }
    if (!unit) throw Error(ErrorKind::ConfigError, "policy file lacks the '# unit=' line");
    return {k, *unit, std::move(table)};
}

Decision TabularPolicy::decide(const Observation& obs) const {
    if (obs.num_servers() != k_) throw Error(ErrorKind::PolicyError, "tabular policy built for a different server count");
    if (!obs.queue_nonempty) return Decision::wait();
    const auto key = state_key_of(obs, unit_);
    const auto it = table_.find(key);
    if (it == table_.end()) throw Error(ErrorKind::PolicyError, "state missing from the policy table: " + key);
    if (it->second == "new") return Decision::fresh({obs.idle_server});
    if (it->second.starts_with("rep:")) {
        const int server = std::stoi(it->second.substr(4)) - 1;
        for (const auto& j : obs.jobs)
            if (std::find(j.servers.begin(), j.servers.end(), server) != j.servers.end()) return Decision::replicate(j.id);
    }
    throw Error(ErrorKind::PolicyError, fmt::format("unusable action '{}' in state {}", it->second, key));
}

}  // namespace repcap

#include "repcap/analytic.hpp"

#include "repcap/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace repcap {

void Partition::validate(int k) const {
    std::vector<int> seen(static_cast<std::size_t>(k), 0);
    for (const auto& g : groups) {
        if (g.empty()) throw Error(ErrorKind::InvalidPartition, "empty group");
        for (int s : g) {
            if (s < 0 || s >= k) throw Error(ErrorKind::InvalidPartition, fmt::format("server {} out of range", s + 1));
            if (seen[static_cast<std::size_t>(s)]++) throw Error(ErrorKind::InvalidPartition, fmt::format("server {} repeated", s + 1));
        }
    }
    for (int s = 0; s < k; ++s)
        if (!seen[static_cast<std::size_t>(s)]) throw Error(ErrorKind::InvalidPartition, fmt::format("server {} not covered", s + 1));
}

std::string Partition::to_string() const {
    std::string out = "[";
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (g) out += ',';
        out += '[';
        for (std::size_t i = 0; i < groups[g].size(); ++i) {
            if (i) out += ',';
            out += std::to_string(groups[g][i] + 1);
        }
        out += ']';
    }
    return out + "]";
}

Partition Partition::singletons(int k) {
    Partition p;
    for (int s = 0; s < k; ++s) p.groups.push_back({s});
    return p;
}

Partition Partition::full(int k) {
    Partition p;
    p.groups.emplace_back();
    for (int s = 0; s < k; ++s) p.groups.back().push_back(s);
    return p;
}

Partition Partition::from_growth_string(std::span<const int> rgs) {
    Partition p;
    for (std::size_t i = 0; i < rgs.size(); ++i) {
        const auto g = static_cast<std::size_t>(rgs[i]);
        if (g >= p.groups.size()) p.groups.resize(g + 1);
        p.groups[g].push_back(static_cast<int>(i));
    }
    return p;
}

ThroughputReport throughput_norep(std::span<const ServiceDistribution> ds) {
    ThroughputReport r;
    for (const auto& d : ds) {
        r.components.push_back(1.0 / d.mean());
        r.value += r.components.back();
    }
    return r;
}

namespace {

double group_rate(const std::vector<int>& group, std::span<const ServiceDistribution> ds, Time delta) {
    std::vector<ServiceDistribution> members;
    for (int s : group) members.push_back(ds[static_cast<std::size_t>(s)]);
    // A single server carries no replicas and so no cancellation window.
    if (members.size() == 1) return 1.0 / members.front().mean();
    return 1.0 / (delta + min_expectation(members));
}

}  // namespace

ThroughputReport throughput_fullrep(std::span<const ServiceDistribution> ds, Time delta) {
    std::vector<int> all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    const double v = group_rate(all, ds, delta);
    return {v, {v}};
}

ThroughputReport throughput_upfront(const Partition& p, std::span<const ServiceDistribution> ds, Time delta) {
    p.validate(static_cast<int>(ds.size()));
    ThroughputReport r;
    for (const auto& g : p.groups) {
        r.components.push_back(group_rate(g, ds, delta));
        r.value += r.components.back();
    }
    return r;
}

std::uint64_t bell_number(int k) {
    // B_{n+1} = sum_i C(n, i) B_i
    std::vector<std::uint64_t> b{1};
    for (int n = 0; n < k; ++n) {
        std::uint64_t next = 0;
        std::uint64_t c = 1;
        for (int i = 0; i <= n; ++i) {
            next += c * b[static_cast<std::size_t>(i)];
            c = c * static_cast<std::uint64_t>(n - i) / static_cast<std::uint64_t>(i + 1);
        }
        b.push_back(next);
    }
    return b[static_cast<std::size_t>(k)];
}

BestPartition best_partition(std::span<const ServiceDistribution> ds, Time delta) {
    const int k = static_cast<int>(ds.size());
    if (k == 0) throw Error(ErrorKind::InvalidPartition, "no servers");
    if (k > 20 || bell_number(k) > kMaxEnumeratedPartitions)
        throw Error(ErrorKind::TooManyServers, fmt::format("{} servers exceed the enumeration guard", k));

    std::unordered_map<std::uint32_t, double> rate_of;
    auto rate = [&](std::uint32_t mask) {
        auto it = rate_of.find(mask);
        if (it != rate_of.end()) return it->second;
        std::vector<int> g;
        for (int s = 0; s < k; ++s)
            if (mask >> s & 1u) g.push_back(s);
        return rate_of[mask] = group_rate(g, ds, delta);
    };

    std::vector<int> rgs(static_cast<std::size_t>(k), 0);
    std::vector<int> prefix_max(static_cast<std::size_t>(k), 0);
    std::vector<int> best_rgs;
    double best = -1.0;
    int best_groups = 0;
    std::uint64_t count = 0;

    std::vector<std::uint32_t> masks;
    for (;;) {
        ++count;
        const int groups = 1 + *std::max_element(rgs.begin(), rgs.end());
        masks.assign(static_cast<std::size_t>(groups), 0u);
        for (int s = 0; s < k; ++s) masks[static_cast<std::size_t>(rgs[static_cast<std::size_t>(s)])] |= 1u << s;
        double v = 0.0;
        for (auto m : masks) v += rate(m);

        // Strings are visited in lexicographic order, so an equal value only
        // wins by having fewer groups.
        const double tol = 1e-10 * std::max(1.0, std::abs(best));
        if (best < 0.0 || v > best + tol || (std::abs(v - best) <= tol && groups < best_groups)) {
            best = v;
            best_groups = groups;
            best_rgs = rgs;
        }

        // Next restricted-growth string.
        int i = k - 1;
        while (i > 0 && rgs[static_cast<std::size_t>(i)] > prefix_max[static_cast<std::size_t>(i - 1)]) --i;
        if (i == 0) break;
        ++rgs[static_cast<std::size_t>(i)];
        prefix_max[static_cast<std::size_t>(i)] =
            std::max(prefix_max[static_cast<std::size_t>(i - 1)], rgs[static_cast<std::size_t>(i)]);
        for (int j = i + 1; j < k; ++j) {
            rgs[static_cast<std::size_t>(j)] = 0;
            prefix_max[static_cast<std::size_t>(j)] = prefix_max[static_cast<std::size_t>(i)];
        }
    }

    BestPartition out;
    out.partition = Partition::from_growth_string(best_rgs);
    out.report = throughput_upfront(out.partition, ds, delta);
    out.enumerated = count;
    return out;
}

HomogeneousR best_homogeneous_r(const ServiceDistribution& d, Time delta, int k) {
    if (k < 1) throw Error(ErrorKind::ConfigError, "need at least one server");
    HomogeneousR out;
    double best = kInfinity;
    for (int r = 1; r <= k; ++r) {
        double c = kInfinity;
        try {
            // r = 1 runs a single copy, so no cancellation is charged.
            c = r == 1 ? d.mean() : r * (iid_min_expectation(d, r) + delta);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::InfiniteMean) throw;
        }
        out.cost.push_back(c);
        if (c < best * (1.0 - 1e-12)) {
            best = c;
            out.r = r;
        }
    }
    if (!std::isfinite(best)) throw Error(ErrorKind::InfiniteMean, "no group size gives a finite minimum");
    out.bound = k / best;
    out.attainable = k % out.r == 0;
    return out;
}

}  // namespace repcap

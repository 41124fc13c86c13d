#include "repcap/bounds.hpp"

#include "repcap/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <tuple>

namespace repcap {

namespace {

void require_two(std::span<const ServiceDistribution> ds) {
    if (ds.size() != 2) throw Error(ErrorKind::ConfigError, "the pause-and-replicate bound needs exactly two servers");
}

// E[min(X_i^rs(t), X_j)], the length of the replicated stretch.
double replicated_stretch(const ServiceDistribution& own, Time t, const ServiceDistribution& other) {
    const std::vector<ResidualDistribution> laws{ResidualDistribution(own, t), ResidualDistribution(other)};
    return min_expectation(laws);
}

double truncated(const ServiceDistribution& d, Time t) {
    const double a = d.truncated_mean(t);
    if (!(a > 0.0)) throw Error(ErrorKind::DegenerateTruncation, "positive threshold with zero truncated mean");
    return a;
}

bool prefer(double v, Time t1, Time t2, double best, Time b1, Time b2) {
    const double tol = 1e-12 * std::max(1.0, std::abs(best));
    if (v > best + tol) return true;
    if (v < best - tol) return false;
    return std::tie(t1, t2) > std::tie(b1, b2);
}

}  // namespace

double adarep_pause_throughput(std::span<const ServiceDistribution> ds, Time delta, ThresholdPair t) {
    require_two(ds);
    if (!(t.t_1to2 >= 0.0 && t.t_2to1 >= 0.0)) throw Error(ErrorKind::ConfigError, "thresholds must be >= 0");
    if (t.t_1to2 == 0.0 || t.t_2to1 == 0.0) return 1.0 / (delta + min_expectation(ds));

    const double a1 = truncated(ds[0], t.t_1to2);
    const double a2 = truncated(ds[1], t.t_2to1);
    // A zero tail means the threshold is never reached, so no stretch is needed.
    const double p1 = ds[0].tail(t.t_1to2);
    const double p2 = ds[1].tail(t.t_2to1);
    const double g12 = p1 > 0.0 ? p1 * (delta + replicated_stretch(ds[0], t.t_1to2, ds[1])) / a1 : 0.0;
    const double g21 = p2 > 0.0 ? p2 * (delta + replicated_stretch(ds[1], t.t_2to1, ds[0])) / a2 : 0.0;
    return (a1 + a2) / (a1 * a2 * (1.0 + g12 + g21));
}

double one_sided_pause_throughput(std::span<const ServiceDistribution> ds, Time delta, Time t_2to1) {
    require_two(ds);
    if (!(t_2to1 >= 0.0)) throw Error(ErrorKind::ConfigError, "thresholds must be >= 0");
    const double tr = ds[1].truncated_mean(t_2to1);
    const double p = ds[1].tail(t_2to1);
    const double ac = tr + (p > 0.0 ? p * (delta + replicated_stretch(ds[1], t_2to1, ds[0])) : 0.0);
    return tr / ac / ds[0].mean() + 1.0 / ac;
}

std::vector<Time> threshold_grid(const ServiceDistribution& d) {
    std::vector<Time> g{0.0, kInfinity};
    if (auto atoms = d.atoms())
        for (const auto& a : *atoms) g.push_back(a.value);
    for (int i = 1; i <= 19; ++i) g.push_back(d.quantile(0.05 * i));
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

BoundReport optimize_pause_bound(std::span<const ServiceDistribution> ds, Time delta) {
    require_two(ds);
    return optimize_pause_bound(ds, delta, threshold_grid(ds[0]), threshold_grid(ds[1]));
}

BoundReport optimize_pause_bound(std::span<const ServiceDistribution> ds, Time delta, const std::vector<Time>& grid_1,
                                 const std::vector<Time>& grid_2) {
    require_two(ds);
    BoundReport rep;
    double best = -1.0;
    Time b1 = 0.0, b2 = 0.0;
    auto consider = [&](Time t1, Time t2) {
        const double v = adarep_pause_throughput(ds, delta, {t1, t2});
        ++rep.evaluations;
        if (best < 0.0 || prefer(v, t1, t2, best, b1, b2)) {
            best = v;
            b1 = t1;
            b2 = t2;
        }
    };
    for (Time t1 : grid_1)
        for (Time t2 : grid_2) consider(t1, t2);

    // Refine each finite coordinate between its grid neighbours, shrinking
    // the bracket until the bound settles.
    auto bracket = [](const std::vector<Time>& g, Time x) {
        auto it = std::lower_bound(g.begin(), g.end(), x);
        const Time lo = it == g.begin() ? x : *std::prev(it);
        const Time hi = (it == g.end() || std::next(it) == g.end() || is_infinite(*std::next(it))) ? 2.0 * x + 1.0
                                                                                                   : *std::next(it);
        return std::pair{lo, hi};
    };
    auto [lo1, hi1] = bracket(grid_1, b1);
    auto [lo2, hi2] = bracket(grid_2, b2);
    constexpr int kPoints = 8;
    for (int round = 0; round < 40; ++round) {
        const double before = best;
        const Time c1 = b1, c2 = b2;
        if (!is_infinite(c1))
            for (int i = 1; i < kPoints; ++i) {
                consider(lo1 + (c1 - lo1) * i / kPoints, c2);
                consider(c1 + (hi1 - c1) * i / kPoints, c2);
            }
        if (!is_infinite(c2))
            for (int i = 1; i < kPoints; ++i) {
                consider(b1, lo2 + (c2 - lo2) * i / kPoints);
                consider(b1, c2 + (hi2 - c2) * i / kPoints);
            }
        if (best - before <= 1e-4 * before) break;
        // Shrink the brackets around the new incumbent.
        if (!is_infinite(b1)) {
            const Time w = (hi1 - lo1) / kPoints;
            lo1 = std::max(0.0, b1 - w);
            hi1 = b1 + w;
        }
        if (!is_infinite(b2)) {
            const Time w = (hi2 - lo2) / kPoints;
            lo2 = std::max(0.0, b2 - w);
            hi2 = b2 + w;
        }
    }
    rep.bound = best;
    rep.argument = {b1, b2};
    return rep;
}

PathSample::PathSample(const ServiceDistribution& d, int k, std::uint64_t n_paths, std::uint64_t seed)
    : k_(k), n_(n_paths), draws_(n_paths * static_cast<std::uint64_t>(k)) {
    if (k < 1 || n_paths < 1) throw Error(ErrorKind::ConfigError, "need at least one server and one path");
    std::mt19937_64 g(seed);
    for (auto& x : draws_) x = d.sample(g);
}

CostEstimate homogeneous_cost(const ServiceDistribution& d, Time delta, std::span<const Time> starts,
                              const PathSample* paths, DeltaCharging charging) {
    for (std::size_t i = 0; i < starts.size(); ++i) {
        if (!(starts[i] >= 0.0)) throw Error(ErrorKind::ConfigError, "start times must be >= 0");
        if (i && starts[i] < starts[i - 1]) throw Error(ErrorKind::ConfigError, "start times must be nondecreasing");
    }
    std::vector<Time> t{0.0};
    for (Time s : starts)
        if (!is_infinite(s)) t.push_back(s);
    const double extra = charging == DeltaCharging::AsPrinted ? 1.0 : 0.0;

    if (paths) {
        if (paths->k() < static_cast<int>(t.size())) throw Error(ErrorKind::ConfigError, "path sample has too few columns");
        double sum = 0.0, sum2 = 0.0;
        for (std::uint64_t p = 0; p < paths->n_paths(); ++p) {
            const double* x = paths->row(p);
            Time s = kInfinity;
            for (std::size_t k = 0; k < t.size(); ++k) s = std::min(s, t[k] + x[k]);
            double c = 0.0;
            for (Time tk : t) c += std::max(0.0, s - tk);
            for (std::size_t k = 1; k < t.size(); ++k) c += delta * (t[k] < s);
            if (t.size() > 1) c += extra * delta * (t[1] < s);
            sum += c;
            sum2 += c * c;
        }
        const double n = static_cast<double>(paths->n_paths());
        const double mean = sum / n;
        const double var = n > 1 ? std::max(0.0, (sum2 - n * mean * mean) / (n - 1)) : 0.0;
        return {mean, std::sqrt(var / n)};
    }

    std::vector<ResidualDistribution> laws;
    for (Time tk : t) laws.emplace_back(ServiceDistribution::shifted(tk, d));
    double c = 0.0;
    for (Time tk : t) c += tail_product_integral(laws, tk);
    for (std::size_t k = 1; k < t.size(); ++k) c += delta * tail_product(laws, t[k]);
    if (t.size() > 1) c += extra * delta * tail_product(laws, t[1]);
    return {c, 0.0};
}

std::vector<Time> start_time_grid(const ServiceDistribution& d, int log_points) {
    std::vector<Time> g = threshold_grid(d);
    const Time scale = d.quantile(0.5);
    const Time lo = 1e-2 * scale;
    const Time hi = std::max(d.quantile(0.999), 10.0 * scale);
    if (log_points >= 2 && lo > 0.0 && hi > lo)
        for (int i = 0; i < log_points; ++i) g.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (log_points - 1)));
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

BoundReport homogeneous_bound(const ServiceDistribution& d, Time delta, int k, const MinimizerConfig& config) {
    if (k < 1) throw Error(ErrorKind::ConfigError, "need at least one server");
    std::optional<PathSample> paths;
    if (config.n_paths > 0) paths.emplace(d, k, config.n_paths, config.seed);

    BoundReport rep;
    std::map<std::vector<Time>, CostEstimate> cache;
    auto cost = [&](const std::vector<Time>& t) {
        auto it = cache.find(t);
        if (it != cache.end()) return it->second;
        ++rep.evaluations;
        return cache[t] = homogeneous_cost(d, delta, t, paths ? &*paths : nullptr, config.charging);
    };

    auto grid = start_time_grid(d, config.log_points);
    grid.insert(grid.end(), config.extra_grid.begin(), config.extra_grid.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    const auto n = static_cast<std::size_t>(k - 1);
    std::vector<Time> best_t;
    CostEstimate best{kInfinity, 0.0};
    auto tie = [](double a, double b) {
        return std::isfinite(b) && std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b));
    };

    for (std::size_t r = 1; r <= static_cast<std::size_t>(k); ++r) {
        std::vector<Time> t(n, kInfinity);
        for (std::size_t i = 0; i + 1 < r; ++i) t[i] = 0.0;
        CostEstimate cur = cost(t);
        for (int sweep = 0; sweep < config.max_sweeps && n > 0; ++sweep) {
            const double before = cur.mean;
            for (std::size_t i = 0; i < n; ++i) {
                const Time lo = i ? t[i - 1] : 0.0;
                const Time hi = i + 1 < n ? t[i + 1] : kInfinity;
                for (Time g : grid) {
                    if (g < lo || g > hi || g == t[i]) continue;
                    auto cand = t;
                    cand[i] = g;
                    const auto c = cost(cand);
                    // Equal cost goes to the later start, which launches fewer copies.
                    if ((c.mean < cur.mean && !tie(c.mean, cur.mean)) || (tie(c.mean, cur.mean) && g > t[i])) {
                        cur = c;
                        t = std::move(cand);
                    }
                }
            }
            if (before - cur.mean <= config.rel_tol * before) break;
        }
        if (cur.mean < best.mean && !tie(cur.mean, best.mean)) {
            best = cur;
            best_t = t;
        }
    }
    if (!std::isfinite(best.mean)) throw Error(ErrorKind::InfiniteMean, "service time of the job has infinite mean");
    rep.cost = best.mean;
    rep.bound = k / best.mean;
    rep.stderr = k * best.stderr / (best.mean * best.mean);
    rep.argument = best_t;
    return rep;
}

}  // namespace repcap

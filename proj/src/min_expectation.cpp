#include "piecewise_tail.hpp"
#include "repcap/distribution.hpp"
#include "repcap/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>

namespace repcap {

namespace {

constexpr double kQuadTolerance = 1e-12;
constexpr int kMaxPanels = 2000;

// Adaptive Gauss-Kronrod over the breakpoints, then geometrically growing
// panels; the tail beyond the last panel is closed analytically from the
// combined power-law index.
Time quadrature(std::span<const ResidualDistribution> laws, Time from) {
    double index = 0.0;
    for (const auto& l : laws) index += l.tail_index();
    if (index <= 1.0) throw Error(ErrorKind::InfiniteMean, "product of tails is not integrable");

    auto f = [&](double x) { return tail_product(laws, x); };

    std::vector<Time> cuts{from};
    for (const auto& l : laws)
        for (Time b : l.breakpoints())
            if (b > from && std::isfinite(b)) cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    Time total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += GK::integrate(f, cuts[i], cuts[i + 1], 15, kQuadTolerance);

    Time a = cuts.back();
    Time width = std::max(1.0, a);
    for (int panel = 0; panel < kMaxPanels; ++panel) {
        const Time b = a + width;
        total += GK::integrate(f, a, b, 15, kQuadTolerance);
        const double p = f(b);
        if (p == 0.0) return total;
        const Time remainder = std::isfinite(index) ? p * b / (index - 1.0) : p * std::max(width, b);
        if (remainder <= 1e-13 * total) return total + (std::isfinite(index) ? remainder : 0.0);
        a = b;
        width *= 2.0;
    }
    throw Error(ErrorKind::NoConvergence, "tail quadrature did not settle");
}

}  // namespace

double tail_product(std::span<const ResidualDistribution> laws, Time x) {
    double p = 1.0;
    for (const auto& l : laws) {
        p *= l.tail(x);
        if (p == 0.0) break;
    }
    return p;
}

Time tail_product_integral(std::span<const ResidualDistribution> laws, Time from) {
    if (laws.empty()) throw Error(ErrorKind::InvalidDistribution, "empty list of laws");
    if (laws.size() == 1) return laws.front().tail_integral(from, kInfinity);

    std::vector<PiecewiseTail> pieces;
    pieces.reserve(laws.size());
    for (const auto& l : laws) {
        auto pw = l.piecewise_tail();
        if (!pw) break;
        pieces.push_back(std::move(*pw));
    }
    if (pieces.size() == laws.size()) {
        if (auto prod = detail::product(pieces)) return detail::integrate(*prod, from, kInfinity);
    }
    return quadrature(laws, from);
}

Time min_expectation(std::span<const ResidualDistribution> laws) { return tail_product_integral(laws, 0.0); }

Time min_expectation(std::span<const ServiceDistribution> laws) {
    std::vector<ResidualDistribution> r;
    r.reserve(laws.size());
    for (const auto& d : laws) r.emplace_back(d);
    return min_expectation(r);
}

Time iid_min_expectation(const ServiceDistribution& d, int r) {
    if (r < 1) throw Error(ErrorKind::InvalidDistribution, "order statistic needs r >= 1");
    if (r == 1) return d.mean();
    if (d.tail_index() * r <= 1.0) throw Error(ErrorKind::InfiniteMean, "E[X_{1:r}] diverges");
    if (auto pw = d.piecewise_tail()) {
        std::vector<PiecewiseTail> copies(static_cast<std::size_t>(r), *pw);
        if (auto prod = detail::product(copies)) return detail::integrate(*prod, 0.0, kInfinity);
    }
    // Pareto(x_m, a): the minimum of r draws is Pareto(x_m, r a).
    if (const auto* p = std::get_if<ServiceDistribution::Pareto>(&d.variant()))
        return ServiceDistribution::pareto(p->scale, p->shape * r).mean();
    std::vector<ResidualDistribution> copies(static_cast<std::size_t>(r), ResidualDistribution(d));
    return quadrature(copies, 0.0);
}

}  // namespace repcap

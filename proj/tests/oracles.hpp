#pragma once

// Test-only reference computations. Nothing here calls into the library's
// integration or enumeration paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

/// Composite Simpson rule with n (even) panels on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

/// Integral over [0, inf) by mapping x = u / (1 - u); needs a tail decaying
/// faster than x^-2.
inline double simpson_half_line(const std::function<double(double)>& f, int n = 200000) {
    auto g = [&](double u) {
        if (u >= 1.0) return 0.0;
        const double x = u / (1.0 - u);
        return f(x) / ((1.0 - u) * (1.0 - u));
    };
    return simpson(g, 0.0, 1.0, n);
}

/// Kolmogorov-Smirnov distance between samples and a model CDF given by its
/// tail. `tail_left(x)` is P(X >= x); for continuous laws it equals tail(x).
inline double ks_distance(std::vector<double> xs, const std::function<double(double)>& tail,
                          const std::function<double(double)>& tail_left) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    std::size_t i = 0;
    while (i < xs.size()) {
        std::size_t j = i;
        while (j < xs.size() && xs[j] == xs[i]) ++j;
        const double below = i / n;  // empirical P(X < v)
        const double upto = j / n;   // empirical P(X <= v)
        d = std::max(d, std::abs(below - (1.0 - tail_left(xs[i]))));
        d = std::max(d, std::abs(upto - (1.0 - tail(xs[i]))));
        i = j;
    }
    return d;
}

}  // namespace oracle

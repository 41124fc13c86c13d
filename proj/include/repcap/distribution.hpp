#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace repcap {

using Time = double;

/// Admissible "never" value for thresholds and start times.
inline constexpr Time kInfinity = std::numeric_limits<Time>::infinity();

inline bool is_infinite(Time t) { return std::isinf(t) && t > 0; }

struct Atom {
    Time value;
    double prob;
};

/// One exponential term `coef * exp(-rate * (x - start))` of a tail piece.
struct ExpTerm {
    double coef;
    double rate;
};

/// On [start, next.start) the tail P(X > x) is the sum of `terms`.
/// An empty term list means the tail is zero from `start` on.
struct TailPiece {
    Time start;
    std::vector<ExpTerm> terms;
};

/// Exact representation of tails that are piecewise sums of exponentials.
/// Covers every variant except Pareto; products and residuals stay closed.
using PiecewiseTail = std::vector<TailPiece>;

/// Uniform on (0, 1], never zero, from a 64-bit generator.
template <class Urbg>
double open_closed_uniform(Urbg& g) {
    static_assert(Urbg::max() - Urbg::min() == std::numeric_limits<std::uint64_t>::max(),
                  "expects a full-width 64-bit generator");
    return (static_cast<double>((g() - Urbg::min()) >> 11) + 1.0) * 0x1.0p-53;
}

/// Service-time law of one server. Immutable after construction.
class ServiceDistribution {
public:
    struct Deterministic {
        Time value;
    };
    struct Exponential {
        double rate;
    };
    struct Shifted {
        Time shift;
        std::shared_ptr<const ServiceDistribution> inner;
    };
    struct HyperExp {
        double rate1;
        double rate2;
        double p2;
    };
    struct Pareto {
        Time scale;
        double shape;
    };
    struct FiniteSupport {
        std::vector<Atom> atoms;  // ascending, distinct, positive mass
    };

    using Variant = std::variant<Deterministic, Exponential, Shifted, HyperExp, Pareto, FiniteSupport>;

    static ServiceDistribution deterministic(Time value);
    static ServiceDistribution exponential(double rate);
    static ServiceDistribution shifted(Time shift, ServiceDistribution inner);
    static ServiceDistribution shifted_exponential(Time shift, double rate);
    static ServiceDistribution hyper_exp(double rate1, double rate2, double p2);
    static ServiceDistribution pareto(Time scale, double shape);
    static ServiceDistribution finite(std::vector<Atom> atoms);

    const Variant& variant() const { return v_; }

    /// E[X]. Throws InfiniteMean for Pareto with shape <= 1.
    Time mean() const;
    /// P(X > x); 1 for x < 0.
    double tail(Time x) const;
    /// Integral of the tail over [a, b]; b may be infinite.
    Time tail_integral(Time a, Time b) const;
    /// E[min(X, t)]; t may be infinite.
    Time truncated_mean(Time t) const { return tail_integral(0.0, t); }
    /// inf{x >= 0 : tail(x) <= q} for q in (0, 1]. Inverse-transform sampler core.
    Time tail_quantile(double q) const;
    Time quantile(double p) const { return tail_quantile(1.0 - p); }

    /// Power-law decay exponent of the tail; +inf for light tails.
    double tail_index() const;
    std::optional<PiecewiseTail> piecewise_tail() const;
    /// Points where the tail jumps or has a kink.
    std::vector<Time> breakpoints() const;
    /// Support atoms when the law is discrete (Deterministic, FiniteSupport, shifts of those).
    std::optional<std::vector<Atom>> atoms() const;
    Time min_support() const;
    Time max_support() const;

    template <class Urbg>
    Time sample(Urbg& g) const {
        return tail_quantile(open_closed_uniform(g));
    }

    /// Literal in the config grammar, e.g. `finite([(1,0.9),(20,0.1)])`.
    std::string to_literal() const;

    friend bool operator==(const ServiceDistribution& a, const ServiceDistribution& b);

private:
    explicit ServiceDistribution(Variant v) : v_(std::move(v)) {}
    Variant v_;
};

/// Law of (X - age) | X > age. With age 0 this is X itself.
class ResidualDistribution {
public:
    /// Throws ZeroSupport when tail(age) == 0.
    explicit ResidualDistribution(ServiceDistribution base, Time age = 0.0);

    const ServiceDistribution& base() const { return base_; }
    Time age() const { return age_; }
    /// Set when the conditional law is itself one of the variants.
    const std::optional<ServiceDistribution>& closed_form() const { return closed_; }

    double tail(Time x) const;
    Time tail_integral(Time a, Time b) const;
    Time mean() const { return tail_integral(0.0, kInfinity); }
    Time truncated_mean(Time t) const { return tail_integral(0.0, t); }
    Time tail_quantile(double q) const;
    double tail_index() const { return base_.tail_index(); }
    std::optional<PiecewiseTail> piecewise_tail() const;
    std::vector<Time> breakpoints() const;

    template <class Urbg>
    Time sample(Urbg& g) const {
        return tail_quantile(open_closed_uniform(g));
    }

private:
    ServiceDistribution base_;
    Time age_;
    double base_tail_at_age_;
    std::optional<ServiceDistribution> closed_;
};

/// Conditional law after `t` units of service. Throws ZeroSupport if tail(t) == 0.
ResidualDistribution residual(const ServiceDistribution& d, Time t);

/// Product of tails at x.
double tail_product(std::span<const ResidualDistribution> laws, Time x);

/// Integral of the product of tails over [from, inf). Exact for piecewise
/// exponential laws, adaptive quadrature otherwise.
Time tail_product_integral(std::span<const ResidualDistribution> laws, Time from = 0.0);

/// E[min of independent draws], one per law.
Time min_expectation(std::span<const ResidualDistribution> laws);
Time min_expectation(std::span<const ServiceDistribution> laws);

/// E[X_{1:r}], the minimum of r i.i.d. draws.
Time iid_min_expectation(const ServiceDistribution& d, int r);

}  // namespace repcap

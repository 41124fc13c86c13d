#include "repcap/distribution.hpp"

#include "piecewise_tail.hpp"
#include "repcap/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace repcap {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::InvalidDistribution, what);
}

// Integral of (scale/x)^shape over [a, b] with scale <= a.
Time power_tail_integral(Time scale, double shape, Time a, Time b) {
    if (is_infinite(b)) {
        if (shape <= 1.0) throw Error(ErrorKind::InfiniteMean, fmt::format("Pareto shape {} <= 1", shape));
        return std::pow(scale, shape) * std::pow(a, 1.0 - shape) / (shape - 1.0);
    }
    if (shape == 1.0) return scale * std::log(b / a);
    return std::pow(scale, shape) * (std::pow(b, 1.0 - shape) - std::pow(a, 1.0 - shape)) / (1.0 - shape);
}

double hyper_tail(const ServiceDistribution::HyperExp& h, Time x) {
    return (1.0 - h.p2) * std::exp(-h.rate1 * x) + h.p2 * std::exp(-h.rate2 * x);
}

Time hyper_tail_quantile(const ServiceDistribution::HyperExp& h, double q) {
    if (q >= 1.0) return 0.0;
    if (h.p2 == 0.0) return -std::log(q) / h.rate1;
    if (h.p2 == 1.0) return -std::log(q) / h.rate2;
    double lo = 0.0;
    double hi = -std::log(q) / std::min(h.rate1, h.rate2);
    double x = -std::log(q) / std::max(h.rate1, h.rate2);
    for (int it = 0; it < 200; ++it) {
        const double f = hyper_tail(h, x) - q;
        if (f > 0.0) lo = x; else hi = x;
        const double df = -(1.0 - h.p2) * h.rate1 * std::exp(-h.rate1 * x) - h.p2 * h.rate2 * std::exp(-h.rate2 * x);
        double next = x - f / df;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-15 * std::max(1.0, x)) return next;
        x = next;
    }
    return x;
}

std::string num(double v) {
    if (is_infinite(v)) return "inf";
    return fmt::format("{}", v);
}

}  // namespace

// ---------------------------------------------------------------- factories

ServiceDistribution ServiceDistribution::deterministic(Time value) {
    require(std::isfinite(value) && value >= 0.0, "deterministic value must be finite and >= 0");
    return ServiceDistribution(Deterministic{value});
}

ServiceDistribution ServiceDistribution::exponential(double rate) {
    require(std::isfinite(rate) && rate > 0.0, "exponential rate must be > 0");
    return ServiceDistribution(Exponential{rate});
}

ServiceDistribution ServiceDistribution::shifted(Time shift, ServiceDistribution inner) {
    require(std::isfinite(shift) && shift >= 0.0, "shift must be finite and >= 0");
    if (shift == 0.0) return inner;
    // Collapse nested shifts so the representation stays canonical.
    if (const auto* s = std::get_if<Shifted>(&inner.v_)) return shifted(shift + s->shift, *s->inner);
    if (const auto* d = std::get_if<Deterministic>(&inner.v_)) return deterministic(shift + d->value);
    return ServiceDistribution(Shifted{shift, std::make_shared<const ServiceDistribution>(std::move(inner))});
}

ServiceDistribution ServiceDistribution::shifted_exponential(Time shift, double rate) {
    return shifted(shift, exponential(rate));
}

ServiceDistribution ServiceDistribution::hyper_exp(double rate1, double rate2, double p2) {
    require(std::isfinite(rate1) && rate1 > 0.0 && std::isfinite(rate2) && rate2 > 0.0,
            "hyperexponential rates must be > 0");
    require(p2 >= 0.0 && p2 <= 1.0, "hyperexponential p2 must lie in [0, 1]");
    return ServiceDistribution(HyperExp{rate1, rate2, p2});
}

ServiceDistribution ServiceDistribution::pareto(Time scale, double shape) {
    require(std::isfinite(scale) && scale > 0.0, "Pareto scale must be > 0");
    require(std::isfinite(shape) && shape > 0.0, "Pareto shape must be > 0");
    return ServiceDistribution(Pareto{scale, shape});
}

ServiceDistribution ServiceDistribution::finite(std::vector<Atom> atoms) {
    require(!atoms.empty(), "finite support needs at least one atom");
    double total = 0.0;
    for (const auto& a : atoms) {
        require(std::isfinite(a.value) && a.value >= 0.0, "atom values must be finite and >= 0");
        require(a.prob >= 0.0 && a.prob <= 1.0, "atom probabilities must lie in [0, 1]");
        total += a.prob;
    }
    require(std::abs(total - 1.0) <= 1e-12, fmt::format("atom probabilities sum to {}", total));
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.value < b.value; });
    for (std::size_t i = 1; i < atoms.size(); ++i)
        require(atoms[i].value != atoms[i - 1].value, "atom values must be distinct");
    std::erase_if(atoms, [](const Atom& a) { return a.prob == 0.0; });
    return ServiceDistribution(FiniteSupport{std::move(atoms)});
}

// ---------------------------------------------------------------- analytic quantities

Time ServiceDistribution::mean() const { return tail_integral(0.0, kInfinity); }

double ServiceDistribution::tail(Time x) const {
    if (x < 0.0) return 1.0;
    if (is_infinite(x)) return 0.0;
    return std::visit(
        Overloaded{
            [&](const Deterministic& d) { return x < d.value ? 1.0 : 0.0; },
            [&](const Exponential& e) { return std::exp(-e.rate * x); },
            [&](const Shifted& s) { return s.inner->tail(x - s.shift); },
            [&](const HyperExp& h) { return hyper_tail(h, x); },
            [&](const Pareto& p) { return x < p.scale ? 1.0 : std::pow(p.scale / x, p.shape); },
            [&](const FiniteSupport& f) {
                double above = 0.0;
                for (auto it = f.atoms.rbegin(); it != f.atoms.rend() && it->value > x; ++it) above += it->prob;
                return std::min(above, 1.0);
            },
        },
        v_);
}

Time ServiceDistribution::tail_integral(Time a, Time b) const {
    a = std::max(a, 0.0);
    if (!(b > a)) return 0.0;
    if (const auto* p = std::get_if<Pareto>(&v_)) {
        Time total = 0.0;
        if (a < p->scale) {
            total += std::min(b, p->scale) - a;
            a = p->scale;
        }
        if (b > a) total += power_tail_integral(p->scale, p->shape, a, b);
        return total;
    }
    if (const auto* s = std::get_if<Shifted>(&v_)) {
        Time total = 0.0;
        if (a < s->shift) {
            total += std::min(b, s->shift) - a;
            a = s->shift;
        }
        if (b > a) total += s->inner->tail_integral(a - s->shift, b - s->shift);
        return total;
    }
    return detail::integrate(*piecewise_tail(), a, b);
}

Time ServiceDistribution::tail_quantile(double q) const {
    if (q >= 1.0) return min_support();
    return std::visit(
        Overloaded{
            [&](const Deterministic& d) { return d.value; },
            [&](const Exponential& e) { return -std::log(q) / e.rate; },
            [&](const Shifted& s) { return s.shift + s.inner->tail_quantile(q); },
            [&](const HyperExp& h) { return hyper_tail_quantile(h, q); },
            [&](const Pareto& p) { return p.scale * std::pow(q, -1.0 / p.shape); },
            [&](const FiniteSupport& f) {
                double cum = 0.0;
                for (const auto& a : f.atoms) {
                    cum += a.prob;
                    if (1.0 - cum <= q) return a.value;
                }
                return f.atoms.back().value;
            },
        },
        v_);
}

double ServiceDistribution::tail_index() const {
    if (const auto* p = std::get_if<Pareto>(&v_)) return p->shape;
    if (const auto* s = std::get_if<Shifted>(&v_)) return s->inner->tail_index();
    return kInfinity;
}

std::optional<PiecewiseTail> ServiceDistribution::piecewise_tail() const {
    return std::visit(
        Overloaded{
            [](const Deterministic& d) -> std::optional<PiecewiseTail> {
                if (d.value == 0.0) return detail::constant_tail(0.0);
                return PiecewiseTail{{0.0, {{1.0, 0.0}}}, {d.value, {}}};
            },
            [](const Exponential& e) -> std::optional<PiecewiseTail> {
                return PiecewiseTail{{0.0, {{1.0, e.rate}}}};
            },
            [](const Shifted& s) -> std::optional<PiecewiseTail> {
                auto inner = s.inner->piecewise_tail();
                if (!inner) return std::nullopt;
                return detail::shift(*inner, s.shift);
            },
            [](const HyperExp& h) -> std::optional<PiecewiseTail> {
                std::vector<ExpTerm> terms;
                if (h.p2 < 1.0) terms.push_back({1.0 - h.p2, h.rate1});
                if (h.p2 > 0.0) terms.push_back({h.p2, h.rate2});
                return PiecewiseTail{{0.0, std::move(terms)}};
            },
            [](const Pareto&) -> std::optional<PiecewiseTail> { return std::nullopt; },
            [](const FiniteSupport& f) -> std::optional<PiecewiseTail> {
                PiecewiseTail pw;
                double above = 1.0;
                if (f.atoms.front().value > 0.0) pw.push_back({0.0, {{1.0, 0.0}}});
                for (const auto& a : f.atoms) {
                    above -= a.prob;
                    if (above <= 1e-15) above = 0.0;
                    if (above == 0.0) {
                        pw.push_back({a.value, {}});
                        break;
                    }
                    pw.push_back({a.value, {{above, 0.0}}});
                }
                return pw;
            },
        },
        v_);
}

std::vector<Time> ServiceDistribution::breakpoints() const {
    return std::visit(
        Overloaded{
            [](const Deterministic& d) { return std::vector<Time>{d.value}; },
            [](const Exponential&) { return std::vector<Time>{}; },
            [](const Shifted& s) {
                std::vector<Time> out{s.shift};
                for (Time b : s.inner->breakpoints()) out.push_back(b + s.shift);
                return out;
            },
            [](const HyperExp&) { return std::vector<Time>{}; },
            [](const Pareto& p) { return std::vector<Time>{p.scale}; },
            [](const FiniteSupport& f) {
                std::vector<Time> out;
                for (const auto& a : f.atoms) out.push_back(a.value);
                return out;
            },
        },
        v_);
}

std::optional<std::vector<Atom>> ServiceDistribution::atoms() const {
    if (const auto* d = std::get_if<Deterministic>(&v_)) return std::vector<Atom>{{d->value, 1.0}};
    if (const auto* f = std::get_if<FiniteSupport>(&v_)) return f->atoms;
    if (const auto* s = std::get_if<Shifted>(&v_)) {
        auto inner = s->inner->atoms();
        if (!inner) return std::nullopt;
        for (auto& a : *inner) a.value += s->shift;
        return inner;
    }
    return std::nullopt;
}

Time ServiceDistribution::min_support() const {
    return std::visit(Overloaded{
                          [](const Deterministic& d) { return d.value; },
                          [](const Exponential&) { return 0.0; },
                          [](const Shifted& s) { return s.shift + s.inner->min_support(); },
                          [](const HyperExp&) { return 0.0; },
                          [](const Pareto& p) { return p.scale; },
                          [](const FiniteSupport& f) { return f.atoms.front().value; },
                      },
                      v_);
}

Time ServiceDistribution::max_support() const {
    return std::visit(Overloaded{
                          [](const Deterministic& d) { return d.value; },
                          [](const Exponential&) { return kInfinity; },
                          [](const Shifted& s) { return s.shift + s.inner->max_support(); },
                          [](const HyperExp&) { return kInfinity; },
                          [](const Pareto&) { return kInfinity; },
                          [](const FiniteSupport& f) { return f.atoms.back().value; },
                      },
                      v_);
}

std::string ServiceDistribution::to_literal() const {
    return std::visit(
        Overloaded{
            [](const Deterministic& d) { return fmt::format("det({})", num(d.value)); },
            [](const Exponential& e) { return fmt::format("exp({})", num(e.rate)); },
            [](const Shifted& s) {
                if (const auto* e = std::get_if<Exponential>(&s.inner->variant()))
                    return fmt::format("shiftexp({},{})", num(s.shift), num(e->rate));
                return fmt::format("shift({},{})", num(s.shift), s.inner->to_literal());
            },
            [](const HyperExp& h) {
                return fmt::format("hyperexp({},{},{})", num(h.rate1), num(h.rate2), num(h.p2));
            },
            [](const Pareto& p) { return fmt::format("pareto({},{})", num(p.scale), num(p.shape)); },
            [](const FiniteSupport& f) {
                std::string out = "finite([";
                for (std::size_t i = 0; i < f.atoms.size(); ++i) {
                    if (i) out += ",";
                    out += fmt::format("({},{})", num(f.atoms[i].value), num(f.atoms[i].prob));
                }
                return out + "])";
            },
        },
        v_);
}

bool operator==(const ServiceDistribution& a, const ServiceDistribution& b) {
    return a.to_literal() == b.to_literal();
}

// ---------------------------------------------------------------- residual laws

namespace {

std::optional<ServiceDistribution> closed_residual(const ServiceDistribution& d, Time t) {
    using SD = ServiceDistribution;
    if (t == 0.0) return d;
    return std::visit(
        Overloaded{
            [&](const SD::Deterministic& c) -> std::optional<SD> { return SD::deterministic(c.value - t); },
            [&](const SD::Exponential&) -> std::optional<SD> { return d; },
            [&](const SD::Shifted& s) -> std::optional<SD> {
                if (t < s.shift) return SD::shifted(s.shift - t, *s.inner);
                return closed_residual(*s.inner, t - s.shift);
            },
            [&](const SD::HyperExp& h) -> std::optional<SD> {
                if (h.p2 == 0.0 || h.p2 == 1.0) return d;
                // Posterior weight of the rate2 branch given survival to t.
                const double p2 = 1.0 / (1.0 + (1.0 - h.p2) / h.p2 * std::exp(-(h.rate1 - h.rate2) * t));
                return SD::hyper_exp(h.rate1, h.rate2, p2);
            },
            [&](const SD::Pareto&) -> std::optional<SD> { return std::nullopt; },
            [&](const SD::FiniteSupport& f) -> std::optional<SD> {
                std::vector<Atom> kept;
                double mass = 0.0;
                for (const auto& a : f.atoms)
                    if (a.value > t) {
                        kept.push_back({a.value - t, a.prob});
                        mass += a.prob;
                    }
                for (auto& a : kept) a.prob /= mass;
                // Renormalised masses may miss 1 by an ulp or two.
                double total = 0.0;
                for (std::size_t i = 0; i + 1 < kept.size(); ++i) total += kept[i].prob;
                kept.back().prob = 1.0 - total;
                return SD::finite(std::move(kept));
            },
        },
        d.variant());
}

}  // namespace

ResidualDistribution::ResidualDistribution(ServiceDistribution base, Time age)
    : base_(std::move(base)), age_(age), base_tail_at_age_(base_.tail(age)) {
    if (!(age >= 0.0)) throw Error(ErrorKind::InvalidDistribution, "residual age must be >= 0");
    if (!(base_tail_at_age_ > 0.0))
        throw Error(ErrorKind::ZeroSupport, fmt::format("no mass beyond {} in {}", age, base_.to_literal()));
    closed_ = closed_residual(base_, age_);
}

ResidualDistribution residual(const ServiceDistribution& d, Time t) { return ResidualDistribution(d, t); }

double ResidualDistribution::tail(Time x) const {
    if (closed_) return closed_->tail(x);
    if (x < 0.0) return 1.0;
    return std::min(1.0, base_.tail(age_ + x) / base_tail_at_age_);
}

Time ResidualDistribution::tail_integral(Time a, Time b) const {
    if (closed_) return closed_->tail_integral(a, b);
    a = std::max(a, 0.0);
    return base_.tail_integral(age_ + a, age_ + b) / base_tail_at_age_;
}

Time ResidualDistribution::tail_quantile(double q) const {
    if (closed_) return closed_->tail_quantile(q);
    return std::max(0.0, base_.tail_quantile(q * base_tail_at_age_) - age_);
}

std::optional<PiecewiseTail> ResidualDistribution::piecewise_tail() const {
    if (closed_) return closed_->piecewise_tail();
    auto pw = base_.piecewise_tail();
    if (!pw) return std::nullopt;
    return detail::condition_on_exceeding(*pw, age_);
}

std::vector<Time> ResidualDistribution::breakpoints() const {
    if (closed_) return closed_->breakpoints();
    std::vector<Time> out;
    for (Time b : base_.breakpoints())
        if (b > age_) out.push_back(b - age_);
    return out;
}

}  // namespace repcap

#include "piecewise_tail.hpp"

#include "repcap/error.hpp"

#include <algorithm>
#include <cmath>

namespace repcap::detail {

namespace {

// Index of the piece containing x (x >= 0).
std::size_t locate(const PiecewiseTail& pw, Time x) {
    auto it = std::upper_bound(pw.begin(), pw.end(), x,
                               [](Time v, const TailPiece& p) { return v < p.start; });
    return static_cast<std::size_t>(std::distance(pw.begin(), it)) - 1;
}

// Terms of piece `p` rebased from p.start to `at` (at >= p.start).
std::vector<ExpTerm> rebase(const TailPiece& p, Time at) {
    std::vector<ExpTerm> out;
    out.reserve(p.terms.size());
    const Time dx = at - p.start;
    for (const auto& t : p.terms) {
        const double c = t.rate == 0.0 ? t.coef : t.coef * std::exp(-t.rate * dx);
        if (c != 0.0) out.push_back({c, t.rate});
    }
    return out;
}

double sum_terms(const std::vector<ExpTerm>& terms, Time dx) {
    double s = 0.0;
    for (const auto& t : terms) s += t.rate == 0.0 ? t.coef : t.coef * std::exp(-t.rate * dx);
    return s;
}

// Merge terms with equal rates; keeps products compact for i.i.d. powers.
void compact(std::vector<ExpTerm>& terms) {
    std::sort(terms.begin(), terms.end(), [](const ExpTerm& a, const ExpTerm& b) { return a.rate < b.rate; });
    std::vector<ExpTerm> out;
    for (const auto& t : terms) {
        if (!out.empty() && std::abs(out.back().rate - t.rate) <= 1e-14 * std::max(1.0, std::abs(t.rate))) {
            out.back().coef += t.coef;
        } else {
            out.push_back(t);
        }
    }
    std::erase_if(out, [](const ExpTerm& t) { return t.coef == 0.0; });
    terms = std::move(out);
}

}  // namespace

PiecewiseTail constant_tail(double value) {
    if (value == 0.0) return {TailPiece{0.0, {}}};
    return {TailPiece{0.0, {{value, 0.0}}}};
}

double evaluate(const PiecewiseTail& pw, Time x) {
    if (x < 0.0) return 1.0;
    if (is_infinite(x)) return 0.0;
    const auto& p = pw[locate(pw, x)];
    return sum_terms(p.terms, x - p.start);
}

PiecewiseTail shift(const PiecewiseTail& pw, Time s) {
    if (s == 0.0) return pw;
    PiecewiseTail out{TailPiece{0.0, {{1.0, 0.0}}}};
    for (const auto& p : pw) out.push_back(TailPiece{p.start + s, p.terms});
    return out;
}

PiecewiseTail condition_on_exceeding(const PiecewiseTail& pw, Time t) {
    if (t <= 0.0) return pw;
    const double norm = evaluate(pw, t);
    const std::size_t i = locate(pw, t);
    PiecewiseTail out;
    auto first = rebase(pw[i], t);
    for (auto& term : first) term.coef /= norm;
    out.push_back(TailPiece{0.0, std::move(first)});
    for (std::size_t j = i + 1; j < pw.size(); ++j) {
        TailPiece p{pw[j].start - t, pw[j].terms};
        for (auto& term : p.terms) term.coef /= norm;
        out.push_back(std::move(p));
    }
    return out;
}

std::optional<PiecewiseTail> product(std::span<const PiecewiseTail> tails) {
    if (tails.empty()) return constant_tail(1.0);
    std::vector<Time> starts;
    for (const auto& pw : tails)
        for (const auto& p : pw) starts.push_back(p.start);
    std::sort(starts.begin(), starts.end());
    starts.erase(std::unique(starts.begin(), starts.end()), starts.end());

    PiecewiseTail out;
    for (Time s : starts) {
        std::vector<ExpTerm> acc{{1.0, 0.0}};
        for (const auto& pw : tails) {
            auto terms = rebase(pw[locate(pw, s)], s);
            if (terms.empty()) {
                acc.clear();
                break;
            }
            std::vector<ExpTerm> next;
            next.reserve(acc.size() * terms.size());
            for (const auto& a : acc)
                for (const auto& b : terms) next.push_back({a.coef * b.coef, a.rate + b.rate});
            compact(next);
            if (next.size() > kMaxProductTerms) return std::nullopt;
            acc = std::move(next);
        }
        out.push_back(TailPiece{s, std::move(acc)});
        if (out.back().terms.empty()) break;  // zero from here on
    }
    return out;
}

Time integrate(const PiecewiseTail& pw, Time a, Time b) {
    a = std::max(a, 0.0);
    if (!(b > a)) return 0.0;
    Time total = 0.0;
    for (std::size_t i = locate(pw, a); i < pw.size(); ++i) {
        const Time lo = std::max(a, pw[i].start);
        const Time hi = std::min(b, i + 1 < pw.size() ? pw[i + 1].start : kInfinity);
        if (!(hi > lo)) {
            if (lo >= b) break;
            continue;
        }
        for (const auto& t : rebase(pw[i], lo)) {
            if (t.rate == 0.0) {
                if (is_infinite(hi)) throw Error(ErrorKind::InfiniteMean, "tail does not vanish");
                total += t.coef * (hi - lo);
            } else if (is_infinite(hi)) {
                total += t.coef / t.rate;
            } else {
                total += t.coef * (-std::expm1(-t.rate * (hi - lo))) / t.rate;
            }
        }
    }
    return total;
}

}  // namespace repcap::detail

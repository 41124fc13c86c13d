#pragma once

#include "repcap/distribution.hpp"

#include <span>

namespace repcap::detail {

inline constexpr std::size_t kMaxProductTerms = 4096;

PiecewiseTail constant_tail(double value);
double evaluate(const PiecewiseTail& pw, Time x);
/// Tail of (s + X).
PiecewiseTail shift(const PiecewiseTail& pw, Time s);
/// Tail of (X - t) | X > t. Precondition: evaluate(pw, t) > 0.
PiecewiseTail condition_on_exceeding(const PiecewiseTail& pw, Time t);
/// Pointwise product; nullopt if any segment would exceed kMaxProductTerms.
std::optional<PiecewiseTail> product(std::span<const PiecewiseTail> tails);
/// Integral over [a, b]; throws InfiniteMean when it diverges.
Time integrate(const PiecewiseTail& pw, Time a, Time b);

}  // namespace repcap::detail

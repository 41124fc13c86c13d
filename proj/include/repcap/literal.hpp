#pragma once

#include "repcap/distribution.hpp"

#include <string_view>

namespace repcap {

/// Parses `det(c)`, `exp(rate)`, `shiftexp(shift,rate)`, `hyperexp(r1,r2,p2)`,
/// `pareto(xm,alpha)`, `finite([(v,p),...])` and `shift(c, inner)`.
/// Numeric arguments accept + - * / and parentheses. Throws ConfigError.
ServiceDistribution parse_distribution(std::string_view text);

/// A bare numeric expression such as `0.5*2` or `inf`. Throws ConfigError.
double parse_number(std::string_view text);

}  // namespace repcap

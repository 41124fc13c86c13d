#include "repcap/literal.hpp"

#include "cursor.hpp"

namespace repcap {

namespace {

ServiceDistribution read_distribution(detail::Cursor& c) {
    using SD = ServiceDistribution;
    const std::string name = c.identifier();
    c.expect('(');
    auto arg = [&] { return c.expression(); };
    auto sep = [&] { c.expect(','); };

    SD out = SD::deterministic(0.0);
    if (name == "det") {
        out = SD::deterministic(arg());
    } else if (name == "exp") {
        out = SD::exponential(arg());
    } else if (name == "shiftexp") {
        const double shift = arg();
        sep();
        out = SD::shifted_exponential(shift, arg());
    } else if (name == "hyperexp") {
        const double r1 = arg();
        sep();
        const double r2 = arg();
        sep();
        out = SD::hyper_exp(r1, r2, arg());
    } else if (name == "pareto") {
        const double xm = arg();
        sep();
        out = SD::pareto(xm, arg());
    } else if (name == "finite") {
        c.expect('[');
        std::vector<Atom> atoms;
        do {
            c.expect('(');
            const double v = arg();
            sep();
            atoms.push_back({v, arg()});
            c.expect(')');
        } while (c.accept(','));
        c.expect(']');
        out = SD::finite(std::move(atoms));
    } else if (name == "shift") {
        const double shift = arg();
        sep();
        out = SD::shifted(shift, read_distribution(c));
    } else {
        c.fail("unknown distribution '" + name + "'");
    }
    c.expect(')');
    return out;
}

}  // namespace

ServiceDistribution parse_distribution(std::string_view text) {
    detail::Cursor c(text);
    try {
        auto d = read_distribution(c);
        if (!c.at_end()) c.fail("trailing characters");
        return d;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InvalidDistribution) throw Error(ErrorKind::ConfigError, e.what());
        throw;
    }
}

double parse_number(std::string_view text) {
    detail::Cursor c(text);
    const double v = c.expression();
    if (!c.at_end()) c.fail("trailing characters");
    return v;
}

}  // namespace repcap

#pragma once

#include "repcap/error.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>

namespace repcap::detail {

/// Hand-rolled recursive-descent reader shared by the distribution and
/// policy literal grammars. Numbers may be arithmetic expressions so that
/// sweep substitutions like `1-0.1` stay readable.
class Cursor {
public:
    explicit Cursor(std::string_view text) : text_(text) {}

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool at_end() {
        skip_ws();
        return pos_ >= text_.size();
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    bool accept(char c) {
        if (peek() != c) return false;
        ++pos_;
        return true;
    }

    bool accept(std::string_view word) {
        skip_ws();
        if (text_.substr(pos_, word.size()) != word) return false;
        pos_ += word.size();
        return true;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    std::string identifier() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' || text_[pos_] == '-'))
            ++pos_;
        if (start == pos_) fail("expected identifier");
        return std::string(text_.substr(start, pos_ - start));
    }

    // expr := term (('+'|'-') term)*
    double expression() {
        double v = term();
        for (;;) {
            if (accept('+')) v += term();
            else if (peek() == '-' && !arrow_ahead()) {
                ++pos_;
                v -= term();
            } else return v;
        }
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorKind::ConfigError,
                    what + " at offset " + std::to_string(pos_) + " in '" + std::string(text_) + "'");
    }

    std::size_t position() const { return pos_; }

private:
    bool arrow_ahead() const { return pos_ + 1 < text_.size() && text_[pos_ + 1] == '>'; }

    double term() {
        double v = factor();
        for (;;) {
            if (accept('*')) v *= factor();
            else if (accept('/')) v /= factor();
            else return v;
        }
    }

    double factor() {
        if (accept('-')) return -factor();
        if (accept('+')) return factor();
        if (accept('(')) {
            const double v = expression();
            expect(')');
            return v;
        }
        if (accept("inf")) return std::numeric_limits<double>::infinity();
        skip_ws();
        double v = 0.0;
        const char* first = text_.data() + pos_;
        const char* last = text_.data() + text_.size();
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr == first) fail("expected number");
        pos_ += static_cast<std::size_t>(ptr - first);
        return v;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace repcap::detail

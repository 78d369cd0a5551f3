#include "pfdlab/units.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace pfdlab {

namespace {

double parse_number(std::string_view text, std::string_view what) {
    std::string s(text);
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("invalid " + std::string(what) + ": '" + s + "'");
    }
    if (used != s.size()) throw std::invalid_argument("invalid " + std::string(what) + ": '" + s + "'");
    return v;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

Fs parse_time(std::string_view text) {
    struct Suffix {
        std::string_view name;
        double scale;
    };
    static constexpr Suffix kSuffixes[] = {{"fs", 1.0}, {"ps", 1e3}, {"ns", 1e6}, {"us", 1e9}};
    for (const auto& [name, scale] : kSuffixes) {
        if (ends_with(text, name)) {
            double v = parse_number(text.substr(0, text.size() - name.size()), "time");
            return static_cast<Fs>(std::llround(v * scale));
        }
    }
    return static_cast<Fs>(std::llround(parse_number(text, "time")));
}

double parse_phase(std::string_view text) {
    if (ends_with(text, "pi")) {
        auto head = text.substr(0, text.size() - 2);
        if (head.empty() || head == "+") return kPi;
        if (head == "-") return -kPi;
        return parse_number(head, "phase") * kPi;
    }
    return parse_number(text, "phase");
}

std::string format_ps(Fs t, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f ps", decimals, to_ps(t));
    return buf;
}

}  // namespace pfdlab

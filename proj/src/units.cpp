#include "ldosim/units.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

namespace ldosim {

std::optional<double> parse_si(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    if (text.empty()) return std::nullopt;

    // strtod accepts forms from_chars rejects (leading '+'), so go through a string.
    const std::string buffer(text);
    char* end = nullptr;
    const double value = std::strtod(buffer.c_str(), &end);
    if (end == buffer.c_str()) return std::nullopt;
    std::string rest(end);
    for (char& c : rest) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (rest.empty()) return value;
    if (!std::isalpha(static_cast<unsigned char>(rest.front()))) return std::nullopt;

    int scale = 0;
    if (rest.starts_with("meg")) {
        scale = 6;
    } else {
        switch (rest.front()) {
            case 'f': scale = -15; break;
            case 'p': scale = -12; break;
            case 'n': scale = -9; break;
            case 'u': scale = -6; break;
            case 'm': scale = -3; break;
            case 'k': scale = 3; break;
            case 'g': scale = 9; break;
            case 't': scale = 12; break;
            default: return value;  // bare unit such as "V", "A", "Hz", "s"
        }
    }
    // Fold the suffix into the decimal exponent so "0.23m" parses exactly like "0.23e-3".
    std::string number = buffer.substr(0, static_cast<std::size_t>(end - buffer.c_str()));
    long exponent = 0;
    if (const auto e = number.find_first_of("eE");
        e != std::string::npos && number.find_first_of("xX") == std::string::npos) {
        exponent = std::strtol(number.c_str() + e + 1, nullptr, 10);
        number.resize(e);
    }
    if (!std::isfinite(value)) return value;
    if (number.find_first_of("xX") != std::string::npos) return value * std::pow(10.0, scale);
    return std::strtod((number + 'e' + std::to_string(exponent + scale)).c_str(), nullptr);
}

std::string format_sci(double value, int digits) {
    char buf[64];
    if (value == 0.0) value = 0.0;  // drop the sign of -0
    std::snprintf(buf, sizeof buf, "%.*e", digits - 1, value);
    return buf;
}

}  // namespace ldosim

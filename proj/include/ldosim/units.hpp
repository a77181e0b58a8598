#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace ldosim {

/// Parses a number with an optional SI suffix: f, p, n, u, m, k, meg, g, t
/// (case-insensitive; `m` is milli, `meg` is mega). Trailing unit letters
/// after the suffix are ignored, so "160pF" and "1.5V" parse. Returns
/// nullopt when the leading part is not a number.
std::optional<double> parse_si(std::string_view text);

/// Scientific notation with `digits` significant digits, e.g. 1.23456789e-03.
std::string format_sci(double value, int digits = 9);

}  // namespace ldosim

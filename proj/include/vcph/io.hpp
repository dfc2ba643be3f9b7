#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vcph::io {

// 17 significant digits, enough for an exact round trip of any double.
std::string format_double(double x);
// Shortest form that still round-trips, for labels.
std::string format_short(double x);

// Strict decimal parse: no blanks, no NA, no inf/nan, whole field consumed.
std::optional<double> parse_double(std::string_view field);

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',');
std::string_view trim(std::string_view s);

} // namespace vcph::io

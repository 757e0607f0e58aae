#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ttpp {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// Strict full-string number parsing; throws std::invalid_argument.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

}  // namespace ttpp

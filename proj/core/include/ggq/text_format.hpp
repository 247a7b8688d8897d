#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ggq {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

/// Parses a full-precision decimal; throws ParseError on trailing garbage.
double parse_double(std::string_view text);
long long parse_integer(std::string_view text);

std::vector<std::string_view> split_fields(std::string_view line, char delimiter = ',');
std::string_view trim(std::string_view text);

}  // namespace ggq

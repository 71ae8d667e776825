#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fieldcal::textio {

// Shortest decimal form that parses back to the identical double.
std::string fmt(double v);

// Strict numeric parsing; the whole token must be consumed.
double parse_double(std::string_view tok);
long long parse_int(std::string_view tok);

std::string_view trim(std::string_view s);
std::string_view strip_comment(std::string_view s);
std::vector<std::string> split_ws(std::string_view line);

}  // namespace fieldcal::textio

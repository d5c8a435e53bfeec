#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace babylon::runtime {

// Number to text the way JavaScript's Number#toString does it.
std::string format_number(double value);

// Text to number: surrounding whitespace ignored, empty text is 0, anything
// unparsable is NaN.
double parse_number(std::string_view text);

std::int32_t to_int32(double value);

}  // namespace babylon::runtime

#include "babylon/runtime/numbers.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <system_error>

namespace babylon::runtime {

std::string format_number(double value) {
  if (std::isnan(value)) return "NaN";
  if (std::isinf(value)) return value > 0 ? "Infinity" : "-Infinity";
  if (value == 0) return "0";
  std::string sign = value < 0 ? "-" : "";
  double magnitude = std::fabs(value);

  // Shortest round-trip digits in scientific form: d[.ddd]e[+-]x
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, magnitude, std::chars_format::scientific);
  std::string sci(buf, res.ptr);
  std::size_t e_pos = sci.find('e');
  std::string digits;
  for (std::size_t i = 0; i < e_pos; ++i) {
    if (sci[i] != '.') digits.push_back(sci[i]);
  }
  int exponent = std::stoi(sci.substr(e_pos + 1));
  int k = static_cast<int>(digits.size());
  int n = exponent + 1;  // position of the decimal point

  std::string out;
  if (k <= n && n <= 21) {
    out = digits + std::string(static_cast<std::size_t>(n - k), '0');
  } else if (0 < n && n <= 21) {
    out = digits.substr(0, static_cast<std::size_t>(n)) + "." + digits.substr(static_cast<std::size_t>(n));
  } else if (-6 < n && n <= 0) {
    out = "0." + std::string(static_cast<std::size_t>(-n), '0') + digits;
  } else {
    int e = n - 1;
    out = digits.substr(0, 1);
    if (k > 1) out += "." + digits.substr(1);
    out += e >= 0 ? "e+" : "e-";
    out += std::to_string(e >= 0 ? e : -e);
  }
  return sign + out;
}

double parse_number(std::string_view text) {
  std::size_t b = text.find_first_not_of(" \t\n\r");
  if (b == std::string_view::npos) return 0.0;
  std::size_t e = text.find_last_not_of(" \t\n\r");
  std::string_view t = text.substr(b, e - b + 1);
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  bool negative = false;
  std::string_view body = t;
  if (!body.empty() && (body[0] == '-' || body[0] == '+')) {
    negative = body[0] == '-';
    body.remove_prefix(1);
  }
  if (body == "Infinity") return negative ? -INFINITY : INFINITY;
  if (body.size() > 2 && body[0] == '0' && (body[1] == 'x' || body[1] == 'X')) {
    if (t.size() != body.size()) return nan;
    unsigned long long v = 0;
    auto r = std::from_chars(body.data() + 2, body.data() + body.size(), v, 16);
    if (r.ec != std::errc() || r.ptr != body.data() + body.size()) return nan;
    return static_cast<double>(v);
  }
  if (body.empty() || !(std::isdigit(static_cast<unsigned char>(body[0])) || body[0] == '.')) return nan;
  double v = 0;
  auto r = std::from_chars(body.data(), body.data() + body.size(), v);
  if (r.ec != std::errc() || r.ptr != body.data() + body.size()) return nan;
  return negative ? -v : v;
}

std::int32_t to_int32(double value) {
  if (!std::isfinite(value) || value == 0) return 0;
  double t = std::trunc(value);
  double m = std::fmod(t, 4294967296.0);
  if (m < 0) m += 4294967296.0;
  auto u = static_cast<std::uint32_t>(m);
  return static_cast<std::int32_t>(u);
}

}  // namespace babylon::runtime

#pragma once

#include <array>
#include <compare>
#include <string>

namespace babylon::lang {

// Line is 1-based, column is 0-based and counts code points.
struct SourcePos {
  int line = 1;
  int column = 0;

  auto operator<=>(const SourcePos&) const = default;
};

// End column is exclusive.
struct SourceSpan {
  SourcePos start;
  SourcePos end;

  bool contains(const SourceSpan& other) const {
    return start <= other.start && other.end <= end;
  }
  auto operator<=>(const SourceSpan&) const = default;
};

using LocationKey = std::array<int, 4>;

// [start_line, start_column, end_line, end_column]
inline LocationKey location_key(const SourceSpan& span) {
  return {span.start.line, span.start.column, span.end.line, span.end.column};
}

std::string to_string(const SourceSpan& span);

}  // namespace babylon::lang

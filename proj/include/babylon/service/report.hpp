#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "babylon/session/session.hpp"

namespace babylon::service {

using session::EvaluationReport;

struct StructuredOptions {
  bool timings = false;  // elapsed_ms and the phase timings vary run to run
};

// Canonical report document; object keys are sorted. Schema in
// docs/report-schema.md.
nlohmann::json structured_report(const EvaluationReport& report, const StructuredOptions& options = {});
std::string structured_text(const EvaluationReport& report, const StructuredOptions& options = {});

// Module name and source text, in output order.
using ModuleSources = std::vector<std::pair<std::string, std::string>>;

// Source with result lines interleaved after the line they describe:
//   » label: <example> v1 | v2     probe row
//   ≡ 3 iterations (<example>)     slider row
//   ✓ name: -1  ✗ name: msg  ∞ name: timeout  ○ name
//   ↳ text                         example output, one line each
//   ⚠ message                      module diagnostic
// Faded lines are prefixed with "· ". Headers "══ name" separate modules
// when there is more than one.
std::string annotated_text(const EvaluationReport& report, const ModuleSources& sources);

// Inverse of annotated_text: the byte-exact sources. The module name is
// empty when the text has no header.
ModuleSources strip_annotated(std::string_view text);

// Exit status of a headless run: 2 for invalid inputs, 1 if an enabled
// example failed, else 0.
int exit_code(const EvaluationReport& report);

}  // namespace babylon::service

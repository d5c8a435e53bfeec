#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "babylon/session/session.hpp"
#include "support/fixtures.hpp"

namespace babylon::testing {

// "search/binary_search.baby" -> "binary_search".
inline std::string module_of(const std::string& relative) {
  std::string name = relative.substr(relative.find_last_of('/') + 1);
  return name.substr(0, name.rfind('.'));
}

// Shared templates and resources plus the given fixture modules.
inline void load_fixtures(session::Session& s, const std::vector<std::string>& files) {
  s.set_templates(read_fixture("templates.babytpl"));
  auto resources = nlohmann::json::parse(read_fixture("resources.json"));
  for (auto& [name, spec] : resources.items()) s.set_resource(name, session::ResourceSpec::from_json(spec));
  for (const std::string& f : files) s.update_source(module_of(f), read_fixture(f));
}

// Rendered values a probe showed for one example, in capture order.
inline std::vector<std::string> probe_values(const session::EvaluationReport& r, const std::string& probe,
                                             const std::string& example) {
  std::vector<std::string> out;
  const session::ProbeReport* p = r.probe(probe);
  if (!p) return out;
  for (const auto& row : p->rows) {
    if (row.example_id != example) continue;
    for (const auto& pt : row.points) out.push_back(runtime::render(*pt.shown()));
  }
  return out;
}

// Probe ID of the first probe in `module` whose source line is `line` and
// whose label is `label`.
inline std::string probe_at(const session::EvaluationReport& r, const std::string& module, int line,
                            const std::string& label) {
  for (const auto& p : r.probes) {
    if (p.module == module && p.span.start.line == line && p.label == label) return p.id;
  }
  return {};
}

}  // namespace babylon::testing

#include "babylon/service/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <tuple>

namespace babylon::service {

using nlohmann::json;
using session::ExampleReport;
using session::ModuleReport;

namespace {

json span_json(const lang::SourceSpan& span) {
  auto key = lang::location_key(span);
  return json::array({key[0], key[1], key[2], key[3]});
}

json snapshot_json(const runtime::SnapshotPtr& s) { return s ? runtime::to_json(*s) : json(nullptr); }

json lines_json(const std::set<int>& lines) { return json(std::vector<int>(lines.begin(), lines.end())); }

json module_json(const ModuleReport& m) {
  json j;
  j["name"] = m.name;
  j["in_scope"] = m.in_scope;
  j["stale"] = m.stale;
  if (m.parse_error) {
    j["parse_error"] = {{"message", *m.parse_error},
                        {"span", m.parse_error_span ? span_json(*m.parse_error_span) : json(nullptr)}};
  } else {
    j["parse_error"] = nullptr;
  }
  j["diagnostics"] = m.diagnostics;
  j["executable_lines"] = lines_json(m.executable_lines);
  j["faded_lines"] = lines_json(m.faded_lines);
  return j;
}

json example_json(const ExampleReport& e, const StructuredOptions& options) {
  json j;
  j["id"] = e.id;
  j["module"] = e.module;
  j["name"] = e.name;
  j["callable"] = e.callable;
  j["color_index"] = e.color_index;
  j["enabled"] = e.enabled;
  j["span"] = span_json(e.span);
  j["status"] = e.status ? json(std::string(runtime::status_name(*e.status))) : json(nullptr);
  j["error_message"] = e.error_message ? json(*e.error_message) : json(nullptr);
  j["return"] = snapshot_json(e.return_snapshot);
  j["output_log"] = e.output_log;
  json coverage = json::object();
  for (const auto& [module, lines] : e.coverage_lines) coverage[module] = lines_json(lines);
  j["coverage_lines"] = coverage;
  j["stale"] = e.stale;
  if (options.timings) j["elapsed_ms"] = e.elapsed_ms;
  return j;
}

json probe_json(const session::ProbeReport& p) {
  json rows = json::array();
  for (const auto& row : p.rows) {
    json points = json::array();
    for (const auto& pt : row.points) {
      json iterations = json::array();
      for (const auto& [slider, n] : pt.iterations) iterations.push_back({slider, n});
      points.push_back({{"before", snapshot_json(pt.before)},
                        {"after", snapshot_json(pt.after)},
                        {"iterations", iterations},
                        {"text", runtime::render_point(pt)}});
    }
    rows.push_back({{"example_id", row.example_id},
                    {"example_name", row.example_name},
                    {"color_index", row.color_index},
                    {"points", points}});
  }
  return {{"id", p.id},       {"module", p.module}, {"label", p.label}, {"kind", p.kind},
          {"span", span_json(p.span)}, {"rows", rows}, {"stale", p.stale}};
}

json slider_json(const session::SliderReport& s) {
  json iterations = json::object();
  for (const auto& [example, n] : s.iterations) iterations[example] = n;
  return {{"id", s.id},     {"module", s.module},         {"label", s.label},
          {"span", span_json(s.span)}, {"iterations", iterations}, {"stale", s.stale}};
}

}  // namespace

json structured_report(const EvaluationReport& report, const StructuredOptions& options) {
  json j;
  j["revision"] = report.revision;
  j["execution_order"] = report.execution_order;
  json loads = json::object();
  for (const auto& [module, n] : report.load_counts) loads[module] = n;
  j["load_counts"] = loads;
  j["modules"] = json::array();
  for (const auto& m : report.modules) j["modules"].push_back(module_json(m));
  j["examples"] = json::array();
  for (const auto& e : report.examples) j["examples"].push_back(example_json(e, options));
  j["probes"] = json::array();
  for (const auto& p : report.probes) j["probes"].push_back(probe_json(p));
  j["sliders"] = json::array();
  for (const auto& s : report.sliders) j["sliders"].push_back(slider_json(s));
  j["inputs_valid"] = report.inputs_valid();
  j["examples_ok"] = report.examples_ok();
  if (options.timings) {
    const auto& t = report.timings;
    j["timings"] = {{"parse_ms", t.parse_ms},
                    {"transform_ms", t.transform_ms},
                    {"execute_ms", t.execute_ms},
                    {"update_ms", t.update_ms},
                    {"adaptation_ms", t.adaptation_ms()},
                    {"emergence_ms", t.emergence_ms()}};
  }
  return j;
}

std::string structured_text(const EvaluationReport& report, const StructuredOptions& options) {
  return structured_report(report, options).dump(2) + "\n";
}

namespace {

constexpr std::string_view kFaded = "· ";
constexpr std::string_view kHeader = "══ ";
constexpr std::string_view kNoNewline = "⏎ no newline at end of file";
constexpr std::array<std::string_view, 10> kMarkers = {"»", "≡", "✓", "✗", "∞", "○", "↳", "⚠", "══", "⏎"};

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

std::string_view trim_start(std::string_view s) {
  std::size_t i = s.find_first_not_of(" \t");
  return i == std::string_view::npos ? std::string_view{} : s.substr(i);
}

bool is_result_line(std::string_view line) {
  std::string_view t = trim_start(line);
  return std::any_of(kMarkers.begin(), kMarkers.end(), [&](std::string_view m) { return starts_with(t, m); });
}

bool needs_escape(std::string_view line) {
  return starts_with(line, "\\") || starts_with(line, kFaded) || is_result_line(line);
}

std::string one_line(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '\n') out += "\\n";
    else if (c == '\r') out += "\\r";
    else out += c;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text, bool& ends_with_newline) {
  std::vector<std::string_view> lines;
  ends_with_newline = !text.empty() && text.back() == '\n';
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

struct Row {
  int line;
  int rank;
  int column;
  int order;
  std::string text;
};

std::string example_row(const ExampleReport& e) {
  std::string stale = e.stale ? " (stale)" : "";
  if (!e.enabled || !e.status) return fmt::format("○ {}{}", e.name, stale);
  switch (*e.status) {
    case runtime::ExampleOutcome::Status::Ok:
      return fmt::format("✓ {}: {}{}", e.name,
                         e.return_snapshot ? runtime::render(*e.return_snapshot) : std::string("undefined"), stale);
    case runtime::ExampleOutcome::Status::Error:
      return fmt::format("✗ {}: {}{}", e.name, one_line(e.error_message.value_or("error")), stale);
    case runtime::ExampleOutcome::Status::Timeout:
      return fmt::format("∞ {}: {}{}", e.name, one_line(e.error_message.value_or("timeout")), stale);
  }
  return {};
}

std::vector<Row> module_rows(const EvaluationReport& report, const std::string& module) {
  std::vector<Row> rows;
  int order = 0;
  auto add = [&](int line, int rank, int column, std::string text) {
    rows.push_back({line, rank, column, order++, std::move(text)});
  };
  if (const ModuleReport* m = report.module(module)) {
    if (m->parse_error) {
      std::string where = m->parse_error_span ? lang::to_string(*m->parse_error_span) + ": " : "";
      add(0, 0, 0, fmt::format("⚠ parse error: {}{}", where, one_line(*m->parse_error)));
    }
    if (m->stale) add(0, 0, 0, "⚠ stale: results of the last successful parse");
    for (const auto& d : m->diagnostics) add(0, 0, 0, "⚠ " + one_line(d));
  }
  for (const auto& e : report.examples) {
    if (e.module != module) continue;
    add(e.span.end.line, 0, e.span.start.column, example_row(e));
    for (const auto& entry : e.output_log) add(e.span.end.line, 0, e.span.start.column, "↳ " + one_line(entry));
  }
  for (const auto& s : report.sliders) {
    if (s.module != module) continue;
    std::string stale = s.stale ? " (stale)" : "";
    if (s.iterations.empty()) add(s.span.start.line, 1, s.span.start.column, "≡ 0 iterations" + stale);
    for (const auto& e : report.examples) {
      auto it = s.iterations.find(e.id);
      if (it == s.iterations.end()) continue;
      add(s.span.start.line, 1, s.span.start.column, fmt::format("≡ {} iterations ({}){}", it->second, e.name, stale));
    }
  }
  for (const auto& p : report.probes) {
    if (p.module != module) continue;
    std::string stale = p.stale ? " (stale)" : "";
    for (const auto& row : p.rows) {
      std::vector<std::string> values;
      for (const auto& pt : row.points) values.push_back(one_line(runtime::render_point(pt)));
      add(p.span.start.line, 2, p.span.start.column,
          fmt::format("» {}: {} {}{}", p.label, row.example_name, fmt::join(values, " | "), stale));
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.line, a.rank, a.column, a.order) < std::tie(b.line, b.rank, b.column, b.order);
  });
  return rows;
}

std::string leading_whitespace(std::string_view line) {
  std::size_t i = line.find_first_not_of(" \t");
  return std::string(line.substr(0, i == std::string_view::npos ? line.size() : i));
}

}  // namespace

std::string annotated_text(const EvaluationReport& report, const ModuleSources& sources) {
  std::string out;
  const bool headers = sources.size() > 1;
  for (std::size_t k = 0; k < sources.size(); ++k) {
    const auto& [name, text] = sources[k];
    const bool last_module = k + 1 == sources.size();
    if (headers) out += fmt::format("{}{}\n", kHeader, name);
    bool ends_nl = false;
    std::vector<std::string_view> lines = split_lines(text, ends_nl);
    std::vector<Row> rows = module_rows(report, name);
    const ModuleReport* m = report.module(name);
    std::size_t r = 0;
    auto emit_rows_through = [&](int line, const std::string& indent) {
      for (; r < rows.size() && rows[r].line <= line; ++r) out += indent + rows[r].text + "\n";
    };
    emit_rows_through(0, "");
    bool newline_added = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      int line_no = static_cast<int>(i) + 1;
      std::string_view line = lines[i];
      if (m && m->faded_lines.count(line_no)) out += kFaded;
      if (needs_escape(line)) out += "\\";
      out += line;
      const bool final_line = i + 1 == lines.size();
      const bool rows_follow = r < rows.size();
      if (!final_line || ends_nl || rows_follow || !last_module) {
        out += "\n";
        newline_added = final_line && !ends_nl;
      }
      emit_rows_through(line_no, leading_whitespace(line));
    }
    emit_rows_through(std::numeric_limits<int>::max(), "");
    if (newline_added) out += std::string(kNoNewline) + "\n";
  }
  return out;
}

ModuleSources strip_annotated(std::string_view text) {
  ModuleSources out;
  auto current = [&]() -> std::string& {
    if (out.empty()) out.emplace_back("", "");
    return out.back().second;
  };
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    bool terminated = nl != std::string_view::npos;
    std::string_view line = text.substr(start, terminated ? nl - start : std::string_view::npos);
    start = terminated ? nl + 1 : text.size();

    bool source_line = true;
    if (starts_with(line, kFaded)) {
      line.remove_prefix(kFaded.size());
      if (starts_with(line, "\\")) line.remove_prefix(1);
    } else if (starts_with(line, "\\")) {
      line.remove_prefix(1);
    } else if (is_result_line(line)) {
      source_line = false;
    }
    if (source_line) {
      std::string& s = current();
      s += line;
      if (terminated) s += '\n';
    } else if (starts_with(line, kHeader)) {
      out.emplace_back(std::string(line.substr(kHeader.size())), "");
    } else if (line == kNoNewline) {
      std::string& s = current();
      if (!s.empty() && s.back() == '\n') s.pop_back();
    }
  }
  if (out.empty()) out.emplace_back("", "");
  return out;
}

int exit_code(const EvaluationReport& report) {
  if (!report.inputs_valid()) return 2;
  if (!report.examples_ok()) return 1;
  return 0;
}

}  // namespace babylon::service

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "babylon/lang/parser.hpp"
#include "babylon/runtime/numbers.hpp"
#include "babylon/runtime/runtime.hpp"
#include "babylon/session/session.hpp"
#include "support/oracle.hpp"
#include "support/session_support.hpp"

using namespace babylon;
using runtime::ExampleOutcome;
using session::EvaluationReport;
using session::Session;
using testing::load_fixtures;
using testing::module_of;
using testing::probe_at;
using testing::probe_values;
using testing::read_fixture;

namespace {

using Strings = std::vector<std::string>;

std::shared_ptr<const EvaluationReport> evaluate(const Strings& files, session::SessionConfig config = {}) {
  Session s(config);
  load_fixtures(s, files);
  return s.evaluate();
}

const session::ExampleReport& example(const EvaluationReport& r, const std::string& module, const std::string& name) {
  const session::ExampleReport* e = r.example_named(module, name);
  REQUIRE(e != nullptr);
  return *e;
}

std::string returned(const session::ExampleReport& e) {
  REQUIRE(e.return_snapshot != nullptr);
  return runtime::render(*e.return_snapshot);
}

const std::vector<Strings> kScenarios = {
    {"search/binary_search.baby"},
    {"search/recursive_search.baby"},
    {"simple/simple.baby", "simple/person.baby"},
    {"annotations/annotations.baby"},
    {"self/ast.baby", "self/location-converter.baby"},
    {"timeout/timeout.baby"},
    {"cycle/cycle_a.baby", "cycle/cycle_b.baby"},
    {"canvas/tree_scene.baby"},
    {"complex/expression.baby", "complex/symbols.baby"},
};

testing::CleanInputs clean_inputs(const Strings& files) {
  testing::CleanInputs in;
  for (const auto& f : files) in.sources[module_of(f)] = read_fixture(f);
  in.templates = read_fixture("templates.babytpl");
  in.resources = nlohmann::json::parse(read_fixture("resources.json"));
  return in;
}

}  // namespace

TEST_CASE("binary search golden trace") {
  auto r = evaluate({"search/binary_search.baby"});
  const auto& e = example(*r, "binary_search", "Not Found");
  CHECK(e.status == ExampleOutcome::Status::Ok);
  CHECK(returned(e) == "-1");
  CHECK(probe_values(*r, probe_at(*r, "binary_search", 7, "low"), e.id) == Strings{"0", "3", "5"});
  CHECK(probe_values(*r, probe_at(*r, "binary_search", 7, "high"), e.id) == Strings{"5", "5", "5"});
  CHECK(probe_values(*r, probe_at(*r, "binary_search", 7, "mid"), e.id) == Strings{"2", "4", "5"});
  CHECK(probe_values(*r, probe_at(*r, "binary_search", 8, "value"), e.id) == Strings{"\"c\"", "\"e\"", "\"f\""});
  CHECK(probe_values(*r, probe_at(*r, "binary_search", 19, "return"), e.id) == Strings{"-1"});
  REQUIRE(r->sliders.size() == 1);
  CHECK(r->sliders[0].iterations.at(e.id) == 3);
}

TEST_CASE("iteration vectors index every capture") {
  Session s;
  load_fixtures(s, {"search/binary_search.baby"});
  auto r = s.evaluate();
  std::string mid = probe_at(*r, "binary_search", 7, "mid");
  std::string slider = r->sliders[0].id;
  auto events = runtime::query_probe(*r->trace, mid, std::string("binary_search#0"), std::make_pair(slider, 2));
  REQUIRE(events.size() == 1);
  CHECK(runtime::render(*events[0].snapshot) == "4");
  CHECK(events[0].iteration_vector == runtime::IterationVector{{slider, 2}});
}

TEST_CASE("recursive search") {
  auto r = evaluate({"search/recursive_search.baby"});
  const auto& nf = example(*r, "recursive_search", "Not Found");
  const auto& found = example(*r, "recursive_search", "Found");
  REQUIRE(r->sliders.size() == 1);
  CHECK(r->sliders[0].iterations.at(nf.id) == 4);
  CHECK(r->sliders[0].iterations.at(found.id) == 2);
  CHECK(probe_values(*r, probe_at(*r, "recursive_search", 4, "low"), nf.id) == Strings{"0", "3", "5", "6"});

  // Index of "e" by direct search, and by a clean run.
  Strings letters = {"a", "b", "c", "d", "e", "f"};
  auto index = std::find(letters.begin(), letters.end(), "e") - letters.begin();
  CHECK(returned(found) == std::to_string(index));
  auto clean = testing::clean_run(clean_inputs({"search/recursive_search.baby"}));
  REQUIRE(clean.size() == 2);
  CHECK(clean[0].name == "Found");
  CHECK(clean[0].rendered_return == "4");
  CHECK(clean[0].calls.at("search") == 2);
  CHECK(clean[1].calls.at("search") == 4);
}

TEST_CASE("replacement") {
  auto r = evaluate({"annotations/annotations.baby"});
  const auto& e = example(*r, "annotations", "Convert");
  CHECK(probe_values(*r, probe_at(*r, "annotations", 32, "fahrenheit"), e.id) == Strings{"75.2"});
  CHECK(returned(e) == "75.2");
}

TEST_CASE("member probes show before and after") {
  auto r = evaluate({"annotations/annotations.baby"});
  const auto& e = example(*r, "annotations", "David");
  const auto* p = r->probe(probe_at(*r, "annotations", 3, "person.hobby"));
  REQUIRE(p != nullptr);
  REQUIRE(p->rows.size() == 1);
  REQUIRE(p->rows[0].points.size() == 1);
  CHECK(runtime::render_point(p->rows[0].points[0]) == "\"debugging\" → \"testing\"");
  CHECK(returned(e) == "{name: \"David\", hobby: \"testing\"}");
}

TEST_CASE("nested sliders and compound assignment") {
  auto r = evaluate({"annotations/annotations.baby"});
  const auto& sums = example(*r, "annotations", "Sums");
  CHECK(returned(sums) == "25");
  CHECK(probe_values(*r, probe_at(*r, "annotations", 21, "outerSum"), sums.id) == Strings{"0", "1", "3", "6", "10"});
  CHECK(probe_values(*r, probe_at(*r, "annotations", 23, "innerSum"), sums.id).size() == 15);
  int outer = 0, inner = 0;
  for (const auto& sl : r->sliders) {
    if (sl.span.start.line == 20) outer = sl.iterations.at(sums.id);
    if (sl.span.start.line == 22) inner = sl.iterations.at(sums.id);
  }
  CHECK(outer == 5);
  CHECK(inner == 15);
  CHECK(returned(example(*r, "annotations", "Powers of 2")) == "4294967296");
}

TEST_CASE("prescript and postscript") {
  auto r = evaluate({"annotations/annotations.baby"});
  const auto& e = example(*r, "annotations", "Greeting");
  CHECK(returned(e) == "\"Hello, Ada!\"");
  CHECK(e.output_log == Strings{"Hello, Ada!", "done"});
}

TEST_CASE("location key golden") {
  auto r = evaluate({"self/ast.baby", "self/location-converter.baby"});
  const auto& e = example(*r, "location-converter", "Normal");
  CHECK(e.status == ExampleOutcome::Status::Ok);
  CHECK(returned(e) == "[4, 5, 6, 7]");
}

TEST_CASE("location map traverses in pre-order") {
  auto r = evaluate({"self/ast.baby", "self/location-converter.baby"});
  const auto& e = example(*r, "ast", "Fibonacci");
  std::string type_probe = probe_at(*r, "ast", 32, "path.type");
  REQUIRE_FALSE(type_probe.empty());

  lang::IdentifiedAst tree = lang::parse_module(
      "function fib(n) {\n  if (n < 2) {\n    return n;\n  }\n  return fib(n - 1) + fib(n - 2);\n}", "fib");
  Strings preorder;
  std::vector<const lang::Node*> stack = {&tree.root()};
  while (!stack.empty()) {
    const lang::Node* n = stack.back();
    stack.pop_back();
    if (n->has_span) preorder.push_back("\"" + std::string(lang::kind_name(n->kind)) + "\"");
    for (auto it = n->children.rbegin(); it != n->children.rend(); ++it) stack.push_back(&*it);
  }
  CHECK(probe_values(*r, type_probe, e.id) == preorder);
}

TEST_CASE("error isolation") {
  auto r = evaluate({"self/ast.baby", "self/location-converter.baby"});
  const auto& bad = example(*r, "ast", "Not an AST");
  CHECK(bad.status == ExampleOutcome::Status::Error);
  CHECK(bad.error_message == "Cannot set properties of text (setting '_locationMap')");
  CHECK(example(*r, "ast", "Simple").status == ExampleOutcome::Status::Ok);
  CHECK(example(*r, "ast", "Fibonacci").status == ExampleOutcome::Status::Ok);
}

TEST_CASE("cross-module attribution") {
  auto r = evaluate({"self/ast.baby", "self/location-converter.baby"});
  std::string probe = probe_at(*r, "location-converter", 4, "return");
  std::set<std::string> tagged;
  for (const auto& ev : r->trace->events()) {
    if (ev.probe_id == probe) tagged.insert(ev.example_id);
  }
  std::set<std::string> expected = {example(*r, "ast", "Simple").id, example(*r, "ast", "Fibonacci").id,
                                    example(*r, "location-converter", "Normal").id};
  CHECK(tagged == expected);
}

TEST_CASE("timeout") {
  auto r = evaluate({"timeout/timeout.baby"});
  const auto& spin = example(*r, "timeout", "Spin");
  CHECK(spin.status == ExampleOutcome::Status::Timeout);
  CHECK(spin.elapsed_ms >= 500);
  CHECK(spin.elapsed_ms < 1000);
  CHECK(returned(example(*r, "timeout", "Before")) == "9");
  CHECK(returned(example(*r, "timeout", "After")) == "64");
}

TEST_CASE("import cycles load each module once") {
  auto r = evaluate({"cycle/cycle_a.baby", "cycle/cycle_b.baby"});
  CHECK(r->load_counts.at("cycle_a") == 1);
  CHECK(r->load_counts.at("cycle_b") == 1);
  for (const auto& e : r->examples) CHECK(e.status == ExampleOutcome::Status::Ok);
}

TEST_CASE("diamond imports") {
  Session s;
  s.update_source("top", "import {left} from \"./left.baby\";\nimport {right} from \"./right.baby\";\n"
                         "/*@example {\"name\":\"Both\",\"params\":{}}*/\nfunction both() {\n  return left() + right();\n}");
  s.update_source("left", "import {base} from \"./base.baby\";\nexport function left() {\n  return base() + 1;\n}");
  s.update_source("right", "import {base} from \"./base.baby\";\nexport function right() {\n  return base() + 2;\n}");
  s.update_source("base", "var loads = 0;\nloads = loads + 1;\nexport function base() {\n  return loads * 10;\n}");
  auto r = s.evaluate();
  CHECK(r->load_counts.at("base") == 1);
  CHECK(returned(example(*r, "top", "Both")) == "23");
  CHECK(r->execution_order.back() == "top");
}

TEST_CASE("snapshots") {
  Session s;
  s.update_source("m",
                  "/*@example {\"name\":\"Cycle\",\"params\":{}}*/\nfunction cycle() {\n  let a = {name: \"a\"};\n"
                  "  a.self = a;\n  return a;\n}\n"
                  "/*@example {\"name\":\"Deep\",\"params\":{}}*/\nfunction deep() {\n  return {a: {b: {c: {d: 1}}}};\n}\n"
                  "/*@example {\"name\":\"Mutate\",\"params\":{}}*/\nfunction mutate() {\n  let list = [1];\n"
                  "  let /*@probe*/copy = list;\n  list.push(2);\n  return list;\n}\n"
                  "/*@example {\"name\":\"Same\",\"params\":{}}*/\nfunction same() {\n  let o = {};\n"
                  "  return [o, o, {}];\n}");
  auto r = s.evaluate();
  CHECK(returned(example(*r, "m", "Cycle")) == "{name: \"a\", self: {cycle}}");
  CHECK(returned(example(*r, "m", "Deep")) == "{a: {b: {c: {…}}}}");
  const auto& m = example(*r, "m", "Mutate");
  CHECK(probe_values(*r, probe_at(*r, "m", 14, "copy"), m.id) == Strings{"[1]"});
  CHECK(returned(m) == "[1, 2]");
  const auto& same = example(*r, "m", "Same").return_snapshot;
  REQUIRE(same->fields.size() == 3);
  CHECK(same->fields[0].second->identity_id == same->fields[1].second->identity_id);
  CHECK(same->fields[0].second->identity_id != same->fields[2].second->identity_id);

  session::SessionConfig deeper;
  deeper.snapshot_depth = 5;
  s.set_config(deeper);
  r = s.evaluate();
  CHECK(returned(example(*r, "m", "Deep")) == "{a: {b: {c: {d: 1}}}}");
}

TEST_CASE("number formatting") {
  using runtime::format_number;
  CHECK(format_number(75.2) == "75.2");
  CHECK(format_number(-1) == "-1");
  CHECK(format_number(0.1 + 0.2) == "0.30000000000000004");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(1e21) == "1e+21");
  CHECK(format_number(123456789012345680000.0) == "123456789012345680000");
  CHECK(format_number(1e-7) == "1e-7");
  CHECK(format_number(0.000001) == "0.000001");
  CHECK(format_number(std::nan("")) == "NaN");
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "Infinity");
  CHECK(format_number(-std::numeric_limits<double>::infinity()) == "-Infinity");
  CHECK(format_number(4294967296.0) == "4294967296");
  CHECK(runtime::parse_number(" 24 ") == 24);
  CHECK(runtime::parse_number("") == 0);
  CHECK(std::isnan(runtime::parse_number("x")));
}

TEST_CASE("runtime errors") {
  Session s;
  s.update_source("m",
                  "/*@example {\"name\":\"Null\",\"params\":{}}*/\nfunction n() {\n  let x = null;\n  return x.k;\n}\n"
                  "/*@example {\"name\":\"Deep\",\"params\":{\"d\":\"0\"}}*/\nfunction r(d) {\n  return r(d + 1);\n}\n"
                  "/*@example {\"name\":\"Input\",\"params\":{}}*/\nfunction ask() {\n  return prompt(\"?\");\n}\n"
                  "/*@example {\"name\":\"Missing\",\"params\":{}}*/\nfunction missing() {\n  return nothing;\n}");
  auto r = s.evaluate();
  CHECK(example(*r, "m", "Null").error_message == "Cannot read properties of null (reading 'k')");
  CHECK(example(*r, "m", "Deep").error_message == "Maximum call stack size exceeded");
  CHECK(example(*r, "m", "Input").status == ExampleOutcome::Status::Error);
  CHECK(example(*r, "m", "Missing").status == ExampleOutcome::Status::Error);
}

TEST_CASE("examples are isolated from each other's counters and output") {
  auto r = evaluate({"annotations/annotations.baby"});
  const auto& p2 = example(*r, "annotations", "Powers of 2");
  const auto& p5 = example(*r, "annotations", "Powers of 5");
  std::string probe = probe_at(*r, "annotations", 11, "power");
  CHECK(probe_values(*r, probe, p2.id).size() == 5);
  CHECK(probe_values(*r, probe, p5.id).size() == 5);
  CHECK(p2.output_log.empty());
}

TEST_CASE("host resources record effects per example") {
  auto r = evaluate({"canvas/tree_scene.baby"});
  const auto& cherry = example(*r, "tree_scene", "Cherry");
  const auto& birch = example(*r, "tree_scene", "Birch");
  CHECK(cherry.status == ExampleOutcome::Status::Ok);
  CHECK(std::count(cherry.output_log.begin(), cherry.output_log.end(), "fillRect(0, 0, 300, 150) fill=lightblue") == 1);
  CHECK(std::count(birch.output_log.begin(), birch.output_log.end(),
                   "fillRect(0, 0, 300, 150) fill=midnightblue") == 1);
  std::string left = probe_at(*r, "tree_scene", 29, "left");
  CHECK(probe_values(*r, left, cherry.id) == Strings{"135"});
  CHECK(probe_values(*r, left, birch.id) == Strings{"140"});
}

TEST_CASE("instrumented results equal clean runs on every fixture") {
  for (const auto& files : kScenarios) {
    CAPTURE(files[0]);
    auto r = evaluate(files);
    auto clean = testing::clean_run(clean_inputs(files));
    std::vector<const session::ExampleReport*> enabled;
    for (const auto& e : r->examples) {
      if (e.enabled) enabled.push_back(&e);
    }
    REQUIRE(enabled.size() == clean.size());
    for (std::size_t i = 0; i < clean.size(); ++i) {
      const auto& e = *enabled[i];
      CAPTURE(e.name);
      CHECK(e.name == clean[i].name);
      CHECK(e.status == clean[i].status);
      if (e.status == ExampleOutcome::Status::Ok) {
        CHECK(returned(e) == clean[i].rendered_return);
      } else if (e.status == ExampleOutcome::Status::Error) {
        CHECK(e.error_message == clean[i].error_message);
      }
      CHECK(e.output_log == clean[i].output_log);
    }
  }
}

TEST_CASE("coverage equals the statement trace") {
  for (const auto& files : kScenarios) {
    CAPTURE(files[0]);
    Session s;
    std::map<std::string, std::map<std::string, std::set<int>>> traced;  // example -> module -> lines
    s.runtime().hooks().on_statement = [&](const std::string& ex, const std::string& module, const lang::Node& st) {
      if (!st.has_flag(lang::kFlagSynthetic) && st.has_span) traced[ex][module].insert(st.span.start.line);
    };
    load_fixtures(s, files);
    auto r = s.evaluate();
    for (const auto& e : r->examples) {
      if (!e.enabled) continue;
      CAPTURE(e.name);
      CHECK(e.coverage_lines == traced[e.id]);
    }
  }
}

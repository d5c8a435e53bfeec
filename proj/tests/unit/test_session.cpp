#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <random>
#include <thread>

#include "babylon/session/session.hpp"
#include "babylon/session/worker.hpp"
#include "support/session_support.hpp"

using namespace babylon;
using session::EvaluationReport;
using session::Session;
using session::SessionConfig;
using session::Worker;
using testing::load_fixtures;
using testing::read_fixture;

namespace {

using Lines = std::set<int>;
using namespace std::chrono_literals;

// Lines of binary_search.baby a search for `key` in `array` executes.
Lines binary_search_lines(const std::vector<std::string>& array, const std::string& key) {
  Lines out{3, 4};
  int low = 0;
  int high = static_cast<int>(array.size()) - 1;
  while (true) {
    out.insert(6);
    if (!(low <= high)) break;
    int mid = (low + high) / 2;
    out.insert({7, 8, 10});
    if (array[mid] < key) {
      out.insert(11);
      low = mid + 1;
    } else {
      out.insert(12);
      if (array[mid] > key) {
        out.insert(13);
        high = mid - 1;
      } else {
        out.insert(15);
        return out;
      }
    }
  }
  out.insert(19);
  return out;
}

const std::vector<std::string> kLetters = {"a", "b", "c", "d", "e", "f"};
const Lines kBinaryExecutable = {3, 4, 6, 7, 8, 10, 11, 12, 13, 15, 19};

Lines difference(const Lines& a, const Lines& b) {
  Lines out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

SessionConfig fast(int debounce_ms = 50) {
  SessionConfig c;
  c.debounce_ms = debounce_ms;
  return c;
}

}  // namespace

TEST_CASE("executable lines of binary search") {
  Session s;
  load_fixtures(s, {"search/binary_search.baby"});
  auto r = s.evaluate();
  CHECK(r->module("binary_search")->executable_lines == kBinaryExecutable);
}

TEST_CASE("fading follows enabled examples") {
  Session s;
  load_fixtures(s, {"search/binary_search.baby"});
  auto r = s.evaluate();
  Lines g = binary_search_lines(kLetters, "g");
  CHECK(r->module("binary_search")->faded_lines == difference(kBinaryExecutable, g));
  CHECK(r->module("binary_search")->faded_lines.count(15));

  s.set_example_enabled("binary_search", "Found", true);
  r = s.evaluate();
  Lines both = g;
  for (int l : binary_search_lines(kLetters, "e")) both.insert(l);
  CHECK(r->module("binary_search")->faded_lines == difference(kBinaryExecutable, both));
  CHECK_FALSE(r->module("binary_search")->faded_lines.count(15));

  s.set_example_enabled("binary_search", "Not Found", false);
  s.set_example_enabled("binary_search", "Found", false);
  r = s.evaluate();
  CHECK(r->module("binary_search")->faded_lines.empty());
  CHECK_THROWS_AS(s.set_example_enabled("binary_search", "Missing", true), std::invalid_argument);
}

TEST_CASE("faded lines are executable lines no example reached") {
  Session s;
  load_fixtures(s, {"self/ast.baby", "self/location-converter.baby", "complex/expression.baby",
                    "complex/symbols.baby", "annotations/annotations.baby"});
  auto r = s.evaluate();
  for (const auto& m : r->modules) {
    CAPTURE(m.name);
    Lines covered;
    bool any = false;
    for (const auto& e : r->examples) {
      if (!e.enabled) continue;
      any = true;
      if (auto it = e.coverage_lines.find(m.name); it != e.coverage_lines.end()) covered.insert(it->second.begin(), it->second.end());
    }
    REQUIRE(any);
    CHECK(m.faded_lines == difference(m.executable_lines, covered));
    CHECK(std::includes(m.executable_lines.begin(), m.executable_lines.end(), m.faded_lines.begin(), m.faded_lines.end()));
  }
}

TEST_CASE("compute_faded_lines") {
  std::map<std::string, Lines> exec = {{"a", {1, 2, 3}}, {"b", {5}}};
  CHECK(session::compute_faded_lines(exec, {}) == std::map<std::string, Lines>{{"a", {}}, {"b", {}}});
  auto f = session::compute_faded_lines(exec, {{{"a", {1}}}, {{"a", {3}}, {"b", {}}}});
  CHECK(f["a"] == Lines{2});
  CHECK(f["b"] == Lines{5});
}

TEST_CASE("a parse error keeps the last results as stale") {
  Session s;
  load_fixtures(s, {"search/binary_search.baby"});
  auto good = s.evaluate();
  CHECK(good->inputs_valid());
  std::string text = read_fixture("search/binary_search.baby");
  s.update_source("binary_search", text + "\nfunction broken( {\n");
  auto bad = s.evaluate();
  const auto* m = bad->module("binary_search");
  REQUIRE(m->parse_error);
  CHECK(m->stale);
  CHECK(m->parse_error_span->start.line == 22);
  CHECK_FALSE(bad->inputs_valid());
  CHECK(m->faded_lines == good->module("binary_search")->faded_lines);
  REQUIRE(bad->examples.size() == good->examples.size());
  for (const auto& e : bad->examples) CHECK(e.stale);
  REQUIRE(bad->probes.size() == good->probes.size());
  for (std::size_t i = 0; i < bad->probes.size(); ++i) {
    CHECK(bad->probes[i].stale);
    CHECK(bad->probes[i].rows.size() == good->probes[i].rows.size());
  }
  CHECK(bad->slider(good->sliders[0].id)->stale);

  s.update_source("binary_search", text);
  auto fixed = s.evaluate();
  CHECK_FALSE(fixed->module("binary_search")->stale);
  CHECK(fixed->inputs_valid());
  for (const auto& e : fixed->examples) CHECK_FALSE(e.stale);
}

TEST_CASE("a failing module does not take others down") {
  Session s;
  load_fixtures(s, {"search/binary_search.baby"});
  s.update_source("broken", "/*@example {\"name\":\"E\",\"params\":{\"a\":\"@template:nosuch\"}}*/\n"
                            "function f(a) {\n  return a;\n}\n");
  auto r = s.evaluate();
  const auto* broken = r->module("broken");
  REQUIRE(broken->diagnostics.size() == 1);
  CHECK(broken->diagnostics[0].find("instrumentation failed") != std::string::npos);
  CHECK(r->example_named("broken", "E")->status == runtime::ExampleOutcome::Status::Error);
  CHECK_FALSE(r->inputs_valid());
  CHECK(r->example_named("binary_search", "Not Found")->status == runtime::ExampleOutcome::Status::Ok);
  CHECK(runtime::render(*r->example_named("binary_search", "Not Found")->return_snapshot) == "-1");
}

TEST_CASE("modules outside the example scope are not run") {
  Session s;
  load_fixtures(s, {"search/binary_search.baby"});
  s.update_source("idle", "function g() {\n  return 1;\n}\n");
  auto r = s.evaluate();
  CHECK_FALSE(r->module("idle")->in_scope);
  CHECK(r->module("binary_search")->in_scope);
  CHECK(r->load_counts.count("idle") == 0);
  CHECK(r->module("idle")->faded_lines == Lines{2});
}

TEST_CASE("phase audit stays clean") {
  Session s;
  load_fixtures(s, {"self/ast.baby", "self/location-converter.baby", "simple/simple.baby", "simple/person.baby",
                    "canvas/tree_scene.baby", "timeout/timeout.baby"});
  s.evaluate();
  s.evaluate();
  CHECK(s.audit().parses_during_emergence == 0);
  CHECK(s.audit().trace_records_during_adaptation == 0);
  CHECK(s.audit().resource_accesses_during_adaptation == 0);
}

TEST_CASE("revisions increase and subscribers see each report") {
  Session s;
  load_fixtures(s, {"search/binary_search.baby"});
  std::vector<int> seen;
  int id = s.subscribe([&](auto r) { seen.push_back(r->revision); });
  for (int i = 0; i < 4; ++i) s.evaluate();
  s.unsubscribe(id);
  s.evaluate();
  CHECK(seen == std::vector<int>{1, 2, 3, 4});
  CHECK(s.revision() == 5);
  CHECK(s.last_report()->revision == 5);
}

TEST_CASE("cancelled evaluation publishes nothing") {
  Session s;
  load_fixtures(s, {"search/binary_search.baby"});
  CHECK(s.evaluate([] { return true; }) == nullptr);
  CHECK(s.revision() == 0);
  CHECK(s.evaluate()->revision == 1);
}

TEST_CASE("applicable annotations") {
  Session s;
  load_fixtures(s, {"search/binary_search.baby"});
  CHECK(s.applicable_annotations("binary_search", {7, 18}).empty());
  s.evaluate();
  using V = std::vector<std::string>;
  auto at = [&](int line, int column) { return s.applicable_annotations("binary_search", {line, column}); };
  V mid = at(7, 18);
  CHECK(std::find(mid.begin(), mid.end(), "probe") != mid.end());
  V loop = at(6, 13);
  CHECK(std::find(loop.begin(), loop.end(), "slider") != loop.end());
  V fn = at(2, 12);
  CHECK(std::find(fn.begin(), fn.end(), "example") != fn.end());
  V call = at(7, 30);
  CHECK(std::find(call.begin(), call.end(), "replace") != call.end());
  CHECK(at(40, 0).empty());

  s.update_source("strings", "function greet() {\n  return \"hi\";\n}\n");
  s.evaluate();
  CHECK(s.applicable_annotations("strings", {2, 10}) == V{"replace"});
}

TEST_CASE("annotation edits rewrite the source") {
  Session s;
  load_fixtures(s, {"search/binary_search.baby"});
  annotations::Annotation probe;
  probe.kind = annotations::AnnotationKind::Probe;
  s.set_annotation("binary_search", {11, 6}, probe);
  CHECK(s.source("binary_search").find("      /*@probe*/low = mid + 1;") != std::string::npos);
  auto r = s.evaluate();
  CHECK(r->probes.size() == 6);
  s.remove_annotation("binary_search", {11, 6});
  CHECK(s.source("binary_search") == read_fixture("search/binary_search.baby"));
}

TEST_CASE("worker coalesces edits inside the debounce window") {
  Worker w(fast(150));
  w.set_templates(read_fixture("templates.babytpl"));
  std::string text = read_fixture("search/binary_search.baby");
  std::vector<int> expected;
  for (int i = 0; i < 10; ++i) expected.push_back(w.update_source("binary_search", text + std::string(i, '\n')));
  CHECK(std::all_of(expected.begin(), expected.end(), [](int r) { return r == 1; }));
  auto r = w.wait_for(1, 5s);
  REQUIRE(r);
  CHECK(r->revision == 1);
  std::this_thread::sleep_for(300ms);
  CHECK(w.stats().completed == 1);
  CHECK(w.last_report()->revision == 1);
  CHECK(w.source("binary_search") == text + std::string(9, '\n'));
}

TEST_CASE("worker waits out the debounce before evaluating") {
  Worker w(fast(200));
  w.set_templates(read_fixture("templates.babytpl"));
  auto start = std::chrono::steady_clock::now();
  int rev = w.update_source("binary_search", read_fixture("search/binary_search.baby"));
  auto r = w.wait_for(rev, 5s);
  REQUIRE(r);
  CHECK(std::chrono::steady_clock::now() - start >= 200ms);
}

TEST_CASE("evaluate_now reflects every earlier edit") {
  Worker w(fast(10000));
  w.set_templates(read_fixture("templates.babytpl"));
  w.update_source("binary_search", read_fixture("search/binary_search.baby"));
  w.set_example_enabled("binary_search", "Found", true);
  auto r = w.evaluate_now();
  REQUIRE(r);
  CHECK(r->example_named("binary_search", "Found")->status == runtime::ExampleOutcome::Status::Ok);
  CHECK_THROWS_AS(w.set_example_enabled("nowhere", "Found", true), std::invalid_argument);
  CHECK_THROWS(w.set_templates("template {"));
}

TEST_CASE("worker revisions are monotone under concurrent edits") {
  Worker w(fast(5));
  w.set_templates(read_fixture("templates.babytpl"));
  std::vector<int> seen;
  std::mutex m;
  w.subscribe([&](auto r) {
    std::lock_guard<std::mutex> lock(m);
    seen.push_back(r->revision);
  });
  std::string text = read_fixture("search/binary_search.baby");
  std::vector<std::thread> editors;
  std::atomic<int> promised{0};
  for (int t = 0; t < 3; ++t) {
    editors.emplace_back([&, t] {
      std::mt19937 rng(t);
      for (int i = 0; i < 30; ++i) {
        int rev = w.update_source("binary_search", text + std::string(rng() % 4, '\n'));
        int prev = promised.load();
        while (rev > prev && !promised.compare_exchange_weak(prev, rev)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(rng() % 8));
      }
    });
  }
  for (auto& e : editors) e.join();
  auto last = w.evaluate_now();
  REQUIRE(last);
  std::lock_guard<std::mutex> lock(m);
  REQUIRE_FALSE(seen.empty());
  CHECK(std::is_sorted(seen.begin(), seen.end()));
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
  CHECK(seen.back() == last->revision);
  CHECK(last->revision <= promised.load() + 1);
  auto st = w.stats();
  CHECK(st.completed == static_cast<int>(seen.size()));
  CHECK(st.started == st.completed + st.cancelled);
}

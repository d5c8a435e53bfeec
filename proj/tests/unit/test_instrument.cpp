#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "babylon/annotations/annotation.hpp"
#include "babylon/annotations/templates.hpp"
#include "babylon/instrument/instrumenter.hpp"
#include "babylon/lang/parser.hpp"
#include "babylon/lang/printer.hpp"
#include "support/fixtures.hpp"

using namespace babylon;
using instrument::InstrumentConfig;
using instrument::InstrumentedModule;
using instrument::SessionCatalog;
using lang::IdentifiedAst;
using lang::Node;
using lang::NodeKind;
using testing::read_fixture;

namespace {

struct Prepared {
  IdentifiedAst ast;
  std::vector<annotations::Annotation> bound;
};

Prepared prepare(const std::string& text, const std::string& module) {
  Prepared p{lang::parse_module(text, module), {}};
  auto extracted = annotations::extract_annotations(text);
  REQUIRE(extracted.errors.empty());
  auto attached = annotations::attach(std::move(extracted.annotations), p.ast);
  REQUIRE(attached.errors.empty());
  p.bound = std::move(attached.bound);
  return p;
}

SessionCatalog catalog_for(std::initializer_list<std::string> modules) {
  SessionCatalog c;
  c.known_modules = modules;
  c.custom_templates = annotations::parse_templates(read_fixture("templates.babytpl"));
  c.resources = {"canvas"};
  if (c.known_modules.count("person")) {
    Prepared person = prepare(read_fixture("simple/person.baby"), "person");
    for (auto& t : instrument::collect_instance_templates(person.ast, person.bound)) c.instance_templates[t.name] = t;
  }
  if (c.known_modules.count("tree_scene")) {
    Prepared scene = prepare(read_fixture("canvas/tree_scene.baby"), "tree_scene");
    for (auto& t : instrument::collect_instance_templates(scene.ast, scene.bound)) c.instance_templates[t.name] = t;
  }
  return c;
}

InstrumentedModule run(const Prepared& p, const SessionCatalog& catalog) {
  InstrumentConfig config;
  config.session_modules = catalog.known_modules;
  return instrument::instrument(p.ast, p.bound, config, catalog);
}

void walk(const Node& n, const std::function<void(const Node&)>& f) {
  f(n);
  for (const Node& c : n.children) walk(c, f);
}

// Statement lists the interpreter executes. The parameter bindings of an
// example block are a declaration list, not a statement block.
void each_block(const Node& n, const std::function<void(const Node&)>& f) {
  if (n.kind == NodeKind::Block || n.kind == NodeKind::Module) f(n);
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    if (n.kind == NodeKind::ExampleBlock && i == 2) {
      for (const Node& decl : n.children[i].children) each_block(decl, f);
      continue;
    }
    each_block(n.children[i], f);
  }
}

}  // namespace

TEST_CASE("binary search tables") {
  Prepared p = prepare(read_fixture("search/binary_search.baby"), "binary_search");
  InstrumentedModule m = run(p, catalog_for({"binary_search"}));

  CHECK(m.probe_table.size() == 5);
  CHECK(m.slider_table.size() == 1);
  REQUIRE(m.example_table.size() == 2);
  CHECK(m.example_table[0].id == "binary_search#0");
  CHECK(m.example_table[0].name == "Not Found");
  CHECK(m.example_table[0].enabled);
  CHECK(m.example_table[1].id == "binary_search#1");
  CHECK(m.example_table[1].name == "Found");
  CHECK_FALSE(m.example_table[1].enabled);
  CHECK(m.example_table[0].callable == "binarySearch");

  std::multiset<int> lines;
  for (const auto& probe : m.probes) {
    CHECK(m.probe_table.at(probe.id) == probe.target);
    CHECK(probe.id == instrument::probe_id("binary_search", probe.target));
    lines.insert(p.ast.node(probe.target)->span.start.line);
  }
  CHECK(lines == std::multiset<int>{7, 7, 7, 8, 19});
  const Node* loop = p.ast.node(m.sliders.at(0).target);
  CHECK(loop->kind == NodeKind::While);
  CHECK(loop->span.start.line == 6);
  CHECK(m.diagnostics.empty());
}

TEST_CASE("original tree is left untouched") {
  for (const char* f : {"search/binary_search.baby", "annotations/annotations.baby", "simple/simple.baby",
                        "canvas/tree_scene.baby", "complex/expression.baby"}) {
    CAPTURE(f);
    std::string name = std::string(f).substr(std::string(f).find('/') + 1);
    name = name.substr(0, name.rfind('.'));
    Prepared p = prepare(read_fixture(f), name);
    Node copy = p.ast.root();
    std::string before = lang::print_module(p.ast.root());
    InstrumentedModule m = run(p, catalog_for({"binary_search", "annotations", "simple", "person", "tree_scene",
                                               "expression", "symbols"}));
    CHECK(lang::print_module(p.ast.root()) == before);
    CHECK(lang::same_shape(p.ast.root(), copy));
    CHECK_FALSE(lang::same_shape(*m.exec_tree, p.ast.root()));
  }
}

TEST_CASE("every block starts with a guard") {
  Prepared p = prepare(read_fixture("complex/expression.baby"), "expression");
  InstrumentedModule m = run(p, catalog_for({"expression", "symbols"}));
  int blocks = 0;
  each_block(*m.exec_tree, [&](const Node& n) {
    ++blocks;
    REQUIRE_FALSE(n.children.empty());
    CHECK(n.children[0].kind == NodeKind::GuardCheck);
  });
  CHECK(blocks > 20);
}

TEST_CASE("loop bodies without braces get a block") {
  Prepared p = prepare("function f(n) {\n  let s = 0;\n  while (n > 0) n = n - 1;\n  return s;\n}\n", "m");
  InstrumentedModule m = run(p, catalog_for({"m"}));
  bool found = false;
  walk(*m.exec_tree, [&](const Node& n) {
    if (n.kind != NodeKind::While) return;
    found = true;
    REQUIRE(n.children.size() == 2);
    CHECK(n.children[1].kind == NodeKind::Block);
    CHECK(n.children[1].children.at(0).kind == NodeKind::GuardCheck);
  });
  CHECK(found);
}

TEST_CASE("ID map points back at the original tree") {
  for (const char* f : {"search/binary_search.baby", "annotations/annotations.baby", "self/ast.baby"}) {
    CAPTURE(f);
    std::string name = std::string(f).substr(std::string(f).find('/') + 1);
    name = name.substr(0, name.rfind('.'));
    Prepared p = prepare(read_fixture(f), name);
    InstrumentedModule m = run(p, catalog_for({"binary_search", "annotations", "ast", "location-converter"}));
    std::size_t count = 0;
    walk(*m.exec_tree, [&](const Node& n) {
      REQUIRE(n.id == static_cast<lang::NodeId>(count));
      ++count;
      CHECK(m.id_map.at(n.id) == n.origin);
      if (n.origin == lang::kNoId) return;
      REQUIRE(p.ast.node(n.origin) != nullptr);
      if (!n.has_flag(lang::kFlagSynthetic)) {
        CHECK(p.ast.node(n.origin)->kind == n.kind);
        CHECK(p.ast.node(n.origin)->span == n.span);
      }
    });
    CHECK(count == m.id_map.size());
  }
}

TEST_CASE("probes on replaced nodes are dropped") {
  Prepared p = prepare("function f() {\n  return /*@replace \"2\"*/(1 + /*@probe*/x);\n}\n", "m");
  InstrumentedModule m = run(p, catalog_for({"m"}));
  CHECK(m.probes.empty());
  REQUIRE(m.diagnostics.size() == 1);
  CHECK(m.diagnostics[0].message.find("replaced") != std::string::npos);
}

TEST_CASE("instrumentation errors") {
  SUBCASE("unknown template") {
    Prepared p = prepare("/*@example {\"name\":\"E\",\"params\":{\"a\":\"@template:nosuch\"}}*/\n"
                         "function f(a) {\n  return a;\n}\n",
                         "m");
    CHECK_THROWS_AS(run(p, catalog_for({"m"})), instrument::UnresolvedValueSpec);
  }
  SUBCASE("unknown resource") {
    Prepared p = prepare("/*@example {\"name\":\"E\",\"params\":{\"a\":\"@resource:disk\"}}*/\n"
                         "function f(a) {\n  return a;\n}\n",
                         "m");
    CHECK_THROWS_AS(run(p, catalog_for({"m"})), instrument::UnresolvedValueSpec);
  }
  SUBCASE("unknown import") {
    Prepared p = prepare("import x from \"./missing.baby\";\nfunction f() {\n  return x;\n}\n", "m");
    try {
      run(p, catalog_for({"m"}));
      FAIL("expected UnresolvedImport");
    } catch (const instrument::UnresolvedImport& e) {
      CHECK(e.span.start.line == 1);
    }
  }
  SUBCASE("malformed replacement") {
    Prepared p = prepare("function f() {\n  return /*@replace \"1\"*/g();\n}\n", "m");
    REQUIRE(p.bound.size() == 1);
    // Extraction rejects a malformed payload, so forge one past it.
    p.bound[0].payload = "1 +";
    CHECK_THROWS_AS(run(p, catalog_for({"m"})), instrument::ReplacementParseError);
  }
  SUBCASE("non-positive budget") {
    Prepared p = prepare("function f() {\n  return 1;\n}\n", "m");
    InstrumentConfig config;
    config.time_budget_ms = 0;
    CHECK_THROWS_AS(instrument::instrument(p.ast, p.bound, config, catalog_for({"m"})), std::invalid_argument);
  }
}

TEST_CASE("imports are marked when they target session modules") {
  Prepared p = prepare(read_fixture("simple/simple.baby"), "simple");
  SessionCatalog c = catalog_for({"simple", "person"});
  InstrumentConfig config;
  config.session_modules = {"simple"};
  InstrumentedModule plain = instrument::instrument(p.ast, p.bound, config, c);
  config.session_modules = {"simple", "person"};
  InstrumentedModule live = instrument::instrument(p.ast, p.bound, config, c);
  auto flag = [](const InstrumentedModule& m) {
    for (const Node& s : m.exec_tree->children) {
      if (s.kind == NodeKind::ImportDecl) return s.has_flag(lang::kFlagInstrumented);
    }
    FAIL("no import");
    return false;
  };
  CHECK_FALSE(flag(plain));
  CHECK(flag(live));
  CHECK(live.imports == std::vector<std::string>{"person"});
}

TEST_CASE("module name for import") {
  CHECK(instrument::module_name_for_import("./person.baby") == "person");
  CHECK(instrument::module_name_for_import("person") == "person");
  CHECK(instrument::module_name_for_import("../lib/location-converter.baby") == "location-converter");
}

TEST_CASE("plain preparation adds only guards") {
  Prepared p = prepare(read_fixture("search/binary_search.baby"), "binary_search");
  InstrumentedModule m = instrument::prepare_plain(p.ast, {}, catalog_for({"binary_search"}));
  CHECK(m.probe_table.empty());
  CHECK(m.example_table.empty());
  walk(*m.exec_tree, [&](const Node& n) {
    CHECK(n.kind != NodeKind::ProbeCapture);
    CHECK(n.kind != NodeKind::CounterBump);
  });
}

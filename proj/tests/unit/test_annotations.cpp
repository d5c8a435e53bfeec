#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "babylon/annotations/annotation.hpp"
#include "babylon/annotations/templates.hpp"
#include "babylon/lang/lexer.hpp"
#include "babylon/lang/parser.hpp"
#include "babylon/lang/printer.hpp"
#include "support/fixtures.hpp"

using namespace babylon::annotations;
using babylon::lang::IdentifiedAst;
using babylon::lang::Node;
using babylon::lang::NodeKind;
using babylon::lang::parse_module;
using babylon::testing::read_fixture;

namespace {

const char* kAnnotated[] = {
    "simple/simple.baby",          "simple/person.baby",
    "search/binary_search.baby",   "search/recursive_search.baby",
    "annotations/annotations.baby", "timeout/timeout.baby",
    "cycle/cycle_a.baby",          "cycle/cycle_b.baby",
    "self/ast.baby",               "self/location-converter.baby",
    "canvas/tree_scene.baby",      "complex/expression.baby",
    "complex/symbols.baby",
};

const Node* find_node(const IdentifiedAst& ast, NodeKind kind, int line) {
  for (std::size_t i = 0; i < ast.size(); ++i) {
    const Node* n = ast.node(static_cast<int>(i));
    if (n->kind == kind && n->span.start.line == line) return n;
  }
  return nullptr;
}

AttachedAnnotations attach_source(const std::string& src, IdentifiedAst& ast) {
  ast = parse_module(src, "m");
  return attach(extract_annotations(src).annotations, ast);
}

}  // namespace

TEST_CASE("extraction") {
  auto r = extract_annotations("/*@probe*/ x = 1;");
  REQUIRE(r.annotations.size() == 1);
  CHECK(r.annotations[0].kind == AnnotationKind::Probe);
  CHECK(r.annotations[0].payload.is_null());

  r = extract_annotations(
      "/*@example {\"name\":\"Found\",\"enabled\":true,\"this\":\"null\",\"params\":"
      "{\"key\":\"\\\"e\\\"\",\"array\":\"@template:letters\"}}*/\nfunction binarySearch(array, key) {}");
  REQUIRE(r.annotations.size() == 1);
  ExamplePayload ex = r.annotations[0].example();
  CHECK(ex.name == "Found");
  CHECK(ex.enabled);
  CHECK(ex.this_binding.text == "null");
  REQUIRE(ex.params.size() == 2);
  CHECK(ex.params[0].first == "array");
  CHECK(ex.params[0].second == ValueSpec{ValueSpec::Variant::Template, "letters"});
  CHECK(ex.params[1].second == ValueSpec{ValueSpec::Variant::Literal, "\"e\""});

  r = extract_annotations("let c = /*@replace \"24\"*/prompt(\"t\");");
  REQUIRE(r.annotations.size() == 1);
  CHECK(r.annotations[0].replacement().replacement_source == "24");
}

TEST_CASE("malformed comments are reported and skipped") {
  auto r = extract_annotations(
      "/*@bogus*/ /*@example {\"name\":*/ /*@probe*/ /*@example {\"name\":\"x\",\"params\":{\"a\":\"1 +\"}}*/"
      " /*@slider {}*/ /*@replace \"(\"*/ /*@instance {\"args\":[]}*/ /*@probex*/ /* plain */");
  CHECK(r.annotations.size() == 1);
  CHECK(r.errors.size() == 7);
  for (std::size_t i = 1; i < r.errors.size(); ++i) {
    CHECK(r.errors[i - 1].span.start < r.errors[i].span.start);
  }
}

TEST_CASE("value specs") {
  CHECK(ValueSpec::decode("@resource:canvas").variant == ValueSpec::Variant::Resource);
  CHECK(ValueSpec::decode("@custom:letters").variant == ValueSpec::Variant::Custom);
  CHECK(ValueSpec::decode("@template:Cherry at day").text == "Cherry at day");
  CHECK(ValueSpec::decode("[1, 2]").variant == ValueSpec::Variant::Literal);
  CHECK_THROWS_AS(ValueSpec::decode("1 +"), std::invalid_argument);
  for (const char* s : {"@resource:canvas", "@custom:x", "@template:y", "{a: 1}"}) {
    CHECK(ValueSpec::decode(s).encode() == s);
  }
}

TEST_CASE("color indices follow document order") {
  auto r = extract_annotations(read_fixture("simple/simple.baby"));
  std::vector<int> colors;
  for (const Annotation& a : r.annotations) {
    if (a.kind == AnnotationKind::Example) colors.push_back(a.example().color_index);
  }
  CHECK(colors == std::vector<int>{0, 1, 2});
}

TEST_CASE("probe eligibility") {
  IdentifiedAst ast = parse_module(
      "function f(p) {\n  let a = 42;\n  a = p;\n  ast._locationMap[key(loc)] = p;\n  return -1;\n}",
      "m");
  const Node* ret = find_node(ast, NodeKind::Return, 5);
  CHECK(can_be_probe(*ret, ast));
  const Node* lit = find_node(ast, NodeKind::NumberLit, 2);
  CHECK_FALSE(can_be_probe(*lit, ast));
  const Node* index = find_node(ast, NodeKind::Index, 4);
  CHECK(can_be_probe(*index, ast));
  const Node& fn = ast.root().children[0];
  CHECK_FALSE(can_be_probe(fn.children[0], ast));
  CHECK(can_be_probe(fn.children[1], ast));
  const Node* decl = find_node(ast, NodeKind::Declarator, 2);
  CHECK(can_be_probe(decl->children[0], ast));
  CHECK_FALSE(can_be_probe(*decl, ast));
}

TEST_CASE("slider eligibility") {
  IdentifiedAst ast = parse_module(
      "traverse(ast, {\n  enter(path) {\n    if (x) {\n    }\n    while (y) {\n    }\n  }\n});", "m");
  const Node* loop = find_node(ast, NodeKind::While, 5);
  CHECK(can_be_slider(*loop, ast));
  const Node* method = find_node(ast, NodeKind::MethodDef, 2);
  CHECK(can_be_slider(method->children[0], ast));
  CHECK_FALSE(can_be_slider(method->children[1], ast));
  const Node* cond = find_node(ast, NodeKind::If, 3);
  CHECK_FALSE(can_be_slider(*cond, ast));
}

TEST_CASE("predicates are total") {
  for (const char* f : kAnnotated) {
    IdentifiedAst ast = parse_module(read_fixture(f), f);
    for (std::size_t i = 0; i < ast.size(); ++i) {
      const Node& n = *ast.node(static_cast<int>(i));
      CHECK_NOTHROW(can_be_probe(n, ast));
      CHECK_NOTHROW(can_be_slider(n, ast));
      CHECK_NOTHROW(can_be_example_target(n, ast));
      CHECK_NOTHROW(can_be_replaced(n, ast));
    }
  }
}

TEST_CASE("attachment") {
  IdentifiedAst ast = parse_module("", "m");
  auto r = attach_source(
      "function f(a) {\n  /*@slider*/while (a) {\n    a = a - 1;\n  }\n  /*@probe*/return -1;\n}", ast);
  REQUIRE(r.errors.empty());
  REQUIRE(r.bound.size() == 2);
  CHECK(ast.node(*r.bound[0].target_node)->kind == NodeKind::While);
  CHECK(ast.node(*r.bound[1].target_node)->kind == NodeKind::Return);

  r = attach_source("/*@example {\"name\":\"x\"}*/\nvar y = 1;", ast);
  CHECK(r.bound.empty());
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors[0].annotation.kind == AnnotationKind::Example);

  r = attach_source("/*@probe*/\n\n\nreturn 1;", ast);
  CHECK(r.errors.size() == 1);

  r = attach_source("/*@example {\"name\":\"x\",\"params\":{\"b\":\"1\"}}*/\nfunction f(a) {}", ast);
  CHECK(r.errors.size() == 1);

  r = attach_source("class A {\n  static /*@example {\"name\":\"x\",\"params\":{\"a\":\"1\"}}*/m(a) {}\n}", ast);
  REQUIRE(r.bound.size() == 1);
  CHECK(ast.node(*r.bound[0].target_node)->kind == NodeKind::MethodDef);

  r = attach_source("let c = /*@replace \"24\"*/prompt(\"t\");", ast);
  REQUIRE(r.bound.size() == 1);
  CHECK(ast.node(*r.bound[0].target_node)->kind == NodeKind::Call);

  r = attach_source("/*@instance {\"name\":\"A\"}*/\nexport default class A {}", ast);
  REQUIRE(r.bound.size() == 1);
  CHECK(ast.node(*r.bound[0].target_node)->kind == NodeKind::ClassDecl);
}

TEST_CASE("shipped fixtures attach cleanly and deterministically") {
  for (std::string f : kAnnotated) {
    CAPTURE(f);
    std::string src = read_fixture(f);
    auto extracted = extract_annotations(src);
    CHECK(extracted.errors.empty());
    IdentifiedAst ast = parse_module(src, f);
    auto a = attach(extracted.annotations, ast);
    auto b = attach(extract_annotations(src).annotations, ast);
    for (const auto& e : a.errors) MESSAGE(e.reason);
    CHECK(a.errors.empty());
    REQUIRE(a.bound.size() == b.bound.size());
    for (std::size_t i = 0; i < a.bound.size(); ++i) {
      CHECK(a.bound[i].target_node == b.bound[i].target_node);
    }
  }
}

TEST_CASE("binary search bindings") {
  std::string src = read_fixture("simple/simple.baby");
  IdentifiedAst ast = parse_module(src, "simple");
  auto r = attach(extract_annotations(src).annotations, ast);
  int probes = 0, sliders = 0, examples = 0;
  for (const Annotation& a : r.bound) {
    const Node& n = *ast.node(*a.target_node);
    if (a.kind == AnnotationKind::Probe) ++probes;
    if (a.kind == AnnotationKind::Slider) {
      ++sliders;
      CHECK(n.kind == NodeKind::While);
    }
    if (a.kind == AnnotationKind::Example) {
      ++examples;
      CHECK(n.text == "binarySearch");
    }
  }
  CHECK(probes == 3);
  CHECK(sliders == 1);
  CHECK(examples == 3);
}

TEST_CASE("persistence round trip") {
  for (std::string f : kAnnotated) {
    CAPTURE(f);
    std::string src = read_fixture(f);
    auto comments = babylon::lang::lex(src).comments;
    auto r = extract_annotations(comments);
    std::size_t k = 0;
    for (const auto& c : comments) {
      if (!c.block || c.text.rfind("/*@", 0) != 0) continue;
      REQUIRE(k < r.annotations.size());
      CHECK(serialize_annotation(r.annotations[k]) == c.text);
      auto again = extract_annotations(serialize_annotation(r.annotations[k]));
      REQUIRE(again.annotations.size() == 1);
      CHECK(again.annotations[0].payload == r.annotations[k].payload);
      ++k;
    }
    CHECK(k == r.annotations.size());
  }
}

TEST_CASE("stripping annotations keeps the tree shape") {
  for (std::string f : kAnnotated) {
    CAPTURE(f);
    std::string src = read_fixture(f);
    std::string stripped = strip_annotations(src);
    CHECK(extract_annotations(stripped).annotations.empty());
    CHECK(babylon::lang::same_shape(parse_module(src, f).root(), parse_module(stripped, f).root()));
  }
  CHECK(strip_annotations("return/*@probe*/x;") == "return x;");
}

TEST_CASE("source editing") {
  std::string src = "let s = \"\xC3\xA4\";\nreturn x;";
  CHECK(byte_offset(src, {1, 9}) == 9);
  CHECK(byte_offset(src, {1, 10}) == 11);
  Annotation probe;
  std::string edited = insert_annotation(src, {2, 0}, probe);
  CHECK(edited == "let s = \"\xC3\xA4\";\n/*@probe*/return x;");
  CHECK(remove_annotation(edited, {2, 0}) == src);
  CHECK_THROWS_AS(remove_annotation(src, {2, 0}), std::invalid_argument);
}

TEST_CASE("template sidecar") {
  auto templates = parse_templates(read_fixture("templates.babytpl"));
  REQUIRE(templates.size() == 8);
  CHECK(templates[0].name == "letters");
  CHECK(templates[0].body == "[\"a\", \"b\", \"c\", \"d\", \"e\", \"f\"]");
  CHECK(templates[2].name == "Simple AST");
  CHECK(templates[3].body.find("fib(n - 1)") != std::string::npos);
  auto again = parse_templates(serialize_templates(templates));
  REQUIRE(again.size() == templates.size());
  for (std::size_t i = 0; i < templates.size(); ++i) {
    CHECK(again[i].name == templates[i].name);
    CHECK(again[i].body == templates[i].body);
  }
  CHECK(parse_templates("").empty());
  CHECK(parse_templates("template t {\n  let s = `}${ {a: 1}.a }`;\n  s\n}")[0].name == "t");
  CHECK_THROWS_AS(parse_templates("template a { 1 }\ntemplate a { 2 }"), TemplateSyntaxError);
  CHECK_THROWS_AS(parse_templates("template a { let x = 1; }"), TemplateSyntaxError);
  CHECK_THROWS_AS(parse_templates("template a { 1"), TemplateSyntaxError);
  CHECK_THROWS_AS(parse_templates("nonsense"), TemplateSyntaxError);
}

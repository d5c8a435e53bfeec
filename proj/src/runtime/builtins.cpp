#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "babylon/lang/parser.hpp"
#include "babylon/runtime/interpreter.hpp"
#include "babylon/runtime/numbers.hpp"

namespace babylon::runtime {

namespace {

using Args = std::vector<Value>;

const Value& arg(const Args& args, std::size_t i) {
  static const Value null;
  return i < args.size() ? args[i] : null;
}

std::vector<std::string> split_code_points(const std::string& s) {
  std::vector<std::string> out;
  for (std::size_t b = 0; b < s.size();) {
    std::size_t len = 1;
    while (b + len < s.size() && (static_cast<unsigned char>(s[b + len]) & 0xC0) == 0x80) ++len;
    out.push_back(s.substr(b, len));
    b += len;
  }
  return out;
}

std::string join(const std::vector<std::string>& cps, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to && i < cps.size(); ++i) out += cps[i];
  return out;
}

// Relative index with negative-from-end semantics, clamped to [0, size].
std::size_t relative(Interpreter& in, const Value& v, std::size_t size, std::size_t fallback) {
  if (v.is_null()) return fallback;
  double d = std::trunc(in.to_number(v));
  if (std::isnan(d)) return 0;
  if (d < 0) d = std::max(0.0, static_cast<double>(size) + d);
  return static_cast<std::size_t>(std::min(d, static_cast<double>(size)));
}

Array* self_array(const Value& self, const char* method) {
  if (!self.is_array()) throw RuntimeError(fmt::format("{} called on a non-array", method));
  return self.as_array();
}

const std::string& self_string(const Value& self, const char* method) {
  if (!self.is_string()) throw RuntimeError(fmt::format("{} called on a non-text value", method));
  return self.as_string();
}

void set_native(Interpreter& in, Object* obj, const std::string& name, NativeFn fn) {
  obj->props.set(name, Value(in.new_native(name, std::move(fn))));
}

std::string console_text(const Value& v) {
  if (v.is_string()) return v.as_string();
  IdentityRegistry ids;
  return render(*snapshot(v, 3, ids));
}

// Syntax tree as plain objects: {type, name?, loc, children}.
Value ast_value(Interpreter& in, const lang::Node& n) {
  Object* obj = in.new_object();
  obj->props.set("type", Value(std::string(lang::kind_name(n.kind))));
  if (!n.text.empty()) obj->props.set("name", Value(n.text));
  if (n.has_span) {
    auto pos = [&](const lang::SourcePos& p) {
      Object* o = in.new_object();
      o->props.set("line", Value(p.line));
      o->props.set("column", Value(p.column));
      return Value(o);
    };
    Object* loc = in.new_object();
    loc->props.set("start", pos(n.span.start));
    loc->props.set("end", pos(n.span.end));
    obj->props.set("loc", Value(loc));
  } else {
    obj->props.set("loc", Value());
  }
  std::vector<Value> children;
  for (const lang::Node& c : n.children) children.push_back(ast_value(in, c));
  obj->props.set("children", Value(in.new_array(std::move(children))));
  return Value(obj);
}

Value from_json(Interpreter& in, const nlohmann::ordered_json& j) {
  switch (j.type()) {
    case nlohmann::ordered_json::value_t::null: return Value();
    case nlohmann::ordered_json::value_t::boolean: return Value(j.get<bool>());
    case nlohmann::ordered_json::value_t::string: return Value(j.get<std::string>());
    case nlohmann::ordered_json::value_t::array: {
      std::vector<Value> items;
      for (const auto& e : j) items.push_back(from_json(in, e));
      return Value(in.new_array(std::move(items)));
    }
    case nlohmann::ordered_json::value_t::object: {
      Object* o = in.new_object();
      for (const auto& [k, v] : j.items()) o->props.set(k, from_json(in, v));
      return Value(o);
    }
    default: return Value(j.get<double>());
  }
}

void stringify(Interpreter& in, const Value& v, std::string& out, std::set<const HeapCell*>& stack) {
  auto fields = [&](const std::vector<std::pair<std::string, Value>>& entries, const HeapCell* cell) {
    if (!stack.insert(cell).second) throw RuntimeError("Converting circular structure to JSON");
    out += "{";
    bool first = true;
    for (const auto& [k, field] : entries) {
      if (field.is_function()) continue;
      if (!first) out += ",";
      first = false;
      out += nlohmann::json(k).dump() + ":";
      stringify(in, field, out, stack);
    }
    out += "}";
    stack.erase(cell);
  };
  if (v.is_null() || v.is_function()) {
    out += "null";
  } else if (v.is_bool()) {
    out += v.as_bool() ? "true" : "false";
  } else if (v.is_number()) {
    double d = v.as_number();
    out += std::isfinite(d) ? format_number(d) : "null";
  } else if (v.is_string()) {
    out += nlohmann::json(v.as_string()).dump();
  } else if (v.is_array()) {
    Array* a = v.as_array();
    if (!stack.insert(a).second) throw RuntimeError("Converting circular structure to JSON");
    out += "[";
    for (std::size_t i = 0; i < a->items.size(); ++i) {
      if (i) out += ",";
      stringify(in, a->items[i], out, stack);
    }
    out += "]";
    stack.erase(a);
  } else if (v.is_object()) {
    fields(v.as_object()->props.entries(), v.as_object());
  } else {
    fields(v.as_resource()->describe(), v.as_resource());
  }
}

// Drawing-surface stand-in that records each call it receives.
class CanvasMock final : public HostResource {
 public:
  CanvasMock() {
    fields_.set("width", Value(300));
    fields_.set("height", Value(150));
    fields_.set("fillStyle", Value("#000000"));
    fields_.set("strokeStyle", Value("#000000"));
    fields_.set("lineWidth", Value(1));
  }

  std::string kind() const override { return "canvas"; }

  Value get(Interpreter& in, const std::string& name) override {
    static const std::set<std::string> methods = {"fillRect", "clearRect", "strokeRect", "beginPath",
                                                  "moveTo",   "lineTo",    "arc",        "fill",
                                                  "stroke",   "fillText",  "closePath"};
    if (const Value* v = fields_.find(name)) return *v;
    if (!methods.count(name)) return Value();
    return Value(in.new_native(name, [this, name](Interpreter& in, const Value&, Args& args) {
      std::string call = name + "(";
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) call += ", ";
        call += args[i].is_string() ? nlohmann::json(args[i].as_string()).dump() : in.to_string(args[i]);
      }
      call += ")";
      if (name.rfind("fill", 0) == 0) call += " fill=" + in.to_string(*fields_.find("fillStyle"));
      if (name.rfind("stroke", 0) == 0) call += " stroke=" + in.to_string(*fields_.find("strokeStyle"));
      log_.push_back(std::move(call));
      return Value();
    }));
  }

  void set(const std::string& name, Value value) override { fields_.set(name, std::move(value)); }

  std::vector<std::pair<std::string, Value>> describe() const override {
    auto out = fields_.entries();
    out.emplace_back("drawCalls", Value(static_cast<int>(log_.size())));
    return out;
  }

  std::vector<std::string> output_log() const override { return log_; }

  void trace(std::vector<HeapCell*>& out) const override {
    for (const auto& [k, v] : fields_.entries()) trace_value(v, out);
  }

 private:
  PropertyMap fields_;
  std::vector<std::string> log_;
};

}  // namespace

HostResource* make_canvas_mock(Heap& heap) { return heap.make<CanvasMock>(); }

std::string json_stringify(Interpreter& interp, const Value& v) {
  std::string out;
  std::set<const HeapCell*> stack;
  stringify(interp, v, out, stack);
  return out;
}

Value json_parse(Interpreter& interp, const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    throw RuntimeError(fmt::format("Unexpected token in JSON: {}", text));
  }
  return from_json(interp, j);
}

void install_builtins(Interpreter& in, Environment* global) {
  auto define = [&](const std::string& name, Value v) { global->vars[name] = Binding{std::move(v)}; };
  define("undefined", Value());
  define("NaN", Value(std::nan("")));
  define("Infinity", Value(HUGE_VAL));

  Object* console = in.new_object();
  set_native(in, console, "log", [](Interpreter& in, const Value&, Args& args) {
    std::string line;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (i) line += " ";
      line += console_text(args[i]);
    }
    in.log_output(std::move(line));
    return Value();
  });
  define("console", Value(console));

  Object* math = in.new_object();
  auto unary = [&](const std::string& name, double (*fn)(double)) {
    set_native(in, math, name, [fn](Interpreter& in, const Value&, Args& args) {
      return Value(fn(in.to_number(arg(args, 0))));
    });
  };
  unary("floor", [](double d) { return std::floor(d); });
  unary("ceil", [](double d) { return std::ceil(d); });
  unary("round", [](double d) { return std::floor(d + 0.5); });
  unary("sqrt", [](double d) { return std::sqrt(d); });
  unary("abs", [](double d) { return std::fabs(d); });
  set_native(in, math, "pow", [](Interpreter& in, const Value&, Args& args) {
    return Value(std::pow(in.to_number(arg(args, 0)), in.to_number(arg(args, 1))));
  });
  set_native(in, math, "min", [](Interpreter& in, const Value&, Args& args) {
    double out = HUGE_VAL;
    for (const Value& v : args) {
      double d = in.to_number(v);
      if (std::isnan(d)) return Value(d);
      out = std::min(out, d);
    }
    return Value(out);
  });
  set_native(in, math, "max", [](Interpreter& in, const Value&, Args& args) {
    double out = -HUGE_VAL;
    for (const Value& v : args) {
      double d = in.to_number(v);
      if (std::isnan(d)) return Value(d);
      out = std::max(out, d);
    }
    return Value(out);
  });
  math->props.set("PI", Value(M_PI));
  define("Math", Value(math));

  define("prompt", Value(in.new_native("prompt", [](Interpreter&, const Value&, Args&) -> Value {
    throw NeedsUserInput("prompt() needs user input, which examples cannot provide");
  })));

  Object* date = in.new_object();
  set_native(in, date, "now", [](Interpreter&, const Value&, Args&) {
    auto now = std::chrono::system_clock::now().time_since_epoch();
    return Value(static_cast<double>(std::chrono::duration_cast<std::chrono::milliseconds>(now).count()));
  });
  define("Date", Value(date));

  Object* json = in.new_object();
  set_native(in, json, "parse", [](Interpreter& in, const Value&, Args& args) {
    return json_parse(in, in.to_string(arg(args, 0)));
  });
  set_native(in, json, "stringify", [](Interpreter& in, const Value&, Args& args) {
    return Value(json_stringify(in, arg(args, 0)));
  });
  define("JSON", Value(json));

  Object* object = in.new_object();
  set_native(in, object, "keys", [](Interpreter& in, const Value&, Args& args) {
    std::vector<Value> keys;
    const Value& v = arg(args, 0);
    if (v.is_object()) {
      for (const auto& [k, _] : v.as_object()->props.entries()) keys.emplace_back(k);
    } else if (v.is_array()) {
      for (std::size_t i = 0; i < v.as_array()->items.size(); ++i) keys.emplace_back(std::to_string(i));
    }
    return Value(in.new_array(std::move(keys)));
  });
  define("Object", Value(object));

  Object* array = in.new_object();
  set_native(in, array, "isArray", [](Interpreter&, const Value&, Args& args) {
    return Value(arg(args, 0).is_array());
  });
  define("Array", Value(array));

  define("String", Value(in.new_native("String", [](Interpreter& in, const Value&, Args& args) {
    return Value(args.empty() ? std::string() : in.to_string(args[0]));
  })));
  define("Number", Value(in.new_native("Number", [](Interpreter& in, const Value&, Args& args) {
    return Value(args.empty() ? 0.0 : in.to_number(args[0]));
  })));
  define("isNaN", Value(in.new_native("isNaN", [](Interpreter& in, const Value&, Args& args) {
    return Value(std::isnan(in.to_number(arg(args, 0))));
  })));
  define("parseInt", Value(in.new_native("parseInt", [](Interpreter& in, const Value&, Args& args) {
    std::string s = in.to_string(arg(args, 0));
    std::size_t i = s.find_first_not_of(" \t\n");
    if (i == std::string::npos) return Value(std::nan(""));
    double sign = 1;
    if (s[i] == '-' || s[i] == '+') sign = s[i++] == '-' ? -1 : 1;
    double out = 0;
    bool any = false;
    for (; i < s.size() && s[i] >= '0' && s[i] <= '9'; ++i, any = true) out = out * 10 + (s[i] - '0');
    return Value(any ? sign * out : std::nan(""));
  })));

  Object* lang_obj = in.new_object();
  set_native(in, lang_obj, "parse", [](Interpreter& in, const Value&, Args& args) {
    std::string text = in.to_string(arg(args, 0));
    try {
      lang::IdentifiedAst ast = lang::parse_module(text, "<Lang.parse>");
      return ast_value(in, ast.root());
    } catch (const lang::ParseError& e) {
      throw RuntimeError(fmt::format("SyntaxError: {}", e.what()));
    }
  });
  define("Lang", Value(lang_obj));
}

Value array_method(Interpreter& in, const std::string& name) {
  NativeFn fn;
  if (name == "push") {
    fn = [](Interpreter&, const Value& self, Args& args) {
      Array* a = self_array(self, "push");
      for (Value& v : args) a->items.push_back(v);
      return Value(static_cast<double>(a->items.size()));
    };
  } else if (name == "pop") {
    fn = [](Interpreter&, const Value& self, Args&) {
      Array* a = self_array(self, "pop");
      if (a->items.empty()) return Value();
      Value v = a->items.back();
      a->items.pop_back();
      return v;
    };
  } else if (name == "shift") {
    fn = [](Interpreter&, const Value& self, Args&) {
      Array* a = self_array(self, "shift");
      if (a->items.empty()) return Value();
      Value v = a->items.front();
      a->items.erase(a->items.begin());
      return v;
    };
  } else if (name == "join") {
    fn = [](Interpreter& in, const Value& self, Args& args) {
      Array* a = self_array(self, "join");
      std::string sep = arg(args, 0).is_null() ? "," : in.to_string(args[0]);
      std::string out;
      for (std::size_t i = 0; i < a->items.size(); ++i) {
        if (i) out += sep;
        if (!a->items[i].is_null()) out += in.to_string(a->items[i]);
      }
      return Value(std::move(out));
    };
  } else if (name == "indexOf" || name == "includes") {
    bool includes = name == "includes";
    fn = [includes](Interpreter&, const Value& self, Args& args) {
      Array* a = self_array(self, "indexOf");
      for (std::size_t i = 0; i < a->items.size(); ++i) {
        if (Interpreter::strict_equals(a->items[i], arg(args, 0))) {
          return includes ? Value(true) : Value(static_cast<double>(i));
        }
      }
      return includes ? Value(false) : Value(-1);
    };
  } else if (name == "slice") {
    fn = [](Interpreter& in, const Value& self, Args& args) {
      Array* a = self_array(self, "slice");
      std::size_t n = a->items.size();
      std::size_t from = relative(in, arg(args, 0), n, 0), to = relative(in, arg(args, 1), n, n);
      std::vector<Value> out;
      for (std::size_t i = from; i < to; ++i) out.push_back(a->items[i]);
      return Value(in.new_array(std::move(out)));
    };
  } else if (name == "concat") {
    fn = [](Interpreter& in, const Value& self, Args& args) {
      std::vector<Value> out = self_array(self, "concat")->items;
      for (const Value& v : args) {
        if (v.is_array()) {
          out.insert(out.end(), v.as_array()->items.begin(), v.as_array()->items.end());
        } else {
          out.push_back(v);
        }
      }
      return Value(in.new_array(std::move(out)));
    };
  } else if (name == "reverse") {
    fn = [](Interpreter&, const Value& self, Args&) {
      Array* a = self_array(self, "reverse");
      std::reverse(a->items.begin(), a->items.end());
      return self;
    };
  } else if (name == "map" || name == "forEach" || name == "filter") {
    int mode = name == "map" ? 0 : (name == "forEach" ? 1 : 2);
    fn = [mode](Interpreter& in, const Value& self, Args& args) {
      Array* a = self_array(self, "map");
      std::vector<Value> out;
      // The callback may grow the array; visit the original length only.
      std::size_t n = a->items.size();
      for (std::size_t i = 0; i < n && i < a->items.size(); ++i) {
        Value item = a->items[i];
        Value r = in.call(arg(args, 0), Value(), {item, Value(static_cast<double>(i)), self});
        if (mode == 0) out.push_back(r);
        if (mode == 2 && Interpreter::truthy(r)) out.push_back(item);
      }
      return mode == 1 ? Value() : Value(in.new_array(std::move(out)));
    };
  } else {
    return Value();
  }
  return Value(in.new_native(name, std::move(fn)));
}

Value string_method(Interpreter& in, const std::string& name) {
  NativeFn fn;
  if (name == "indexOf" || name == "includes" || name == "startsWith") {
    int mode = name == "indexOf" ? 0 : (name == "includes" ? 1 : 2);
    fn = [mode](Interpreter& in, const Value& self, Args& args) {
      const std::string& s = self_string(self, "indexOf");
      std::string needle = in.to_string(arg(args, 0));
      std::size_t at = s.find(needle);
      if (mode == 1) return Value(at != std::string::npos);
      if (mode == 2) return Value(s.rfind(needle, 0) == 0);
      if (at == std::string::npos) return Value(-1);
      return Value(static_cast<double>(split_code_points(s.substr(0, at)).size()));
    };
  } else if (name == "slice" || name == "substring") {
    bool substring = name == "substring";
    fn = [substring](Interpreter& in, const Value& self, Args& args) {
      auto cps = split_code_points(self_string(self, "slice"));
      std::size_t n = cps.size();
      std::size_t from = relative(in, arg(args, 0), n, 0), to = relative(in, arg(args, 1), n, n);
      if (substring && from > to) std::swap(from, to);
      return Value(from < to ? join(cps, from, to) : std::string());
    };
  } else if (name == "charAt") {
    fn = [](Interpreter& in, const Value& self, Args& args) {
      auto cps = split_code_points(self_string(self, "charAt"));
      double i = in.to_number(arg(args, 0));
      if (std::isnan(i)) i = 0;
      return Value(i >= 0 && i < static_cast<double>(cps.size()) ? cps[static_cast<std::size_t>(i)] : "");
    };
  } else if (name == "split") {
    fn = [](Interpreter& in, const Value& self, Args& args) {
      const std::string& s = self_string(self, "split");
      std::vector<Value> out;
      if (arg(args, 0).is_null()) {
        out.emplace_back(s);
      } else {
        std::string sep = in.to_string(args[0]);
        if (sep.empty()) {
          for (auto& cp : split_code_points(s)) out.emplace_back(cp);
        } else {
          std::size_t start = 0, at;
          while ((at = s.find(sep, start)) != std::string::npos) {
            out.emplace_back(s.substr(start, at - start));
            start = at + sep.size();
          }
          out.emplace_back(s.substr(start));
        }
      }
      return Value(in.new_array(std::move(out)));
    };
  } else if (name == "toUpperCase" || name == "toLowerCase") {
    bool upper = name == "toUpperCase";
    fn = [upper](Interpreter&, const Value& self, Args&) {
      std::string s = self_string(self, "toUpperCase");
      for (char& c : s) c = static_cast<char>(upper ? std::toupper(static_cast<unsigned char>(c))
                                                    : std::tolower(static_cast<unsigned char>(c)));
      return Value(std::move(s));
    };
  } else if (name == "trim") {
    fn = [](Interpreter&, const Value& self, Args&) {
      const std::string& s = self_string(self, "trim");
      std::size_t b = s.find_first_not_of(" \t\n\r");
      if (b == std::string::npos) return Value("");
      std::size_t e = s.find_last_not_of(" \t\n\r");
      return Value(s.substr(b, e - b + 1));
    };
  } else if (name == "repeat") {
    fn = [](Interpreter& in, const Value& self, Args& args) {
      const std::string& s = self_string(self, "repeat");
      double n = in.to_number(arg(args, 0));
      if (std::isnan(n) || n < 0 || n > 1e6) throw RuntimeError("Invalid count value");
      std::string out;
      for (int i = 0; i < static_cast<int>(n); ++i) out += s;
      return Value(std::move(out));
    };
  } else {
    return Value();
  }
  return Value(in.new_native(name, std::move(fn)));
}

}  // namespace babylon::runtime

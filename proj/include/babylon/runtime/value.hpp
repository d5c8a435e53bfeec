#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "babylon/lang/ast.hpp"

namespace babylon::runtime {

class Array;
class Object;
class Function;
class HostResource;
class Environment;
class Interpreter;
struct ModuleRecord;

struct Null {
  bool operator==(const Null&) const = default;
};

struct Value {
  using Storage =
      std::variant<Null, bool, double, std::string, Array*, Object*, Function*, HostResource*>;
  Storage v;

  Value() = default;
  Value(Null) {}
  Value(bool b) : v(b) {}
  Value(double d) : v(d) {}
  Value(int i) : v(static_cast<double>(i)) {}
  Value(std::string s) : v(std::move(s)) {}
  Value(const char* s) : v(std::string(s)) {}
  Value(Array* a) : v(a) {}
  Value(Object* o) : v(o) {}
  Value(Function* f) : v(f) {}
  Value(HostResource* h) : v(h) {}

  bool is_null() const { return std::holds_alternative<Null>(v); }
  bool is_bool() const { return std::holds_alternative<bool>(v); }
  bool is_number() const { return std::holds_alternative<double>(v); }
  bool is_string() const { return std::holds_alternative<std::string>(v); }
  bool is_array() const { return std::holds_alternative<Array*>(v); }
  bool is_object() const { return std::holds_alternative<Object*>(v); }
  bool is_function() const { return std::holds_alternative<Function*>(v); }
  bool is_resource() const { return std::holds_alternative<HostResource*>(v); }

  bool as_bool() const { return std::get<bool>(v); }
  double as_number() const { return std::get<double>(v); }
  const std::string& as_string() const { return std::get<std::string>(v); }
  Array* as_array() const { return std::get<Array*>(v); }
  Object* as_object() const { return std::get<Object*>(v); }
  Function* as_function() const { return std::get<Function*>(v); }
  HostResource* as_resource() const { return std::get<HostResource*>(v); }
};

struct RuntimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TimeoutError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NeedsUserInput : RuntimeError {
  using RuntimeError::RuntimeError;
};

class HeapCell {
 public:
  virtual ~HeapCell() = default;
  virtual void trace(std::vector<HeapCell*>& out) const = 0;
  bool marked = false;
};

void trace_value(const Value& v, std::vector<HeapCell*>& out);

// Insertion-ordered string-keyed properties.
class PropertyMap {
 public:
  const Value* find(const std::string& key) const;
  Value* find(const std::string& key);
  void set(const std::string& key, Value value);
  bool erase(const std::string& key);
  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, Value>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, Value>> entries_;
  std::unordered_map<std::string, std::size_t> index_;  // built past a few entries
};

class Array final : public HeapCell {
 public:
  std::vector<Value> items;
  void trace(std::vector<HeapCell*>& out) const override;
};

class Object final : public HeapCell {
 public:
  Function* klass = nullptr;  // set for class instances
  PropertyMap props;
  void trace(std::vector<HeapCell*>& out) const override;
};

using NativeFn = std::function<Value(Interpreter&, const Value& self, std::vector<Value>& args)>;

class Function final : public HeapCell {
 public:
  enum class Kind { Closure, Native, Class };
  Kind kind = Kind::Closure;
  std::string name;
  PropertyMap props;  // statics and assigned properties

  // Closure: function-like node or FactoryDecl.
  const lang::Node* decl = nullptr;
  std::shared_ptr<const lang::Node> tree;  // keeps `decl` alive
  Environment* env = nullptr;
  ModuleRecord* module = nullptr;
  bool arrow = false;

  NativeFn native;

  // Class.
  Function* ctor = nullptr;
  std::map<std::string, Function*> methods;

  void trace(std::vector<HeapCell*>& out) const override;
};

struct Binding {
  Value value;
  bool initialized = true;
  bool is_const = false;
  // Import bindings forward to the exporting module's binding.
  Binding* alias = nullptr;
  Environment* alias_owner = nullptr;

  Binding& target() { return alias ? alias->target() : *this; }
};

class Environment final : public HeapCell {
 public:
  Environment* parent = nullptr;
  bool function_scope = false;
  std::unordered_map<std::string, Binding> vars;

  Binding* lookup(const std::string& name);
  Environment* function_env();
  void trace(std::vector<HeapCell*>& out) const override;
};

// Host-owned value reachable from examples through resource references.
class HostResource : public HeapCell {
 public:
  virtual std::string kind() const = 0;
  virtual Value get(Interpreter& interp, const std::string& name) = 0;
  virtual void set(const std::string& name, Value value) = 0;
  // Fields shown by snapshots.
  virtual std::vector<std::pair<std::string, Value>> describe() const = 0;
  // Effects observed by the host, e.g. draw calls.
  virtual std::vector<std::string> output_log() const { return {}; }
  void trace(std::vector<HeapCell*>& out) const override;
};

// Mark-and-sweep heap. Collection happens only between evaluations.
class Heap {
 public:
  template <typename T, typename... Args>
  T* make(Args&&... args) {
    auto cell = std::make_unique<T>(std::forward<Args>(args)...);
    T* raw = cell.get();
    cells_.push_back(std::move(cell));
    return raw;
  }

  std::size_t size() const { return cells_.size(); }
  // Frees every cell not reachable from `roots`.
  std::size_t collect(const std::vector<Value>& roots);

 private:
  std::vector<std::unique_ptr<HeapCell>> cells_;
};

}  // namespace babylon::runtime

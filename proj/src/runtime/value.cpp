#include "babylon/runtime/value.hpp"

#include <algorithm>

namespace babylon::runtime {

namespace {
constexpr std::size_t kIndexThreshold = 8;
}

void trace_value(const Value& v, std::vector<HeapCell*>& out) {
  if (v.is_array()) out.push_back(v.as_array());
  if (v.is_object()) out.push_back(v.as_object());
  if (v.is_function()) out.push_back(v.as_function());
  if (v.is_resource()) out.push_back(v.as_resource());
}

const Value* PropertyMap::find(const std::string& key) const {
  return const_cast<PropertyMap*>(this)->find(key);
}

Value* PropertyMap::find(const std::string& key) {
  if (!index_.empty()) {
    auto it = index_.find(key);
    return it == index_.end() ? nullptr : &entries_[it->second].second;
  }
  for (auto& [k, v] : entries_) {
    if (k == key) return &v;
  }
  return nullptr;
}

void PropertyMap::set(const std::string& key, Value value) {
  if (Value* existing = find(key)) {
    *existing = std::move(value);
    return;
  }
  entries_.emplace_back(key, std::move(value));
  if (!index_.empty()) {
    index_.emplace(key, entries_.size() - 1);
  } else if (entries_.size() > kIndexThreshold) {
    for (std::size_t i = 0; i < entries_.size(); ++i) index_.emplace(entries_[i].first, i);
  }
}

bool PropertyMap::erase(const std::string& key) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
  if (it == entries_.end()) return false;
  entries_.erase(it);
  index_.clear();
  if (entries_.size() > kIndexThreshold) {
    for (std::size_t i = 0; i < entries_.size(); ++i) index_.emplace(entries_[i].first, i);
  }
  return true;
}

void Array::trace(std::vector<HeapCell*>& out) const {
  for (const Value& v : items) trace_value(v, out);
}

void Object::trace(std::vector<HeapCell*>& out) const {
  if (klass) out.push_back(klass);
  for (const auto& [k, v] : props.entries()) trace_value(v, out);
}

void Function::trace(std::vector<HeapCell*>& out) const {
  for (const auto& [k, v] : props.entries()) trace_value(v, out);
  if (env) out.push_back(env);
  if (ctor) out.push_back(ctor);
  for (const auto& [k, m] : methods) out.push_back(m);
}

Binding* Environment::lookup(const std::string& name) {
  for (Environment* e = this; e; e = e->parent) {
    auto it = e->vars.find(name);
    if (it != e->vars.end()) return &it->second;
  }
  return nullptr;
}

Environment* Environment::function_env() {
  Environment* e = this;
  while (!e->function_scope && e->parent) e = e->parent;
  return e;
}

void Environment::trace(std::vector<HeapCell*>& out) const {
  if (parent) out.push_back(parent);
  for (const auto& [k, b] : vars) {
    trace_value(b.value, out);
    if (b.alias_owner) out.push_back(b.alias_owner);
  }
}

void HostResource::trace(std::vector<HeapCell*>& out) const {
  for (const auto& [k, v] : describe()) trace_value(v, out);
}

std::size_t Heap::collect(const std::vector<Value>& roots) {
  for (auto& c : cells_) c->marked = false;
  std::vector<HeapCell*> work;
  for (const Value& r : roots) trace_value(r, work);
  while (!work.empty()) {
    HeapCell* c = work.back();
    work.pop_back();
    if (c->marked) continue;
    c->marked = true;
    c->trace(work);
  }
  std::size_t before = cells_.size();
  cells_.erase(std::remove_if(cells_.begin(), cells_.end(), [](const auto& c) { return !c->marked; }),
               cells_.end());
  return before - cells_.size();
}

}  // namespace babylon::runtime

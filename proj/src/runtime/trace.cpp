#include "babylon/runtime/trace.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

#include "babylon/runtime/numbers.hpp"

namespace babylon::runtime {

namespace {

const HeapCell* cell_of(const Value& v) {
  if (v.is_array()) return v.as_array();
  if (v.is_object()) return v.as_object();
  if (v.is_function()) return v.as_function();
  if (v.is_resource()) return v.as_resource();
  return nullptr;
}

SnapshotPtr take(const Value& v, int depth, IdentityRegistry& ids, std::vector<const HeapCell*>& open) {
  auto s = std::make_shared<ValueSnapshot>();
  s->type_tag = type_tag(v);
  const HeapCell* cell = cell_of(v);
  if (!cell) {
    if (v.is_bool()) s->scalar = v.as_bool();
    if (v.is_number()) s->scalar = v.as_number();
    if (v.is_string()) s->scalar = v.as_string();
    return s;
  }
  s->identity_id = ids.id_for(cell);
  if (v.is_function()) {
    s->shape = ValueSnapshot::Shape::Opaque;
    s->scalar = v.as_function()->name;
    return s;
  }
  if (std::find(open.begin(), open.end(), cell) != open.end()) {
    s->shape = ValueSnapshot::Shape::Cycle;
    return s;
  }
  if (depth <= 0) {
    s->shape = ValueSnapshot::Shape::Truncated;
    return s;
  }
  s->shape = ValueSnapshot::Shape::Record;
  open.push_back(cell);
  if (v.is_array()) {
    const auto& items = v.as_array()->items;
    for (std::size_t i = 0; i < items.size(); ++i) {
      s->fields.emplace_back(std::to_string(i), take(items[i], depth - 1, ids, open));
    }
  } else if (v.is_object()) {
    for (const auto& [k, fv] : v.as_object()->props.entries()) {
      s->fields.emplace_back(k, take(fv, depth - 1, ids, open));
    }
  } else {
    for (const auto& [k, fv] : v.as_resource()->describe()) {
      s->fields.emplace_back(k, take(fv, depth - 1, ids, open));
    }
  }
  open.pop_back();
  return s;
}

std::string quote(const std::string& s) { return nlohmann::json(s).dump(); }

std::string field_name(const std::string& key) {
  bool plain = !key.empty() && !std::isdigit(static_cast<unsigned char>(key[0]));
  for (char c : key) plain = plain && (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$');
  return plain ? key : quote(key);
}

}  // namespace

bool ValueSnapshot::operator==(const ValueSnapshot& o) const {
  if (type_tag != o.type_tag || identity_id != o.identity_id || shape != o.shape ||
      scalar != o.scalar || fields.size() != o.fields.size()) {
    return false;
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].first != o.fields[i].first || !(*fields[i].second == *o.fields[i].second)) return false;
  }
  return true;
}

int IdentityRegistry::id_for(const HeapCell* cell) {
  auto [it, fresh] = ids_.emplace(cell, static_cast<int>(ids_.size()) + 1);
  return it->second;
}

std::string type_tag(const Value& v) {
  if (v.is_null()) return "null";
  if (v.is_bool()) return "boolean";
  if (v.is_number()) return "number";
  if (v.is_string()) return "text";
  if (v.is_array()) return "array";
  if (v.is_function()) return v.as_function()->kind == Function::Kind::Class ? "class" : "function";
  if (v.is_resource()) return "resource:" + v.as_resource()->kind();
  Object* o = v.as_object();
  return o->klass ? o->klass->name : "object";
}

SnapshotPtr snapshot(const Value& value, int depth, IdentityRegistry& ids) {
  if (depth < 1) throw std::invalid_argument("snapshot depth must be at least 1");
  std::vector<const HeapCell*> open;
  return take(value, depth, ids, open);
}

SnapshotPtr unavailable_snapshot() {
  auto s = std::make_shared<ValueSnapshot>();
  s->type_tag = "unavailable";
  s->shape = ValueSnapshot::Shape::Unavailable;
  return s;
}

std::string render(const ValueSnapshot& s) {
  using Shape = ValueSnapshot::Shape;
  bool array = s.type_tag == "array";
  switch (s.shape) {
    case Shape::Scalar:
      if (std::holds_alternative<bool>(s.scalar)) return std::get<bool>(s.scalar) ? "true" : "false";
      if (std::holds_alternative<double>(s.scalar)) return format_number(std::get<double>(s.scalar));
      if (std::holds_alternative<std::string>(s.scalar)) return quote(std::get<std::string>(s.scalar));
      return "null";
    case Shape::Opaque: {
      const std::string& name = std::get<std::string>(s.scalar);
      return s.type_tag + (name.empty() ? "" : " " + name);
    }
    case Shape::Unavailable:
      return "unavailable";
    case Shape::Cycle:
      return array ? "[cycle]" : "{cycle}";
    case Shape::Truncated:
      return array ? "[…]" : "{…}";
    case Shape::Record:
      break;
  }
  std::string out;
  bool named = s.type_tag != "array" && s.type_tag != "object";
  if (named) out += s.type_tag + " ";
  out += array ? "[" : "{";
  for (std::size_t i = 0; i < s.fields.size(); ++i) {
    if (i) out += ", ";
    if (!array) out += field_name(s.fields[i].first) + ": ";
    out += render(*s.fields[i].second);
  }
  out += array ? "]" : "}";
  return out;
}

nlohmann::json to_json(const ValueSnapshot& s) {
  using Shape = ValueSnapshot::Shape;
  nlohmann::json j;
  j["type"] = s.type_tag;
  if (s.identity_id) j["identity"] = *s.identity_id;
  switch (s.shape) {
    case Shape::Scalar:
      if (std::holds_alternative<bool>(s.scalar)) j["value"] = std::get<bool>(s.scalar);
      if (std::holds_alternative<double>(s.scalar)) {
        double d = std::get<double>(s.scalar);
        if (std::isfinite(d)) {
          j["value"] = d;
        } else {
          j["value"] = format_number(d);
        }
      }
      if (std::holds_alternative<std::string>(s.scalar)) j["value"] = std::get<std::string>(s.scalar);
      if (std::holds_alternative<Null>(s.scalar)) j["value"] = nullptr;
      break;
    case Shape::Record: {
      nlohmann::json fields = nlohmann::json::array();
      for (const auto& [k, v] : s.fields) fields.push_back({k, to_json(*v)});
      j["fields"] = std::move(fields);
      break;
    }
    case Shape::Truncated: j["truncated"] = true; break;
    case Shape::Cycle: j["cycle"] = true; break;
    case Shape::Opaque: j["name"] = std::get<std::string>(s.scalar); break;
    case Shape::Unavailable: j["unavailable"] = true; break;
  }
  j["text"] = render(s);
  return j;
}

void TraceStore::record(TraceEvent event) {
  event.seq = next_seq_++;
  events_.push_back(std::move(event));
}

std::vector<TraceEvent> query_probe(const TraceStore& store, const std::string& probe_id,
                                    const std::optional<std::string>& example,
                                    const std::optional<std::pair<std::string, int>>& slider) {
  if (!store.knows(probe_id)) throw UnknownProbe(probe_id);
  std::vector<TraceEvent> out;
  for (const TraceEvent& e : store.events()) {
    if (e.probe_id != probe_id) continue;
    if (example && e.example_id != *example) continue;
    if (slider && std::find(e.iteration_vector.begin(), e.iteration_vector.end(), *slider) ==
                      e.iteration_vector.end()) {
      continue;
    }
    out.push_back(e);
  }
  return out;
}

std::vector<CapturePoint> capture_points(const std::vector<TraceEvent>& events) {
  std::vector<CapturePoint> points;
  std::vector<std::size_t> open;
  for (const TraceEvent& e : events) {
    if (e.phase == Phase::Before) {
      points.push_back({e.snapshot, nullptr, e.iteration_vector});
      if (e.capture_index == 0) open.push_back(points.size() - 1);
      continue;
    }
    if (e.capture_index == 1 && !open.empty()) {
      points[open.back()].after = e.snapshot;
      open.pop_back();
    } else {
      points.push_back({nullptr, e.snapshot, e.iteration_vector});
    }
  }
  return points;
}

std::string render_point(const CapturePoint& point) {
  if (point.before && point.after) {
    std::string b = render(*point.before), a = render(*point.after);
    return b == a ? a : b + " → " + a;
  }
  return render(*point.shown());
}

}  // namespace babylon::runtime

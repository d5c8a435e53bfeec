#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "babylon/runtime/value.hpp"

namespace babylon::runtime {

struct ValueSnapshot {
  enum class Shape {
    Scalar,       // number, text, boolean, null
    Record,       // fields hold the expanded contents
    Truncated,    // container beyond the depth limit
    Cycle,        // back-edge to a container being expanded
    Opaque,       // functions
    Unavailable,  // capture expression was not side-effect free
  };
  std::string type_tag;
  std::optional<int> identity_id;
  Shape shape = Shape::Scalar;
  std::variant<Null, bool, double, std::string> scalar;
  std::vector<std::pair<std::string, std::shared_ptr<const ValueSnapshot>>> fields;

  bool operator==(const ValueSnapshot& other) const;
};

using SnapshotPtr = std::shared_ptr<const ValueSnapshot>;

// Same underlying cell, same ID, for as long as the registry lives.
class IdentityRegistry {
 public:
  int id_for(const HeapCell* cell);

 private:
  std::unordered_map<const HeapCell*, int> ids_;
};

// Deep copy down to `depth` container levels. Requires depth >= 1.
SnapshotPtr snapshot(const Value& value, int depth, IdentityRegistry& ids);
SnapshotPtr unavailable_snapshot();

// JSON-like single-line rendering: {name: "David", hobby: "testing"}.
std::string render(const ValueSnapshot& s);
nlohmann::json to_json(const ValueSnapshot& s);

// Type tag for a live value: number, text, boolean, null, array, object,
// the class name for instances, function, or resource:<kind>.
std::string type_tag(const Value& v);

enum class Phase { Before, After };

using IterationVector = std::vector<std::pair<std::string, int>>;

struct TraceEvent {
  std::string probe_id;
  std::string example_id;
  Phase phase = Phase::Before;
  int capture_index = 0;  // 0 opens a capture point, 1 closes it, 2 stands alone
  IterationVector iteration_vector;  // outermost first
  std::uint64_t seq = 0;
  SnapshotPtr snapshot;
};

struct UnknownProbe : std::invalid_argument {
  explicit UnknownProbe(const std::string& id) : std::invalid_argument("unknown probe " + id) {}
};

class TraceStore {
 public:
  void declare_probe(const std::string& id) { probes_.insert(id); }
  bool knows(const std::string& id) const { return probes_.count(id) > 0; }
  const std::set<std::string>& probes() const { return probes_; }
  void record(TraceEvent event);
  const std::vector<TraceEvent>& events() const { return events_; }
  std::uint64_t next_seq() const { return next_seq_; }

 private:
  std::set<std::string> probes_;
  std::vector<TraceEvent> events_;
  std::uint64_t next_seq_ = 1;
};

std::vector<TraceEvent> query_probe(const TraceStore& store, const std::string& probe_id,
                                    const std::optional<std::string>& example = std::nullopt,
                                    const std::optional<std::pair<std::string, int>>& slider = std::nullopt);

// One dynamic execution of a probed statement: the value before and/or after.
struct CapturePoint {
  SnapshotPtr before;
  SnapshotPtr after;
  IterationVector iterations;  // of the first event
  const SnapshotPtr& shown() const { return after ? after : before; }
};

// Pairs before/after events (seq order, one probe) into capture points.
std::vector<CapturePoint> capture_points(const std::vector<TraceEvent>& events);

// "old → new" when a before and an after capture differ, else the value.
std::string render_point(const CapturePoint& point);

}  // namespace babylon::runtime

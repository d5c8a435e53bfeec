#pragma once

#include <map>
#include <optional>
#include <string_view>

#include "babylon/lang/ast.hpp"

namespace babylon::lang {

class LocationMap {
 public:
  void assign(const LocationKey& key, NodeId id) { entries_[key] = id; }
  std::optional<NodeId> find(const LocationKey& key) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<LocationKey, NodeId>& entries() const { return entries_; }

 private:
  std::map<LocationKey, NodeId> entries_;
};

// Keyword text for keyword-anchored kinds, empty otherwise.
std::string_view anchor_keyword(const Node& node);

// The span a node is registered under: the leading keyword for
// keyword-anchored kinds, the full span for everything else.
SourceSpan anchored_span(const Node& node);

// Pre-order walk; later nodes overwrite earlier ones with the same key.
// Throws InvalidAst when a node lacks an ID.
LocationMap build_location_map(const Node& root);
LocationMap build_location_map(const IdentifiedAst& ast);

}  // namespace babylon::lang

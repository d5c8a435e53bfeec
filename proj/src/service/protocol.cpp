#include "babylon/service/protocol.hpp"

#include <fmt/format.h>

#include <array>
#include <stdexcept>
#include <utility>

#include "babylon/service/report.hpp"

namespace babylon::service {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<MessageType, std::string_view>, 8> kTypes = {{
    {MessageType::OpenSession, "open_session"},
    {MessageType::UpdateSource, "update_source"},
    {MessageType::SetAnnotation, "set_annotation"},
    {MessageType::RemoveAnnotation, "remove_annotation"},
    {MessageType::SetResource, "set_resource"},
    {MessageType::Evaluate, "evaluate"},
    {MessageType::Report, "report"},
    {MessageType::Error, "error"},
}};

const json& field(const json& payload, const char* name) {
  auto it = payload.find(name);
  if (it == payload.end()) throw std::invalid_argument(fmt::format("missing \"{}\"", name));
  return *it;
}

std::string string_field(const json& payload, const char* name) {
  const json& v = field(payload, name);
  if (!v.is_string()) throw std::invalid_argument(fmt::format("\"{}\" must be a string", name));
  return v.get<std::string>();
}

lang::SourcePos position(const json& payload) {
  const json& at = field(payload, "at");
  if (!at.is_object() || !at.value("line", json()).is_number_integer() ||
      !at.value("column", json()).is_number_integer()) {
    throw std::invalid_argument("\"at\" must be {\"line\": int, \"column\": int}");
  }
  return {at["line"].get<int>(), at["column"].get<int>()};
}

annotations::Annotation annotation_from(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("\"annotation\" must be an object");
  auto kind = annotations::kind_from_keyword(j.value("kind", std::string()));
  if (!kind) throw std::invalid_argument("unknown annotation kind");
  annotations::Annotation a;
  a.kind = *kind;
  a.payload = j.value("payload", json());
  return a;
}

session::SessionConfig config_from(const json& j, session::SessionConfig config) {
  if (j.is_null()) return config;
  if (!j.is_object()) throw std::invalid_argument("\"config\" must be an object");
  config.time_budget_ms = j.value("budget_ms", config.time_budget_ms);
  config.snapshot_depth = j.value("depth", config.snapshot_depth);
  config.max_activations = j.value("max_activations", config.max_activations);
  config.debounce_ms = j.value("debounce_ms", config.debounce_ms);
  if (config.time_budget_ms <= 0 || config.snapshot_depth < 1 || config.max_activations < 1 || config.debounce_ms < 0) {
    throw std::invalid_argument("config values out of range");
  }
  return config;
}

}  // namespace

std::string_view type_name(MessageType type) {
  for (const auto& [t, name] : kTypes) {
    if (t == type) return name;
  }
  return "error";
}

std::optional<MessageType> type_from_name(std::string_view name) {
  for (const auto& [t, n] : kTypes) {
    if (n == name) return t;
  }
  return std::nullopt;
}

WireMessage WireMessage::parse(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw std::invalid_argument("message is not a JSON object");
  auto type = j.find("type");
  if (type == j.end() || !type->is_string()) throw std::invalid_argument("missing \"type\"");
  auto t = type_from_name(type->get<std::string>());
  if (!t) throw std::invalid_argument(fmt::format("unknown message type \"{}\"", type->get<std::string>()));
  WireMessage m;
  m.type = *t;
  auto rev = j.find("revision");
  if (rev != j.end() && !rev->is_null()) {
    if (!rev->is_number_integer()) throw std::invalid_argument("\"revision\" must be an integer");
    m.revision = rev->get<int>();
  }
  auto payload = j.find("payload");
  if (payload != j.end() && !payload->is_null()) {
    if (!payload->is_object()) throw std::invalid_argument("\"payload\" must be an object");
    m.payload = *payload;
  }
  return m;
}

std::string WireMessage::serialize() const {
  json j = {{"type", type_name(type)},
            {"revision", revision ? json(*revision) : json(nullptr)},
            {"payload", payload}};
  return j.dump() + "\n";
}

ProtocolService::ProtocolService(session::SessionConfig defaults) : defaults_(defaults) {}

ProtocolService::~ProtocolService() { worker_.reset(); }

int ProtocolService::connect(Send send) {
  std::lock_guard<std::mutex> lock(connections_mutex_);
  int id = next_connection_++;
  connections_[id] = std::move(send);
  return id;
}

void ProtocolService::disconnect(int connection) {
  std::lock_guard<std::mutex> lock(connections_mutex_);
  connections_.erase(connection);
}

void ProtocolService::handle(int connection, std::string_view data) {
  std::size_t start = 0;
  while (start <= data.size()) {
    std::size_t nl = data.find('\n', start);
    std::string_view line = data.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? data.size() + 1 : nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    WireMessage message;
    try {
      message = WireMessage::parse(line);
    } catch (const std::exception& e) {
      send_error(connection, e.what(), std::nullopt);
      continue;
    }
    try {
      dispatch(connection, message);
    } catch (const std::exception& e) {
      send_error(connection, e.what(), message.type);
    }
  }
}

void ProtocolService::dispatch(int connection, const WireMessage& message) {
  const json& p = message.payload;
  if (message.type == MessageType::OpenSession) {
    bool created = false;
    {
      std::lock_guard<std::mutex> lock(open_mutex_);
      if (!worker_) {
        worker_ = std::make_unique<session::Worker>(config_from(p.value("config", json()), defaults_));
        worker_->subscribe([this](std::shared_ptr<const session::EvaluationReport> r) { broadcast(r); });
        created = true;
      }
    }
    if (auto it = p.find("templates"); it != p.end()) worker_->set_templates(it->get<std::string>());
    if (auto it = p.find("resources"); it != p.end()) {
      for (const auto& [name, spec] : it->items()) worker_->set_resource(name, session::ResourceSpec::from_json(spec));
    }
    if (auto it = p.find("modules"); it != p.end()) {
      if (!it->is_object()) throw std::invalid_argument("\"modules\" must map names to sources");
      for (const auto& [name, text] : it->items()) worker_->update_source(name, text.get<std::string>());
    }
    if (!created) {
      std::lock_guard<std::mutex> lock(connections_mutex_);
      if (auto r = worker_->last_report(); r && r->revision <= last_broadcast_) {
        auto it = connections_.find(connection);
        WireMessage m{MessageType::Report, r->revision, structured_report(*r, {.timings = true})};
        if (it != connections_.end()) it->second(m.serialize());
      }
    }
    return;
  }
  if (message.type == MessageType::Report || message.type == MessageType::Error) {
    throw std::invalid_argument(fmt::format("\"{}\" is sent by the service only", type_name(message.type)));
  }
  session::Worker* w = nullptr;
  {
    std::lock_guard<std::mutex> lock(open_mutex_);
    w = worker_.get();
  }
  if (!w) throw std::invalid_argument("no open session; send open_session first");
  switch (message.type) {
    case MessageType::UpdateSource:
      w->update_source(string_field(p, "module"), string_field(p, "text"));
      break;
    case MessageType::SetAnnotation:
      if (p.contains("example")) {
        const json& enabled = field(p, "enabled");
        if (!enabled.is_boolean()) throw std::invalid_argument("\"enabled\" must be a boolean");
        w->set_example_enabled(string_field(p, "module"), string_field(p, "example"), enabled.get<bool>());
      } else {
        w->set_annotation(string_field(p, "module"), position(p), annotation_from(field(p, "annotation")));
      }
      break;
    case MessageType::RemoveAnnotation:
      w->remove_annotation(string_field(p, "module"), position(p));
      break;
    case MessageType::SetResource:
      w->set_resource(string_field(p, "name"), session::ResourceSpec::from_json(field(p, "spec")));
      break;
    case MessageType::Evaluate:
      w->request_evaluation();
      break;
    default:
      break;
  }
}

void ProtocolService::broadcast(const std::shared_ptr<const session::EvaluationReport>& report) {
  WireMessage m{MessageType::Report, report->revision, structured_report(*report, {.timings = true})};
  std::string line = m.serialize();
  std::lock_guard<std::mutex> lock(connections_mutex_);
  last_broadcast_ = report->revision;
  for (auto& [id, send] : connections_) send(line);
}

void ProtocolService::send_to(int connection, const WireMessage& message) {
  std::string line = message.serialize();
  std::lock_guard<std::mutex> lock(connections_mutex_);
  auto it = connections_.find(connection);
  if (it != connections_.end()) it->second(line);
}

void ProtocolService::send_error(int connection, const std::string& message, std::optional<MessageType> in_reply_to) {
  json payload = {{"message", message},
                  {"in_reply_to", in_reply_to ? json(std::string(type_name(*in_reply_to))) : json(nullptr)}};
  std::optional<int> revision;
  {
    std::lock_guard<std::mutex> lock(connections_mutex_);
    if (last_broadcast_ > 0) revision = last_broadcast_;
  }
  send_to(connection, WireMessage{MessageType::Error, revision, payload});
}

}  // namespace babylon::service

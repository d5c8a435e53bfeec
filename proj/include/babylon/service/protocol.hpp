#pragma once

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "babylon/session/worker.hpp"

namespace babylon::service {

// Message kinds on the wire. Each message is one JSON object per line:
//   {"type": ..., "revision": int|null, "payload": {...}}
enum class MessageType {
  OpenSession,
  UpdateSource,
  SetAnnotation,
  RemoveAnnotation,
  SetResource,
  Evaluate,
  Report,
  Error,
};

std::string_view type_name(MessageType type);
std::optional<MessageType> type_from_name(std::string_view name);

struct WireMessage {
  MessageType type = MessageType::Error;
  std::optional<int> revision;
  nlohmann::json payload = nlohmann::json::object();

  // Throws std::invalid_argument for malformed input.
  static WireMessage parse(std::string_view line);
  std::string serialize() const;  // one line, newline-terminated
};

// Transport-independent protocol endpoint for a single shared session.
// Connections receive every report; replies to a malformed or failing
// request go only to the sender.
class ProtocolService {
 public:
  using Send = std::function<void(const std::string& line)>;

  explicit ProtocolService(session::SessionConfig defaults = {});
  ~ProtocolService();

  int connect(Send send);
  void disconnect(int connection);
  // `data` holds one or more newline-delimited messages.
  void handle(int connection, std::string_view data);

  // Null until the first open_session.
  session::Worker* worker() { return worker_.get(); }

 private:
  void dispatch(int connection, const WireMessage& message);
  void broadcast(const std::shared_ptr<const session::EvaluationReport>& report);
  void send_to(int connection, const WireMessage& message);
  void send_error(int connection, const std::string& message, std::optional<MessageType> in_reply_to);

  session::SessionConfig defaults_;
  std::mutex open_mutex_;
  std::unique_ptr<session::Worker> worker_;
  std::mutex connections_mutex_;
  std::map<int, Send> connections_;
  int next_connection_ = 1;
  int last_broadcast_ = 0;
};

}  // namespace babylon::service

#pragma once

#include <cstdint>
#include <memory>

#include "babylon/service/protocol.hpp"

namespace babylon::service {

// WebSocket front end for a ProtocolService. Text frames carry
// newline-delimited messages; every outgoing message is its own frame.
class Server {
 public:
  // Port 0 picks a free port.
  Server(ProtocolService& protocol, std::uint16_t port, const std::string& address = "127.0.0.1");
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const;
  void start(int threads = 2);  // returns immediately
  void run();                   // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace babylon::service

#include "babylon/service/server.hpp"

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <string>
#include <thread>
#include <vector>

namespace babylon::service {

namespace beast = boost::beast;
namespace net = boost::asio;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, ProtocolService& protocol) : ws_(std::move(socket)), protocol_(protocol) {}

  void start() {
    net::dispatch(ws_.get_executor(), beast::bind_front_handler(&Connection::on_start, shared_from_this()));
  }

  void send(std::string line) {
    net::post(ws_.get_executor(), [self = shared_from_this(), line = std::move(line)]() mutable {
      self->queue_.push_back(std::move(line));
      if (self->queue_.size() == 1 && self->open_) self->write_next();
    });
  }

 private:
  void on_start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(beast::bind_front_handler(&Connection::on_accept, shared_from_this()));
  }

  void on_accept(beast::error_code ec) {
    if (ec) return;
    open_ = true;
    std::weak_ptr<Connection> weak = shared_from_this();
    id_ = protocol_.connect([weak](const std::string& line) {
      if (auto self = weak.lock()) self->send(line);
    });
    if (!queue_.empty()) write_next();
    read();
  }

  void read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&Connection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      close();
      return;
    }
    std::string data = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    protocol_.handle(id_, data);
    read();
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()), beast::bind_front_handler(&Connection::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      close();
      return;
    }
    queue_.pop_front();
    if (!queue_.empty()) write_next();
  }

  void close() {
    if (!open_) return;
    open_ = false;
    protocol_.disconnect(id_);
  }

  websocket::stream<beast::tcp_stream> ws_;
  ProtocolService& protocol_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  bool open_ = false;
  int id_ = 0;
};

}  // namespace

struct Server::Impl {
  ProtocolService& protocol;
  net::io_context ioc;
  tcp::acceptor acceptor;
  std::vector<std::thread> threads;

  Impl(ProtocolService& p, std::uint16_t port, const std::string& address)
      : protocol(p), acceptor(ioc, tcp::endpoint(net::ip::make_address(address), port)) {}

  void accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<Connection>(std::move(socket), protocol)->start();
      accept();
    });
  }
};

Server::Server(ProtocolService& protocol, std::uint16_t port, const std::string& address)
    : impl_(std::make_unique<Impl>(protocol, port, address)) {
  impl_->accept();
}

Server::~Server() { stop(); }

std::uint16_t Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::start(int threads) {
  for (int i = 0; i < threads; ++i) impl_->threads.emplace_back([this] { impl_->ioc.run(); });
}

void Server::run() { impl_->ioc.run(); }

void Server::stop() {
  impl_->ioc.stop();
  for (auto& t : impl_->threads) t.join();
  impl_->threads.clear();
}

}  // namespace babylon::service

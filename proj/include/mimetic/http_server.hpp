#pragma once

// HTTP + WebSocket front end for Service, on Boost.Beast. Connections are
// served synchronously, one thread each; the acceptor runs on its own
// io_context thread.
//
//   POST /snapshot   GET /state   GET /history   POST /close   GET /ws
//
// Every route takes an optional `?session=<id>` (default "default").

#include <mimetic/service.hpp>

#include <atomic>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <poll.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace mimetic {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct Target {
  std::string path;
  std::map<std::string, std::string> query;
};

inline Target parse_target(std::string_view target) {
  Target t;
  const auto q = target.find('?');
  t.path = std::string(target.substr(0, q));
  if (q == std::string_view::npos) return t;
  std::string_view rest = target.substr(q + 1);
  while (!rest.empty()) {
    const auto amp = rest.find('&');
    const std::string_view pair = rest.substr(0, amp);
    const auto eq = pair.find('=');
    if (eq == std::string_view::npos)
      t.query.emplace(std::string(pair), "");
    else
      t.query.emplace(std::string(pair.substr(0, eq)), std::string(pair.substr(eq + 1)));
    if (amp == std::string_view::npos) break;
    rest = rest.substr(amp + 1);
  }
  return t;
}

class HttpServer {
 public:
  HttpServer(Service& service, const std::string& host, unsigned short port)
      : service_(service), acceptor_(ioc_) {
    const tcp::endpoint ep(net::ip::make_address(host), port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
    port_ = acceptor_.local_endpoint().port();
  }

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  ~HttpServer() { stop(); }

  unsigned short port() const { return port_; }

  void start() {
    do_accept();
    io_thread_ = std::thread([this] { ioc_.run(); });
  }

  /// Blocks until stop() is called from elsewhere.
  void wait() {
    std::unique_lock lock(stop_mu_);
    stop_cv_.wait(lock, [&] { return stopped_; });
  }

  void stop() {
    {
      std::lock_guard lock(stop_mu_);
      if (stopped_) return;
      stopped_ = true;
    }
    stop_cv_.notify_all();
    stopping_ = true;
    net::post(ioc_, [this] {
      beast::error_code ec;
      acceptor_.close(ec);
    });
    if (io_thread_.joinable()) io_thread_.join();
    service_.shutdown_streams();
    std::list<Connection> conns;
    {
      std::lock_guard lock(conn_mu_);
      for (auto& c : connections_) {
        beast::error_code ec;
        c.socket->shutdown(tcp::socket::shutdown_both, ec);
      }
      conns.splice(conns.end(), connections_);
    }
    for (auto& c : conns)
      if (c.thread.joinable()) c.thread.join();
  }

 private:
  struct Connection {
    std::shared_ptr<tcp::socket> socket;
    std::shared_ptr<std::atomic<bool>> done;
    std::thread thread;
  };

  void do_accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec || stopping_) return;
      reap();
      auto sock = std::make_shared<tcp::socket>(std::move(socket));
      auto done = std::make_shared<std::atomic<bool>>(false);
      {
        std::lock_guard lock(conn_mu_);
        connections_.push_back({sock, done, std::thread([this, sock, done] {
                                  serve(*sock);
                                  *done = true;
                                })});
      }
      do_accept();
    });
  }

  void reap() {
    std::lock_guard lock(conn_mu_);
    for (auto it = connections_.begin(); it != connections_.end();) {
      if (*it->done) {
        it->thread.join();
        it = connections_.erase(it);
      } else {
        ++it;
      }
    }
  }

  void serve(tcp::socket& socket) {
    beast::flat_buffer buffer;
    beast::error_code ec;
    for (;;) {
      http::request<http::string_body> req;
      http::read(socket, buffer, req, ec);
      if (ec) break;
      const Target target = parse_target(std::string_view(req.target().data(), req.target().size()));
      if (websocket::is_upgrade(req)) {
        if (target.path == "/ws") serve_ws(socket, req, target);
        return;
      }
      auto res = route(req, target);
      http::write(socket, res, ec);
      if (ec || !res.keep_alive()) break;
    }
    socket.shutdown(tcp::socket::shutdown_send, ec);
  }

  static std::string session_of(const Target& t) {
    auto it = t.query.find("session");
    return it == t.query.end() ? Service::kDefaultSession : it->second;
  }

  http::response<http::string_body> route(const http::request<http::string_body>& req, const Target& target) {
    const std::string session = session_of(target);
    HttpReply reply;
    try {
      if (target.path == "/snapshot" && req.method() == http::verb::post)
        reply = service_.post_snapshot(session, req.body());
      else if (target.path == "/state" && req.method() == http::verb::get)
        reply = service_.get_state(session);
      else if (target.path == "/history" && req.method() == http::verb::get)
        reply = service_.get_history(session);
      else if (target.path == "/close" && req.method() == http::verb::post)
        reply = service_.close_session(session);
      else if (target.path == "/snapshot" || target.path == "/state" || target.path == "/history" || target.path == "/close")
        reply = error_reply(405, "method_not_allowed", "method not allowed");
      else
        reply = error_reply(404, "not_found", "no route for " + target.path);
    } catch (const std::exception& e) {
      reply = error_reply(500, "internal", e.what());
    }
    http::response<http::string_body> res{static_cast<http::status>(reply.status), req.version()};
    res.set(http::field::server, "mimetic");
    res.set(http::field::content_type, "application/json");
    res.set(http::field::access_control_allow_origin, "*");
    res.keep_alive(req.keep_alive());
    res.body() = reply.body.dump();
    res.prepare_payload();
    return res;
  }

  void serve_ws(tcp::socket& socket, const http::request<http::string_body>& req, const Target& target) {
    auto sub = service_.subscribe(session_of(target));
    if (!sub) {
      http::response<http::string_body> res{http::status::not_found, req.version()};
      res.set(http::field::content_type, "application/json");
      res.body() = error_reply(404, "unknown_session", "no such session").body.dump();
      res.prepare_payload();
      beast::error_code ec;
      http::write(socket, res, ec);
      return;
    }
    websocket::stream<tcp::socket&> ws(socket);
    beast::error_code ec;
    ws.accept(req, ec);
    if (ec) return;
    ws.text(true);
    while (!stopping_) {
      // The client only sends control frames; reading them answers pings and
      // close requests, and notices a dropped peer.
      if (readable(socket)) {
        beast::flat_buffer incoming;
        ws.read(incoming, ec);
        if (ec) break;
      }
      auto ev = sub->pop(std::chrono::milliseconds(100));
      if (!ev) {
        if (sub->closed()) break;
        continue;
      }
      ws.write(net::buffer(*ev), ec);
      if (ec) break;
    }
    sub->close();
    ws.close(websocket::close_code::going_away, ec);
  }

  static bool readable(tcp::socket& socket) {
    pollfd p{socket.native_handle(), POLLIN, 0};
    return ::poll(&p, 1, 0) > 0 && (p.revents & (POLLIN | POLLHUP | POLLERR));
  }

  Service& service_;
  net::io_context ioc_;
  tcp::acceptor acceptor_;
  unsigned short port_ = 0;
  std::thread io_thread_;
  std::atomic<bool> stopping_{false};

  std::mutex conn_mu_;
  std::list<Connection> connections_;

  std::mutex stop_mu_;
  std::condition_variable stop_cv_;
  bool stopped_ = false;
};

}  // namespace mimetic

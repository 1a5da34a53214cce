#pragma once

// Newline-delimited JSON IQ estimation over a Unix stream socket.
//
//   request:  {"id": <string|number>, "turns": [{"system_text": s, "user_text": s}, ...]}
//   response: {"id": <echoed>, "iq": 1..5, "probs": [p1, ..., p5]}
//   error:    {"id": <echoed or null>, "error": message}
//
// One response per request line, in request order, per connection.

#include <sys/socket.h>
#include <sys/un.h>
#include <poll.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <functional>
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "iqrl/env/estimator.hpp"
#include "json.hpp"

namespace iqrl::env {

namespace wire {

using nlohmann::json;

struct Request {
  json id;
  corpus::AnnotatedDialogue transcript;
};

inline std::string encode_request(const json& id, const corpus::AnnotatedDialogue& transcript) {
  json turns = json::array();
  for (const auto& t : transcript.turns) turns.push_back({{"system_text", t.system_text}, {"user_text", t.user_text}});
  return json{{"id", id}, {"turns", std::move(turns)}}.dump() + "\n";
}

/// Throws ParseError; `id` is set to whatever id could be recovered first.
inline Request parse_request(const std::string& line, json& id) {
  id = nullptr;
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed request: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("request must be a JSON object");
  if (j.contains("id") && (j["id"].is_string() || j["id"].is_number_integer())) id = j["id"];
  if (id.is_null()) throw ParseError("request needs a string or integer \"id\"");
  if (!j.contains("turns") || !j["turns"].is_array()) throw ParseError("request needs a \"turns\" array");
  if (j["turns"].empty()) throw ParseError("request has no turns");
  Request r{id, {id.is_string() ? id.get<std::string>() : id.dump(), {}}};
  for (const auto& t : j["turns"]) {
    if (!t.is_object() || !t.contains("system_text") || !t["system_text"].is_string() || !t.contains("user_text") ||
        !t["user_text"].is_string()) {
      throw ParseError("turn " + std::to_string(r.transcript.turns.size()) + " needs string system_text and user_text");
    }
    r.transcript.turns.push_back({r.transcript.turns.size(), t["system_text"], t["user_text"], std::nullopt});
  }
  return r;
}

inline std::string encode_response(const json& id, const IqEstimate& e) {
  return json{{"id", id}, {"iq", e.iq}, {"probs", e.probs}}.dump() + "\n";
}

inline std::string encode_error(const json& id, const std::string& message) {
  return json{{"id", id}, {"error", message}}.dump() + "\n";
}

/// Parses a response and checks it answers `expected_id`.
inline IqEstimate parse_response(const std::string& line, const json& expected_id) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed response: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("response must be a JSON object");
  if (j.contains("error")) throw Error("service error: " + j["error"].dump());
  if (j.value("id", json()) != expected_id) throw ParseError("response id " + j.value("id", json()).dump() + " does not match");
  if (!j.contains("iq") || !j["iq"].is_number_integer() || !j.contains("probs") || !j["probs"].is_array() ||
      j["probs"].size() != 5) {
    throw ParseError("response needs integer \"iq\" and five \"probs\"");
  }
  IqEstimate e;
  e.iq = j["iq"];
  if (e.iq < corpus::kMinIq || e.iq > corpus::kMaxIq) throw ParseError("response iq outside 1..5");
  for (std::size_t c = 0; c < 5; ++c) {
    if (!j["probs"][c].is_number()) throw ParseError("response probs must be numbers");
    e.probs[c] = j["probs"][c];
  }
  return e;
}

}  // namespace wire

namespace detail {

inline sockaddr_un unix_address(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.empty() || path.size() >= sizeof addr.sun_path) throw Error("socket path '" + path + "' is empty or too long");
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  return addr;
}

inline std::string errno_text() { return std::strerror(errno); }

inline bool write_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

/// Buffered line reader over a socket.
class LineReader {
 public:
  explicit LineReader(int fd) : fd_(fd) {}

  /// False on end of stream; throws on timeout or socket error.
  bool next(std::string& line) {
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return true;
      }
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) throw Error("timed out waiting for data");
      if (n < 0) throw Error("socket read failed: " + errno_text());
      if (n == 0) {
        if (buffer_.empty()) return false;
        line = std::move(buffer_);
        buffer_.clear();
        return true;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buffer_;
};

}  // namespace detail

using EstimateHandler = std::function<IqEstimate(const corpus::AnnotatedDialogue&)>;

/// Answers one request line; never throws.
inline std::string handle_request_line(const std::string& line, const EstimateHandler& handler) {
  wire::json id;
  try {
    const wire::Request r = wire::parse_request(line, id);
    return wire::encode_response(r.id, handler(r.transcript));
  } catch (const std::exception& e) {
    return wire::encode_error(id, e.what());
  }
}

/// Listens on a Unix socket path and serves each connection on its own thread.
class IqService {
 public:
  IqService(std::string path, EstimateHandler handler) : path_(std::move(path)), handler_(std::move(handler)) {
    const sockaddr_un addr = detail::unix_address(path_);
    listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error("socket: " + detail::errno_text());
    ::unlink(path_.c_str());
    if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 64) != 0) {
      const std::string why = detail::errno_text();
      ::close(listen_fd_);
      throw Error("cannot listen on " + path_ + ": " + why);
    }
  }

  IqService(const IqService&) = delete;
  IqService& operator=(const IqService&) = delete;

  ~IqService() {
    stop();
    for (auto& t : workers_) t.join();
    ::close(listen_fd_);
    ::unlink(path_.c_str());
  }

  const std::string& path() const { return path_; }

  /// Blocks until stop() is called.
  void run() {
    while (!stopping_) {
      pollfd p{listen_fd_, POLLIN, 0};
      const int ready = ::poll(&p, 1, 100);
      if (ready <= 0) continue;
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      std::lock_guard lock(mutex_);
      workers_.emplace_back([this, fd] { serve_connection(fd); });
    }
  }

  void stop() { stopping_ = true; }

 private:
  void serve_connection(int fd) {
    detail::LineReader reader(fd);
    std::string line;
    try {
      while (!stopping_ && reader.next(line)) {
        if (line.empty()) continue;
        if (!detail::write_all(fd, handle_request_line(line, handler_))) break;
      }
    } catch (const Error&) {
    }
    ::close(fd);
  }

  std::string path_;
  EstimateHandler handler_;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::mutex mutex_;
  std::list<std::thread> workers_;
};

/// Client side: one persistent connection, one request in flight.
class ServiceIqEstimator : public IqEstimator {
 public:
  explicit ServiceIqEstimator(const std::string& path, double timeout_seconds = 30.0) {
    const sockaddr_un addr = detail::unix_address(path);
    fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (fd_ < 0) throw Error("socket: " + detail::errno_text());
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout_seconds);
    tv.tv_usec = static_cast<suseconds_t>((timeout_seconds - static_cast<double>(tv.tv_sec)) * 1e6);
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    if (::connect(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
      const std::string why = detail::errno_text();
      ::close(fd_);
      throw Error("cannot connect to IQ service at " + path + ": " + why);
    }
    reader_.emplace(fd_);
  }

  ServiceIqEstimator(const ServiceIqEstimator&) = delete;
  ServiceIqEstimator& operator=(const ServiceIqEstimator&) = delete;
  ~ServiceIqEstimator() override { ::close(fd_); }

  IqEstimate estimate(const corpus::AnnotatedDialogue& transcript, const std::vector<bool>&) override {
    const std::string& id = transcript.dialogue_id;
    try {
      if (transcript.turns.empty()) throw Error("empty transcript");
      if (!detail::write_all(fd_, wire::encode_request(id, transcript))) throw Error("send failed");
      std::string line;
      if (!reader_->next(line)) throw Error("service closed the connection");
      return wire::parse_response(line, id);
    } catch (const Error& e) {
      throw Error("estimate_iq: episode '" + id + "': " + e.what());
    }
  }

 private:
  int fd_ = -1;
  std::optional<detail::LineReader> reader_;
};

}  // namespace iqrl::env

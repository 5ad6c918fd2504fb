#pragma once

// Blocking POSIX TCP helpers, a TCP ByteLink, and just enough HTTP/1.1 and
// WebSocket (RFC 6455) to serve static files and one console channel.

#include <torqueflow/error.hpp>
#include <torqueflow/link.hpp>

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace torqueflow::net {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

/// Listens on host:port. Port 0 picks a free port; see local_port().
inline Socket listen_tcp(std::uint16_t port, const std::string& host = "127.0.0.1") {
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw Error(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw ConfigError("bad bind address " + host);
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
    throw Error("port " + std::to_string(port) + " busy: " + std::strerror(errno));
  if (::listen(s.fd(), 8) != 0) throw Error(std::string("listen: ") + std::strerror(errno));
  return s;
}

inline std::uint16_t local_port(const Socket& s) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

inline Socket connect_tcp(const std::string& host, std::uint16_t port) {
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw Error(std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw ConfigError("bad address " + host);
  if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
    throw Error("connect " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
  int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return s;
}

/// Waits up to timeout_ms for fd to become readable.
inline bool wait_readable(int fd, int timeout_ms) {
  pollfd p{fd, POLLIN, 0};
  const int r = ::poll(&p, 1, timeout_ms);
  return r > 0 && (p.revents & (POLLIN | POLLHUP | POLLERR));
}

inline std::optional<Socket> accept_for(const Socket& listener, int timeout_ms) {
  if (!wait_readable(listener.fd(), timeout_ms)) return std::nullopt;
  const int fd = ::accept4(listener.fd(), nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) return std::nullopt;
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return Socket(fd);
}

inline bool send_all(int fd, std::string_view bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

enum class ReadStatus { kData, kNothing, kClosed };

/// Reads whatever is available without blocking.
inline ReadStatus read_available(int fd, std::string& out) {
  char buf[4096];
  ReadStatus st = ReadStatus::kNothing;
  for (;;) {
    const ssize_t n = ::recv(fd, buf, sizeof buf, MSG_DONTWAIT);
    if (n > 0) {
      out.append(buf, static_cast<std::size_t>(n));
      st = ReadStatus::kData;
      continue;
    }
    if (n == 0) return ReadStatus::kClosed;
    if (errno == EINTR) continue;
    if (errno == EAGAIN || errno == EWOULDBLOCK) return st;
    return ReadStatus::kClosed;
  }
}

/// ByteLink over a connected TCP socket.
class TcpLink : public ByteLink {
 public:
  explicit TcpLink(Socket s) : sock_(std::move(s)) {}

  bool send(std::string_view bytes) override {
    if (!up_) return false;
    if (!send_all(sock_.fd(), bytes)) up_ = false;
    return up_;
  }
  std::string receive() override {
    std::string out;
    if (up_ && read_available(sock_.fd(), out) == ReadStatus::kClosed) up_ = false;
    return out;
  }
  bool connected() const override { return up_; }
  int fd() const { return sock_.fd(); }

 private:
  Socket sock_;
  bool up_ = true;
};

// ---- HTTP ----

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> headers;  // lower-case names

  std::string header(const std::string& name) const {
    auto it = headers.find(name);
    return it == headers.end() ? std::string() : it->second;
  }
};

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// Parses a request head once "\r\n\r\n" has arrived; consumes it from buf.
inline std::optional<HttpRequest> take_http_request(std::string& buf) {
  const auto end = buf.find("\r\n\r\n");
  if (end == std::string::npos) return std::nullopt;
  const std::string head = buf.substr(0, end);
  buf.erase(0, end + 4);
  HttpRequest req;
  std::size_t pos = head.find("\r\n");
  const std::string first = head.substr(0, pos);
  const auto sp1 = first.find(' ');
  const auto sp2 = first.find(' ', sp1 + 1);
  if (sp1 == std::string::npos || sp2 == std::string::npos) throw Error("bad HTTP request line");
  req.method = first.substr(0, sp1);
  req.path = first.substr(sp1 + 1, sp2 - sp1 - 1);
  while (pos != std::string::npos) {
    const auto next = head.find("\r\n", pos + 2);
    const std::string line = head.substr(pos + 2, next == std::string::npos ? std::string::npos : next - pos - 2);
    pos = next;
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string value = line.substr(colon + 1);
    while (!value.empty() && value.front() == ' ') value.erase(0, 1);
    req.headers[lower(line.substr(0, colon))] = value;
  }
  return req;
}

inline std::string http_response(int status, const std::string& reason, const std::string& content_type,
                                 const std::string& body) {
  return "HTTP/1.1 " + std::to_string(status) + " " + reason + "\r\nContent-Type: " + content_type +
         "\r\nContent-Length: " + std::to_string(body.size()) + "\r\nConnection: close\r\n\r\n" + body;
}

inline std::string content_type_for(std::string_view path) {
  auto ends = [&](std::string_view ext) { return path.ends_with(ext); };
  if (ends(".html")) return "text/html; charset=utf-8";
  if (ends(".js") || ends(".mjs")) return "text/javascript";
  if (ends(".css")) return "text/css";
  if (ends(".json")) return "application/json";
  if (ends(".svg")) return "image/svg+xml";
  if (ends(".png")) return "image/png";
  if (ends(".csv")) return "text/csv";
  return "application/octet-stream";
}

// ---- WebSocket ----

inline std::string base64(const unsigned char* data, std::size_t n) {
  std::string out(4 * ((n + 2) / 3), '\0');
  const int len = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data, static_cast<int>(n));
  out.resize(static_cast<std::size_t>(len));
  return out;
}

inline std::string websocket_accept(const std::string& key) {
  const std::string s = key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(s.data()), s.size(), digest);
  return base64(digest, sizeof digest);
}

inline bool is_websocket_upgrade(const HttpRequest& req) {
  return lower(req.header("upgrade")) == "websocket" && !req.header("sec-websocket-key").empty();
}

inline std::string websocket_handshake_response(const HttpRequest& req) {
  return "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Accept: " +
         websocket_accept(req.header("sec-websocket-key")) + "\r\n\r\n";
}

enum class WsOpcode : std::uint8_t { kContinuation = 0, kText = 1, kBinary = 2, kClose = 8, kPing = 9, kPong = 10 };

/// One frame. Clients must mask; servers must not.
inline std::string ws_frame(WsOpcode op, std::string_view payload, std::optional<std::uint32_t> mask = std::nullopt) {
  std::string f;
  f.push_back(static_cast<char>(0x80 | static_cast<std::uint8_t>(op)));
  const std::uint8_t mbit = mask ? 0x80 : 0;
  const std::size_t n = payload.size();
  if (n < 126) {
    f.push_back(static_cast<char>(mbit | n));
  } else if (n <= 0xFFFF) {
    f.push_back(static_cast<char>(mbit | 126));
    f.push_back(static_cast<char>(n >> 8));
    f.push_back(static_cast<char>(n & 0xFF));
  } else {
    f.push_back(static_cast<char>(mbit | 127));
    for (int i = 7; i >= 0; --i) f.push_back(static_cast<char>((static_cast<std::uint64_t>(n) >> (8 * i)) & 0xFF));
  }
  if (!mask) {
    f.append(payload);
    return f;
  }
  unsigned char key[4] = {static_cast<unsigned char>(*mask >> 24), static_cast<unsigned char>(*mask >> 16),
                          static_cast<unsigned char>(*mask >> 8), static_cast<unsigned char>(*mask)};
  f.append(reinterpret_cast<char*>(key), 4);
  for (std::size_t i = 0; i < n; ++i) f.push_back(static_cast<char>(payload[i] ^ key[i % 4]));
  return f;
}

struct WsMessage {
  WsOpcode opcode = WsOpcode::kText;
  std::string payload;
};

/// Reassembles messages from a byte stream, unmasking as needed.
class WsDecoder {
 public:
  static constexpr std::size_t kMaxMessage = 1 << 20;

  void feed(std::string_view bytes) { buf_.append(bytes); }

  /// Throws Error on protocol violations.
  std::optional<WsMessage> next() {
    for (;;) {
      if (buf_.size() < 2) return std::nullopt;
      const auto b0 = static_cast<std::uint8_t>(buf_[0]);
      const auto b1 = static_cast<std::uint8_t>(buf_[1]);
      const bool fin = b0 & 0x80;
      const auto op = static_cast<WsOpcode>(b0 & 0x0F);
      const bool masked = b1 & 0x80;
      std::uint64_t len = b1 & 0x7F;
      std::size_t pos = 2;
      if (len == 126) {
        if (buf_.size() < 4) return std::nullopt;
        len = (static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf_[2])) << 8) | static_cast<std::uint8_t>(buf_[3]);
        pos = 4;
      } else if (len == 127) {
        if (buf_.size() < 10) return std::nullopt;
        len = 0;
        for (int i = 0; i < 8; ++i) len = (len << 8) | static_cast<std::uint8_t>(buf_[2 + i]);
        pos = 10;
      }
      if (len > kMaxMessage) throw Error("websocket frame too large");
      const std::size_t need = pos + (masked ? 4 : 0) + static_cast<std::size_t>(len);
      if (buf_.size() < need) return std::nullopt;
      std::string payload = buf_.substr(pos + (masked ? 4 : 0), static_cast<std::size_t>(len));
      if (masked) {
        const char* key = buf_.data() + pos;
        for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<char>(payload[i] ^ key[i % 4]);
      }
      buf_.erase(0, need);

      if (op == WsOpcode::kClose || op == WsOpcode::kPing || op == WsOpcode::kPong) return WsMessage{op, payload};
      if (op == WsOpcode::kContinuation) {
        if (!partial_) throw Error("websocket continuation without a start frame");
        partial_->payload += payload;
      } else {
        if (partial_) throw Error("websocket message interleaved");
        partial_ = WsMessage{op, payload};
      }
      if (partial_->payload.size() > kMaxMessage) throw Error("websocket message too large");
      if (fin) {
        WsMessage m = std::move(*partial_);
        partial_.reset();
        return m;
      }
    }
  }

 private:
  std::string buf_;
  std::optional<WsMessage> partial_;
};

}  // namespace torqueflow::net

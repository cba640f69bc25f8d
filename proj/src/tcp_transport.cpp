#include "gnnserve/tcp_transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

namespace gnnserve {

namespace {

void put_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

void send_all(int fd, const std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const auto n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(sys_error("send"));
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

void recv_all(int fd, std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const auto n = ::recv(fd, data, len, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(sys_error("recv"));
    }
    if (n == 0) throw TransportError("peer closed the connection");
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

std::pair<std::string, std::uint16_t> split_endpoint(const std::string& ep) {
  const auto colon = ep.rfind(':');
  if (colon == std::string::npos) throw InvalidArgument("peer '" + ep + "' is not host:port");
  const auto port = std::stoul(ep.substr(colon + 1));
  if (port == 0 || port > 65535) throw InvalidArgument("peer '" + ep + "' has an invalid port");
  return {ep.substr(0, colon), static_cast<std::uint16_t>(port)};
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
    throw TransportError("cannot resolve host '" + host + "'");
  sockaddr_in addr = *reinterpret_cast<sockaddr_in*>(res->ai_addr);
  ::freeaddrinfo(res);
  addr.sin_port = htons(port);
  return addr;
}

int make_listener(const sockaddr_in& addr) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError(sys_error("socket"));
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw TransportError(sys_error("bind"));
  }
  if (::listen(fd, 64) != 0) {
    ::close(fd);
    throw TransportError(sys_error("listen"));
  }
  return fd;
}

void tune(int fd) {
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

Bytes encode_frame(std::uint32_t seq, const Bytes& payload) {
  if (payload.size() > 0xffffffffULL) throw TransportError("frame payload exceeds 4 GiB");
  Bytes out(kFrameHeaderBytes + payload.size());
  std::memcpy(out.data(), kFrameMagic, 4);
  put_u32(out.data() + 4, seq);
  put_u32(out.data() + 8, static_cast<std::uint32_t>(payload.size()));
  std::copy(payload.begin(), payload.end(), out.begin() + kFrameHeaderBytes);
  return out;
}

FrameHeader decode_frame_header(const std::uint8_t* header) {
  if (std::memcmp(header, kFrameMagic, 4) != 0) throw TransportError("bad frame magic");
  return {get_u32(header + 4), get_u32(header + 8)};
}

TcpTransport::TcpTransport(std::uint32_t rank, int listen_fd, std::uint32_t size)
    : rank_(rank), listen_fd_(listen_fd), fds_(size, -1) {}

TcpTransport::TcpTransport(std::uint32_t rank, const std::vector<std::string>& peers)
    : rank_(rank), fds_(peers.size(), -1) {
  require(!peers.empty(), "tcp: empty peer list");
  require(rank < peers.size(), "tcp: rank out of range for the peer list");
  const auto [host, port] = split_endpoint(peers[rank]);
  auto addr = resolve(host, port);
  listen_fd_ = make_listener(addr);
  connect_mesh(peers);
}

TcpTransport::~TcpTransport() {
  for (int fd : fds_)
    if (fd >= 0) ::close(fd);
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpTransport::connect_mesh(const std::vector<std::string>& peers) {
  const auto P = static_cast<std::uint32_t>(fds_.size());
  for (std::uint32_t j = 0; j < rank_; ++j) {
    const auto [host, port] = split_endpoint(peers[j]);
    const auto addr = resolve(host, port);
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(30);
    int fd = -1;
    for (;;) {
      fd = ::socket(AF_INET, SOCK_STREAM, 0);
      if (fd < 0) throw TransportError(sys_error("socket"));
      if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) break;
      ::close(fd);
      if (std::chrono::steady_clock::now() > deadline)
        throw TransportError("cannot connect to rank " + std::to_string(j) + " at " + peers[j]);
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    tune(fd);
    std::uint8_t hello[4];
    put_u32(hello, rank_);
    send_all(fd, hello, 4);
    fds_[j] = fd;
  }
  for (std::uint32_t accepted = rank_ + 1; accepted < P; ++accepted) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) throw TransportError(sys_error("accept"));
    tune(fd);
    std::uint8_t hello[4];
    recv_all(fd, hello, 4);
    const auto peer = get_u32(hello);
    if (peer <= rank_ || peer >= P || fds_[peer] >= 0) {
      ::close(fd);
      throw TransportError("unexpected handshake from rank " + std::to_string(peer));
    }
    fds_[peer] = fd;
  }
}

std::vector<std::unique_ptr<Transport>> TcpTransport::local_mesh(std::uint32_t size) {
  require(size >= 1, "tcp: world size must be >= 1");
  std::vector<std::string> peers;
  std::vector<int> listeners;
  for (std::uint32_t r = 0; r < size; ++r) {
    auto addr = resolve("127.0.0.1", 0);
    addr.sin_port = 0;
    const int fd = make_listener(addr);
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
    listeners.push_back(fd);
    peers.push_back("127.0.0.1:" + std::to_string(ntohs(bound.sin_port)));
  }
  std::vector<std::unique_ptr<TcpTransport>> made(size);
  for (std::uint32_t r = 0; r < size; ++r)
    made[r].reset(new TcpTransport(r, listeners[r], size));
  std::vector<std::exception_ptr> errors(size);
  std::vector<std::thread> threads;
  for (std::uint32_t r = 0; r < size; ++r) {
    threads.emplace_back([&, r] {
      try {
        made[r]->connect_mesh(peers);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<std::unique_ptr<Transport>> out;
  for (auto& m : made) out.push_back(std::move(m));
  return out;
}

std::vector<Bytes> TcpTransport::exchange(std::vector<Bytes> outgoing, const std::string& /*tag*/) {
  const auto P = size();
  require(outgoing.size() == P, "tcp: outgoing list must have one entry per rank");
  if (aborted_) throw TransportError("transport aborted");
  const auto seq = seq_++;

  std::vector<Bytes> incoming(P);
  incoming[rank_] = std::move(outgoing[rank_]);
  std::vector<std::exception_ptr> send_errors(P);
  std::vector<std::thread> senders;
  for (std::uint32_t j = 0; j < P; ++j) {
    if (j == rank_) continue;
    senders.emplace_back([&, j] {
      try {
        const auto frame = encode_frame(seq, outgoing[j]);
        send_all(fds_[j], frame.data(), frame.size());
      } catch (...) {
        send_errors[j] = std::current_exception();
      }
    });
  }
  std::exception_ptr recv_error;
  try {
    for (std::uint32_t j = 0; j < P; ++j) {
      if (j == rank_) continue;
      std::uint8_t header[kFrameHeaderBytes];
      recv_all(fds_[j], header, kFrameHeaderBytes);
      const auto h = decode_frame_header(header);
      if (h.seq != seq)
        throw TransportError("unmatched collective: rank " + std::to_string(j) + " sent sequence " +
                             std::to_string(h.seq) + ", expected " + std::to_string(seq));
      incoming[j].resize(h.length);
      recv_all(fds_[j], incoming[j].data(), h.length);
    }
  } catch (...) {
    recv_error = std::current_exception();
    abort("receive failed");
  }
  for (auto& t : senders) t.join();
  if (recv_error) std::rethrow_exception(recv_error);
  for (auto& e : send_errors)
    if (e) std::rethrow_exception(e);
  return incoming;
}

void TcpTransport::abort(const std::string& /*reason*/) {
  aborted_ = true;
  for (int fd : fds_)
    if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
}

}  // namespace gnnserve

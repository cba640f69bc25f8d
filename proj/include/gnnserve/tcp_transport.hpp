#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gnnserve/collectives.hpp"

namespace gnnserve {

/// Stream framing: magic (4 bytes), sequence (u32), payload length (u32),
/// payload. Integers are little-endian.
inline constexpr std::uint8_t kFrameMagic[4] = {'G', 'N', 'S', 'F'};
inline constexpr std::size_t kFrameHeaderBytes = 12;

Bytes encode_frame(std::uint32_t seq, const Bytes& payload);
struct FrameHeader {
  std::uint32_t seq = 0;
  std::uint32_t length = 0;
};
/// Throws TransportError on a bad magic.
FrameHeader decode_frame_header(const std::uint8_t* header);

/// Full-mesh TCP transport. Rank r listens on peers[r] and connects to every
/// lower rank; each exchange sends one frame per peer.
class TcpTransport final : public Transport {
 public:
  /// peers are host:port strings, one per rank.
  TcpTransport(std::uint32_t rank, const std::vector<std::string>& peers);
  ~TcpTransport() override;

  /// Builds a P-rank mesh over loopback on ephemeral ports.
  static std::vector<std::unique_ptr<Transport>> local_mesh(std::uint32_t size);

  std::uint32_t rank() const override { return rank_; }
  std::uint32_t size() const override { return static_cast<std::uint32_t>(fds_.size()); }
  std::vector<Bytes> exchange(std::vector<Bytes> outgoing, const std::string& tag) override;
  void abort(const std::string& reason) override;

 private:
  TcpTransport(std::uint32_t rank, int listen_fd, std::uint32_t size);
  void connect_mesh(const std::vector<std::string>& peers);

  std::uint32_t rank_;
  int listen_fd_ = -1;
  std::vector<int> fds_;  // fds_[rank_] unused
  std::uint32_t seq_ = 0;
  bool aborted_ = false;
};

}  // namespace gnnserve

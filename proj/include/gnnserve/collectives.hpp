#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "gnnserve/types.hpp"

namespace gnnserve {

struct CollectiveStats {
  std::uint64_t calls = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
};

/// Per-rank traffic counters. Bytes are payload bytes to and from other
/// ranks; a rank's message to itself is not counted.
struct CommCounters {
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t frames_sent = 0;
  std::map<std::string, CollectiveStats> by_collective;

  std::uint64_t sent(const std::string& tag) const;
};

/// Moves one round of point-to-point payloads: outgoing[i] goes to rank i,
/// the result's entry j came from rank j. `tag` must match on all ranks.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::uint32_t rank() const = 0;
  virtual std::uint32_t size() const = 0;
  virtual std::vector<Bytes> exchange(std::vector<Bytes> outgoing, const std::string& tag) = 0;
  /// Unblocks peers after a local failure; later calls throw TransportError.
  virtual void abort(const std::string& reason) = 0;
};

/// In-process rendezvous shared by the ranks of a simulated world.
class SimHub {
 public:
  struct Options {
    std::uint64_t jitter_seed = 0;  // nonzero: randomized per-call delays
    std::chrono::milliseconds timeout{120000};
  };

  explicit SimHub(std::uint32_t size) : SimHub(size, Options{}) {}
  SimHub(std::uint32_t size, Options options);

  std::uint32_t size() const { return size_; }
  std::vector<Bytes> exchange(std::uint32_t rank, std::vector<Bytes> outgoing, const std::string& tag);
  void abort(const std::string& reason);

 private:
  std::uint32_t size_;
  Options options_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t generation_ = 0;
  std::uint32_t arrived_ = 0;
  std::string round_tag_;
  bool aborted_ = false;
  std::string abort_reason_;
  std::vector<std::uint64_t> calls_;                    // per rank, for jitter streams
  std::vector<std::vector<Bytes>> mailbox_[2];          // [parity][src][dst]
};

class SimTransport final : public Transport {
 public:
  SimTransport(std::shared_ptr<SimHub> hub, std::uint32_t rank) : hub_(std::move(hub)), rank_(rank) {}
  std::uint32_t rank() const override { return rank_; }
  std::uint32_t size() const override { return hub_->size(); }
  std::vector<Bytes> exchange(std::vector<Bytes> outgoing, const std::string& tag) override {
    return hub_->exchange(rank_, std::move(outgoing), tag);
  }
  void abort(const std::string& reason) override { hub_->abort(reason); }

 private:
  std::shared_ptr<SimHub> hub_;
  std::uint32_t rank_;
};

/// A rank's handle on the world: synchronous collectives plus counters.
class World {
 public:
  explicit World(std::unique_ptr<Transport> transport);

  std::uint32_t rank() const { return transport_->rank(); }
  std::uint32_t size() const { return transport_->size(); }

  /// Every rank receives all ranks' payloads in rank order.
  std::vector<Bytes> all_gather(const Bytes& local, const std::string& tag = "all_gather");
  /// incoming[j] on rank r is outgoing[r] from rank j.
  std::vector<Bytes> all_to_all(std::vector<Bytes> outgoing, const std::string& tag = "all_to_all");
  void barrier();

  const CommCounters& counters() const { return counters_; }
  void reset_counters() { counters_ = {}; }
  Transport& transport() { return *transport_; }

 private:
  std::vector<Bytes> run(std::vector<Bytes> outgoing, const std::string& op, const std::string& tag);

  std::unique_ptr<Transport> transport_;
  CommCounters counters_;
  std::uint64_t seq_ = 0;
};

enum class TransportKind : std::uint8_t { kSim, kTcp };
TransportKind parse_transport(const std::string& name);

struct WorldOptions {
  TransportKind transport = TransportKind::kSim;
  std::uint64_t jitter_seed = 0;
};

/// Runs fn on P ranks, one thread each, in this process. The first failure
/// aborts the world; the lowest failing rank's exception is rethrown after
/// all threads have joined. Returns each rank's final counters.
std::vector<CommCounters> run_world(std::uint32_t size, const std::function<void(World&)>& fn,
                                    const WorldOptions& options = {});

}  // namespace gnnserve

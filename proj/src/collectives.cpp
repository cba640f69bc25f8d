#include "gnnserve/collectives.hpp"

#include <exception>
#include <thread>

#include "gnnserve/hash.hpp"
#include "gnnserve/tcp_transport.hpp"

namespace gnnserve {

std::uint64_t CommCounters::sent(const std::string& tag) const {
  std::uint64_t total = 0;
  for (const auto& [key, s] : by_collective)
    if (key.compare(0, tag.size(), tag) == 0) total += s.bytes_sent;
  return total;
}

SimHub::SimHub(std::uint32_t size, Options options) : size_(size), options_(options), calls_(size, 0) {
  require(size >= 1, "world size must be >= 1");
  for (auto& box : mailbox_) box.assign(size, std::vector<Bytes>(size));
}

void SimHub::abort(const std::string& reason) {
  std::lock_guard lk(mu_);
  if (!aborted_) {
    aborted_ = true;
    abort_reason_ = reason;
  }
  cv_.notify_all();
}

std::vector<Bytes> SimHub::exchange(std::uint32_t rank, std::vector<Bytes> outgoing, const std::string& tag) {
  require(rank < size_, "sim: rank out of range");
  require(outgoing.size() == size_, "sim: outgoing list must have one entry per rank");
  if (options_.jitter_seed != 0) {
    const auto delay = mix64(calls_[rank]++, mix64(rank, options_.jitter_seed)) % 200;
    std::this_thread::sleep_for(std::chrono::microseconds(delay));
  }

  std::unique_lock lk(mu_);
  if (aborted_) throw TransportError("collective aborted: " + abort_reason_);
  const auto gen = generation_;
  const auto parity = gen & 1;
  if (arrived_ == 0) {
    round_tag_ = tag;
  } else if (tag != round_tag_) {
    aborted_ = true;
    abort_reason_ = "unmatched collective '" + tag + "' vs '" + round_tag_ + "'";
    cv_.notify_all();
    throw TransportError(abort_reason_);
  }
  mailbox_[parity][rank] = std::move(outgoing);
  if (++arrived_ == size_) {
    arrived_ = 0;
    ++generation_;
    cv_.notify_all();
  } else {
    const bool done = cv_.wait_for(lk, options_.timeout, [&] { return generation_ != gen || aborted_; });
    if (!done) {
      aborted_ = true;
      abort_reason_ = "timeout in collective '" + tag + "'";
      cv_.notify_all();
      throw TransportError(abort_reason_);
    }
    if (generation_ == gen) throw TransportError("collective aborted: " + abort_reason_);
  }
  std::vector<Bytes> incoming(size_);
  for (std::uint32_t src = 0; src < size_; ++src) incoming[src] = std::move(mailbox_[parity][src][rank]);
  return incoming;
}

World::World(std::unique_ptr<Transport> transport) : transport_(std::move(transport)) {
  require(transport_ != nullptr, "world: null transport");
}

std::vector<Bytes> World::run(std::vector<Bytes> outgoing, const std::string& op, const std::string& tag) {
  const auto key = tag.empty() ? op : op + "/" + tag;
  const auto me = rank();
  std::uint64_t sent = 0;
  for (std::uint32_t i = 0; i < outgoing.size(); ++i)
    if (i != me) sent += outgoing[i].size();
  auto incoming = transport_->exchange(std::move(outgoing), key + "#" + std::to_string(seq_++));
  std::uint64_t received = 0;
  for (std::uint32_t j = 0; j < incoming.size(); ++j)
    if (j != me) received += incoming[j].size();

  counters_.bytes_sent += sent;
  counters_.bytes_received += received;
  counters_.frames_sent += size() - 1;
  auto& s = counters_.by_collective[key];
  ++s.calls;
  s.bytes_sent += sent;
  s.bytes_received += received;
  return incoming;
}

std::vector<Bytes> World::all_gather(const Bytes& local, const std::string& tag) {
  std::vector<Bytes> out(size(), local);
  return run(std::move(out), "all_gather", tag == "all_gather" ? "" : tag);
}

std::vector<Bytes> World::all_to_all(std::vector<Bytes> outgoing, const std::string& tag) {
  require(outgoing.size() == size(), "all_to_all: outgoing list must have one entry per rank");
  return run(std::move(outgoing), "all_to_all", tag == "all_to_all" ? "" : tag);
}

void World::barrier() { run(std::vector<Bytes>(size()), "barrier", ""); }

TransportKind parse_transport(const std::string& name) {
  if (name == "sim") return TransportKind::kSim;
  if (name == "tcp") return TransportKind::kTcp;
  throw InvalidArgument("unknown transport '" + name + "'");
}

std::vector<CommCounters> run_world(std::uint32_t size, const std::function<void(World&)>& fn,
                                    const WorldOptions& options) {
  require(size >= 1, "world size must be >= 1");
  std::vector<std::unique_ptr<Transport>> transports;
  if (options.transport == TransportKind::kSim) {
    SimHub::Options hub_opts;
    hub_opts.jitter_seed = options.jitter_seed;
    auto hub = std::make_shared<SimHub>(size, hub_opts);
    for (std::uint32_t r = 0; r < size; ++r) transports.push_back(std::make_unique<SimTransport>(hub, r));
  } else {
    transports = TcpTransport::local_mesh(size);
  }

  std::vector<CommCounters> counters(size);
  std::mutex mu;
  std::exception_ptr first;
  std::vector<std::thread> threads;
  for (std::uint32_t r = 0; r < size; ++r) {
    threads.emplace_back([&, r] {
      World world(std::move(transports[r]));
      try {
        fn(world);
      } catch (...) {
        {
          std::lock_guard lk(mu);
          if (!first) first = std::current_exception();
        }
        world.transport().abort("rank " + std::to_string(r) + " failed");
      }
      counters[r] = world.counters();
    });
  }
  for (auto& t : threads) t.join();
  if (first) std::rethrow_exception(first);
  return counters;
}

}  // namespace gnnserve

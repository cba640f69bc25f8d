#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <string>

#include "gnnserve/collectives.hpp"
#include "gnnserve/tcp_transport.hpp"

using namespace gnnserve;

namespace {

Bytes str_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

Bytes pattern(std::uint32_t from, std::uint32_t to, std::size_t len) {
  Bytes b(len);
  for (std::size_t i = 0; i < len; ++i) b[i] = static_cast<std::uint8_t>(from * 31 + to * 7 + i);
  return b;
}

class BothTransports : public ::testing::TestWithParam<TransportKind> {
 protected:
  WorldOptions opts() const { return WorldOptions{GetParam(), 0}; }
};

}  // namespace

TEST(Collectives, SingleRankReturnsItsInput) {
  const auto counters = run_world(1, [](World& w) {
    EXPECT_EQ(w.all_gather(str_bytes("x")), (std::vector<Bytes>{str_bytes("x")}));
    EXPECT_EQ(w.all_to_all({str_bytes("y")}), (std::vector<Bytes>{str_bytes("y")}));
    w.barrier();
  });
  EXPECT_EQ(counters[0].bytes_sent, 0u);
  EXPECT_EQ(counters[0].bytes_received, 0u);
}

TEST_P(BothTransports, AllGatherInRankOrder) {
  run_world(
      3,
      [](World& w) {
        const std::string mine(1, static_cast<char>('a' + w.rank()));
        const auto got = w.all_gather(str_bytes(mine));
        EXPECT_EQ(got, (std::vector<Bytes>{str_bytes("a"), str_bytes("b"), str_bytes("c")}));
      },
      opts());
}

TEST_P(BothTransports, AllToAllTransposes) {
  const std::uint32_t P = 4;
  run_world(
      P,
      [&](World& w) {
        std::vector<Bytes> out;
        for (std::uint32_t i = 0; i < P; ++i) out.push_back(pattern(w.rank(), i, 3 + i + w.rank()));
        const auto in = w.all_to_all(out);
        for (std::uint32_t j = 0; j < P; ++j) EXPECT_EQ(in[j], pattern(j, w.rank(), 3 + w.rank() + j));
      },
      opts());
}

TEST_P(BothTransports, EmptyPayloadsAreDelivered) {
  run_world(
      3,
      [](World& w) {
        const auto in = w.all_to_all(std::vector<Bytes>(3));
        ASSERT_EQ(in.size(), 3u);
        for (const auto& b : in) EXPECT_TRUE(b.empty());
      },
      opts());
}

TEST_P(BothTransports, ManyRoundsStayInOrder) {
  const std::uint32_t P = 3;
  run_world(
      P,
      [&](World& w) {
        for (std::uint32_t round = 0; round < 1000; ++round) {
          std::vector<Bytes> out(P);
          for (std::uint32_t i = 0; i < P; ++i)
            out[i] = {static_cast<std::uint8_t>(round), static_cast<std::uint8_t>(round >> 8),
                      static_cast<std::uint8_t>(w.rank())};
          const auto in = w.all_to_all(out);
          for (std::uint32_t j = 0; j < P; ++j) {
            ASSERT_EQ(in[j][0] | (in[j][1] << 8), static_cast<int>(round));
            ASSERT_EQ(in[j][2], j);
          }
        }
      },
      opts());
}

TEST_P(BothTransports, CountersMatchTally) {
  const std::uint32_t P = 4;
  std::mt19937_64 rng(3);
  std::vector<std::vector<std::vector<std::size_t>>> len(20, std::vector<std::vector<std::size_t>>(P, std::vector<std::size_t>(P)));
  std::vector<std::uint64_t> want_sent(P, 0), want_recv(P, 0);
  for (auto& round : len)
    for (std::uint32_t s = 0; s < P; ++s)
      for (std::uint32_t d = 0; d < P; ++d) {
        round[s][d] = rng() % 100;
        if (s != d) {
          want_sent[s] += round[s][d];
          want_recv[d] += round[s][d];
        }
      }
  const auto counters = run_world(
      P,
      [&](World& w) {
        for (const auto& round : len) {
          std::vector<Bytes> out;
          for (std::uint32_t d = 0; d < P; ++d) out.push_back(Bytes(round[w.rank()][d], 1));
          w.all_to_all(out, "partials");
        }
      },
      opts());
  std::uint64_t total_sent = 0, total_recv = 0;
  for (std::uint32_t r = 0; r < P; ++r) {
    EXPECT_EQ(counters[r].bytes_sent, want_sent[r]);
    EXPECT_EQ(counters[r].bytes_received, want_recv[r]);
    EXPECT_EQ(counters[r].frames_sent, 20u * (P - 1));
    EXPECT_EQ(counters[r].sent("all_to_all/partials"), want_sent[r]);
    EXPECT_EQ(counters[r].by_collective.at("all_to_all/partials").calls, 20u);
    total_sent += counters[r].bytes_sent;
    total_recv += counters[r].bytes_received;
  }
  EXPECT_EQ(total_sent, total_recv);
}

INSTANTIATE_TEST_SUITE_P(Transports, BothTransports, ::testing::Values(TransportKind::kSim, TransportKind::kTcp),
                         [](const auto& info) { return info.param == TransportKind::kSim ? "sim" : "tcp"; });

TEST(Collectives, JitterDoesNotChangeResults) {
  auto run = [](std::uint64_t jitter) {
    std::vector<std::vector<Bytes>> seen(3);
    run_world(
        3,
        [&](World& w) {
          for (int round = 0; round < 50; ++round) {
            const auto got = w.all_gather(pattern(w.rank(), round, 1 + (round + w.rank()) % 5));
            for (const auto& b : got) seen[w.rank()].push_back(b);
          }
        },
        WorldOptions{TransportKind::kSim, jitter});
    return seen;
  };
  const auto base = run(0);
  EXPECT_EQ(run(7), base);
  EXPECT_EQ(run(99), base);
}

TEST(Collectives, MismatchedCollectivesFail) {
  EXPECT_THROW(run_world(2,
                         [](World& w) {
                           if (w.rank() == 0)
                             w.all_gather(str_bytes("a"));
                           else
                             w.all_to_all(std::vector<Bytes>(2));
                         }),
               TransportError);
}

TEST(Collectives, FailureOnOneRankUnblocksTheOthers) {
  std::atomic<int> unblocked{0};
  EXPECT_THROW(run_world(3,
                         [&](World& w) {
                           if (w.rank() == 1) throw InvalidArgument("boom");
                           try {
                             w.barrier();
                           } catch (const TransportError&) {
                             ++unblocked;
                             throw;
                           }
                         }),
               InvalidArgument);
  EXPECT_EQ(unblocked.load(), 2);
}

TEST(Collectives, SimTimeoutRaises) {
  SimHub::Options o;
  o.timeout = std::chrono::milliseconds(50);
  auto hub = std::make_shared<SimHub>(2, o);
  SimTransport t(hub, 0);
  EXPECT_THROW(t.exchange(std::vector<Bytes>(2), "lonely"), TransportError);
}

TEST(Collectives, WrongFanOutRejected) {
  EXPECT_THROW(run_world(2, [](World& w) { w.all_to_all(std::vector<Bytes>(3)); }), InvalidArgument);
}

TEST(Collectives, TransportNames) {
  EXPECT_EQ(parse_transport("sim"), TransportKind::kSim);
  EXPECT_EQ(parse_transport("tcp"), TransportKind::kTcp);
  EXPECT_THROW(parse_transport("mpi"), InvalidArgument);
}

TEST(TcpFrame, HeaderLayoutIsLittleEndian) {
  const auto f = encode_frame(0x01020304u, Bytes{9, 8, 7});
  ASSERT_EQ(f.size(), kFrameHeaderBytes + 3);
  EXPECT_EQ(Bytes(f.begin(), f.begin() + 4), (Bytes{'G', 'N', 'S', 'F'}));
  EXPECT_EQ(Bytes(f.begin() + 4, f.begin() + 12), (Bytes{4, 3, 2, 1, 3, 0, 0, 0}));
  EXPECT_EQ(Bytes(f.begin() + 12, f.end()), (Bytes{9, 8, 7}));
  const auto h = decode_frame_header(f.data());
  EXPECT_EQ(h.seq, 0x01020304u);
  EXPECT_EQ(h.length, 3u);
}

TEST(TcpFrame, BadMagicRejected) {
  auto f = encode_frame(1, Bytes{1});
  f[0] = 'X';
  EXPECT_THROW(decode_frame_header(f.data()), TransportError);
}

TEST(TcpTransport, AbortUnblocksPeer) {
  auto mesh = TcpTransport::local_mesh(2);
  std::thread t([&] { mesh[1]->abort("stop"); });
  EXPECT_THROW(mesh[0]->exchange(std::vector<Bytes>(2), "x"), TransportError);
  t.join();
}

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

#include "quayfleet/comms.hpp"
#include "quayfleet/errors.hpp"
#include "quayfleet/reservation.hpp"
#include "quayfleet/supervisor.hpp"
#include "quayfleet/terminal_map.hpp"
#include "test_support.hpp"

using namespace quayfleet;

namespace {

const TerminalMap& ring() {
  static const TerminalMap m = build_map(default_terminal_spec());
  return m;
}

Trajectory some_trajectory(test::Rng& rng) {
  const auto& m = ring();
  auto b = m.cells_of_kind(CellKind::QuayCrane);
  for (auto c : m.cells_of_kind(CellKind::StackLane)) b.push_back(c);
  const auto from = b[rng.index(b.size())];
  auto to = b[rng.index(b.size())];
  if (to == from) to = b[(static_cast<std::size_t>(std::find(b.begin(), b.end(), from) - b.begin()) + 1) % b.size()];
  ReservationTable table(m.cell_count(), 1.0);
  auto tr = schedule_velocity(m, plan_path(m, from, to, AgvParams{}), table, AgvParams{},
                              rng.integer(0, 7), rng.uniform(0, 500));
  tr.job = rng.integer(-1, 50);
  tr.revision = static_cast<std::uint32_t>(rng.integer(0, 1000));
  return tr;
}

Message random_message(test::Rng& rng, std::uint64_t seq) {
  Message m;
  m.seq = seq;
  const int kind = rng.integer(0, 2);
  if (kind == 0) {
    m.sender = Endpoint::supervisor();
    CommandPayload c;
    c.agv = rng.integer(0, 7);
    c.mode = Mode::MoveToTarget;
    if (rng.coin()) c.container = static_cast<ContainerKind>(rng.integer(0, 3));
    c.trajectory = some_trajectory(rng);
    c.trajectory.agv = c.agv;
    m.payload = c;
  } else if (kind == 1) {
    m.sender = Endpoint::vehicle(rng.integer(0, 7));
    StatusPayload s;
    s.pose_estimate = {{rng.uniform(-10, 200), rng.uniform(-10, 200), rng.uniform(-3, 3)},
                       rng.uniform(0, 10), rng.uniform(0, 1)};
    s.mode = static_cast<Mode>(rng.integer(0, 3));
    s.battery_Wh = rng.uniform(0, 216000);
    s.path_progress = rng.uniform(0, 400);
    s.revision = static_cast<std::uint32_t>(rng.integer(0, 100));
    if (rng.coin()) s.carried = static_cast<ContainerKind>(rng.integer(0, 3));
    m.payload = s;
  } else {
    m.sender = Endpoint::vehicle(rng.integer(0, 7));
    m.payload = AckPayload{static_cast<std::uint64_t>(rng.integer(0, 100000))};
  }
  return m;
}

}  // namespace

TEST_CASE("frames round-trip") {
  test::Rng rng(1);
  for (int i = 0; i < 300; ++i) {
    const auto msg = random_message(rng, static_cast<std::uint64_t>(i));
    REQUIRE(msg.well_formed());
    const auto bytes = encode(msg);
    CHECK(bytes[0] == kFrameVersion);
    CHECK(decode(bytes) == msg);
    CHECK(encode(decode(bytes)) == bytes);
  }
}

TEST_CASE("truncated and padded frames are rejected") {
  test::Rng rng(2);
  const auto bytes = encode(random_message(rng, 7));
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
    CHECK_THROWS_AS(decode(cut), MalformedFrame);
  }
  auto longer = bytes;
  longer.push_back(0);
  CHECK_THROWS_AS(decode(longer), MalformedFrame);
  auto wrong_version = bytes;
  wrong_version[0] = 9;
  CHECK_THROWS_AS(decode(wrong_version), MalformedFrame);
}

TEST_CASE("fuzzed frames never crash decode") {
  test::Rng rng(3);
  std::vector<std::vector<std::uint8_t>> seeds;
  for (int i = 0; i < 20; ++i) seeds.push_back(encode(random_message(rng, static_cast<std::uint64_t>(i))));
  int accepted = 0, rejected = 0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<std::uint8_t> f;
    switch (i % 4) {
      case 0: {  // noise
        f.resize(rng.index(300));
        for (auto& b : f) b = static_cast<std::uint8_t>(rng.integer(0, 255));
        break;
      }
      case 1: {  // bit flips
        f = seeds[rng.index(seeds.size())];
        for (int k = rng.integer(1, 8); k > 0; --k) f[rng.index(f.size())] ^= static_cast<std::uint8_t>(1u << rng.integer(0, 7));
        break;
      }
      case 2: {  // random cut with a consistent length prefix
        f = seeds[rng.index(seeds.size())];
        f.resize(std::max<std::size_t>(5, rng.index(f.size())));
        const auto body = static_cast<std::uint32_t>(f.size() - 5);
        for (int k = 0; k < 4; ++k) f[static_cast<std::size_t>(1 + k)] = static_cast<std::uint8_t>(body >> (8 * k));
        break;
      }
      default: {  // hostile counts
        f = seeds[rng.index(seeds.size())];
        const std::size_t at = rng.index(f.size());
        for (std::size_t k = at; k < std::min(f.size(), at + 4); ++k) f[k] = 0xff;
        break;
      }
    }
    try {
      const auto m = decode(f);
      CHECK(m.well_formed());
      ++accepted;
    } catch (const MalformedFrame&) {
      ++rejected;
    }
  }
  CHECK(accepted + rejected == 10000);
  CHECK(rejected > 0);
}

TEST_CASE("channel latency, ordering and at-most-once delivery") {
  Channel ch(ChannelModel{0.05, 0.0, 1});
  CHECK(ch.poll(Endpoint::supervisor(), 10.0).empty());

  Message a;
  a.seq = 2;
  a.sender = Endpoint::vehicle(1);
  a.payload = AckPayload{5};
  Message b = a;
  b.seq = 1;
  CHECK(ch.send(a, 1.0));
  CHECK(ch.send(b, 1.0));
  CHECK(ch.poll(Endpoint::supervisor(), 1.04).empty());
  const auto got = ch.poll(Endpoint::supervisor(), 1.05);
  REQUIRE(got.size() == 2);
  CHECK(got[0].seq == 1);
  CHECK(got[1].seq == 2);
  CHECK(ch.poll(Endpoint::supervisor(), 1.05).empty());
  CHECK(ch.in_flight() == 0);
}

TEST_CASE("interleaved senders arrive in sorted order") {
  test::Rng rng(4);
  Channel ch(ChannelModel{0.05, 0.0, 1});
  std::vector<std::tuple<double, std::uint64_t, std::int32_t>> oracle;
  for (int i = 0; i < 500; ++i) {
    Message m;
    m.seq = static_cast<std::uint64_t>(rng.integer(0, 50));
    m.sender = Endpoint::vehicle(rng.integer(0, 5));
    m.payload = AckPayload{1};
    const double t = rng.integer(0, 100) * 0.1;
    ch.send(m, t);
    oracle.emplace_back(t + 0.05, m.seq, m.sender.id);
  }
  std::sort(oracle.begin(), oracle.end());
  const auto got = ch.poll(Endpoint::supervisor(), 100.0);
  REQUIRE(got.size() == oracle.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].seq == std::get<1>(oracle[i]));
    CHECK(got[i].sender.id == std::get<2>(oracle[i]));
  }
}

TEST_CASE("loss is a deterministic function of seed, sender and seq") {
  ChannelModel model{0.05, 0.9, 77};
  int drops = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const bool d = channel_drops(model, Endpoint::supervisor(), s);
    CHECK(d == channel_drops(model, Endpoint::supervisor(), s));
    drops += d ? 1 : 0;
  }
  // Binomial(1000, 0.9): 4 sigma is about 38.
  CHECK(std::abs(drops - 900) < 38);

  Channel ch(model);
  Message m;
  m.payload = AckPayload{1};
  m.sender = Endpoint::vehicle(2);
  int lost = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    m.seq = s;
    const bool ok = ch.send(m, 0.0);
    CHECK(ok == !channel_drops(model, m.sender, s));
    lost += ok ? 0 : 1;
  }
  CHECK(ch.dropped() == static_cast<std::size_t>(lost));
  CHECK(ch.sent() == 1000);
  CHECK_FALSE(channel_drops(ChannelModel{0.05, 0.0, 77}, Endpoint::supervisor(), 3));
}

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "memory_model.hpp"
#include "teleop/progmem_bench.hpp"
#include "teleop/progressive_memory.hpp"

using namespace teleop::progmem;

namespace {

StoreConfig cap(std::size_t n) {
  StoreConfig c;
  c.active_capacity = n;
  return c;
}

std::vector<EventKind> kinds(const std::vector<MemoryEvent>& ev) {
  std::vector<EventKind> k;
  for (const auto& e : ev) k.push_back(e.kind);
  return k;
}

}  // namespace

TEST(Config, Validate) {
  StoreConfig c;
  c.active_capacity = 0;
  EXPECT_THROW(ProgressiveStore{c}, std::invalid_argument);
  c = {};
  c.pin_duration = 0;
  EXPECT_THROW(ProgressiveStore{c}, std::invalid_argument);
  c = {};
  c.uplink_failure_rate = 1.0;
  EXPECT_THROW(ProgressiveStore{c}, std::invalid_argument);
}

TEST(Store, FreshStatsAreZero) {
  ProgressiveStore s(cap(3));
  auto st = s.stats();
  st.server_capacity = 0;
  EXPECT_EQ(st, TierStats{});
}

TEST(Store, CapacityThreeExample) {
  ProgressiveStore s(cap(3));
  oracle::MemoryModel m(cap(3));
  Tick t = 0;
  std::vector<MemoryEvent> last;
  for (const char* k : {"a", "b", "c"}) {
    ++t;
    EXPECT_EQ(s.put(k, k, t), m.put(k, k, t));
  }
  for (const char* k : {"a", "a", "a", "b"}) {
    ++t;
    EXPECT_EQ(s.get(k, t).events, m.get(k, t).events);
  }
  ++t;
  last = s.put("d", "d", t);
  EXPECT_EQ(last, m.put("d", "d", t));
  EXPECT_EQ(last, (std::vector<MemoryEvent>{{EventKind::Offloaded, "c", t}}));
  EXPECT_EQ(s.inspect("a")->access_count, 4u);
  EXPECT_EQ(s.inspect("b")->access_count, 2u);
  EXPECT_EQ(s.inspect("c")->tier, Tier::Server);
  EXPECT_EQ(s.stats().offloads, 1u);
  EXPECT_EQ(s.stats().active_count, 3u);
}

TEST(Store, PutExistingIncrementsWithoutOffload) {
  ProgressiveStore s(cap(2));
  s.put("a", "1", 1);
  s.put("b", "1", 2);
  EXPECT_TRUE(s.put("a", "2", 3).empty());
  EXPECT_EQ(s.inspect("a")->access_count, 2u);
  EXPECT_EQ(s.inspect("a")->payload, "2");
}

TEST(Store, CapacityOne) {
  ProgressiveStore s(cap(1));
  s.put("a", "x", 1);
  EXPECT_EQ(s.put("b", "y", 2), (std::vector<MemoryEvent>{{EventKind::Offloaded, "a", 2}}));
}

TEST(Store, GetFromServerPinsAndFetches) {
  StoreConfig c = cap(1);
  c.pin_duration = 5;
  ProgressiveStore s(c);
  s.put("a", "A", 1);
  s.put("b", "B", 2);
  auto g = s.get("a", 3);
  EXPECT_EQ(g.payload, "A");
  EXPECT_EQ(g.provenance, Provenance::FetchedFromServer);
  EXPECT_EQ(kinds(g.events), (std::vector<EventKind>{EventKind::Fetched, EventKind::Offloaded, EventKind::Hit}));
  EXPECT_EQ(s.inspect("a")->pin_expiry, Tick{8});
  // Pinned record is the only Active one: the next put cannot make room.
  EXPECT_THROW(s.put("c", "C", 4), OverPinned);
  s.tick(7);
  EXPECT_TRUE(s.inspect("a")->pin_expiry.has_value());
  s.tick(8);
  EXPECT_FALSE(s.inspect("a")->pin_expiry.has_value());
  EXPECT_NO_THROW(s.put("c", "C", 9));
  EXPECT_EQ(s.inspect("a")->tier, Tier::Server);
}

TEST(Store, ActiveHitAndMiss) {
  ProgressiveStore s(cap(2));
  s.put("a", "A", 1);
  auto g = s.get("a", 2);
  EXPECT_EQ(g.provenance, Provenance::Active);
  EXPECT_EQ(s.inspect("a")->access_count, 2u);
  auto miss = s.get("zz", 3);
  EXPECT_FALSE(miss.hit());
  EXPECT_EQ(kinds(miss.events), std::vector<EventKind>{EventKind::Miss});
  EXPECT_EQ(s.stats().hits + s.stats().misses, 2u);
}

TEST(Store, LatencyThreeOffload) {
  StoreConfig c = cap(1);
  c.uplink_latency = 3;
  ProgressiveStore s(c);
  s.tick(0);
  s.put("a", "A", 0);
  EXPECT_TRUE(s.put("b", "B", 0).empty());
  EXPECT_TRUE(s.inspect("a")->in_transit);
  EXPECT_EQ(s.get("a", 0).payload, "A");  // still readable in flight
  EXPECT_TRUE(s.tick(1).empty());
  EXPECT_TRUE(s.tick(2).empty());
  EXPECT_EQ(s.tick(3), (std::vector<MemoryEvent>{{EventKind::Offloaded, "a", 3}}));
  EXPECT_TRUE(s.tick(4).empty());
}

TEST(Store, TickMustIncrease) {
  ProgressiveStore s;
  s.tick(5);
  EXPECT_THROW(s.tick(5), std::invalid_argument);
  EXPECT_THROW(s.tick(4), std::invalid_argument);
}

TEST(Store, ServerGrowsThenDeletesColdest) {
  StoreConfig c = cap(1);
  c.server_capacity = 1;
  c.growth_step = 1;
  c.server_hard_limit = 2;
  ProgressiveStore s(c);
  s.put("a", "", 1);
  s.put("a", "", 2);  // a is warmer than b
  s.put("b", "", 3);  // a offloaded, server holds 1
  EXPECT_EQ(s.stats().server_capacity, 1u);
  auto ev = s.put("c", "", 4);  // b offloaded, server grows to its hard limit
  EXPECT_EQ(s.stats().server_capacity, 2u);
  EXPECT_EQ(kinds(ev), std::vector<EventKind>{EventKind::Offloaded});
  ev = s.put("d", "", 5);  // c offloaded, no growth left: coldest server record goes
  EXPECT_EQ(kinds(ev), (std::vector<EventKind>{EventKind::Offloaded, EventKind::ServerDeleted}));
  EXPECT_EQ(ev.back().key, "b");
  EXPECT_EQ(ev.back().tick, 5);
  EXPECT_FALSE(s.inspect("b").has_value());
  EXPECT_EQ(s.stats().server_deletions, 1u);
}

TEST(Store, UplinkFailureKeepsRecordOnServer) {
  StoreConfig c = cap(1);
  c.uplink_failure_rate = 0.999;
  ProgressiveStore s(c);
  s.put("a", "A", 1);
  s.put("b", "B", 2);
  EXPECT_THROW(s.get("a", 3), UplinkUnavailable);
  EXPECT_EQ(s.inspect("a")->tier, Tier::Server);
  EXPECT_EQ(s.stats().uplink_failures, 1u);
}

TEST(Replay, MatchesModelAcrossSeedsAndConfigs) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    StoreConfig c;
    c.active_capacity = 1 + seed % 7;
    c.server_capacity = 4;
    c.growth_step = seed % 3;
    c.server_hard_limit = 12;
    c.pin_duration = 1 + static_cast<Tick>(seed % 4);
    c.uplink_latency = static_cast<Tick>(seed % 3);
    c.uplink_failure_rate = seed % 2 ? 0.1 : 0.0;
    c.seed = seed * 31;
    auto rep = oracle::replay_against_model(c, seed, 10000, 40);
    EXPECT_EQ(rep.divergence, "") << "seed " << seed;
    EXPECT_EQ(rep.ops, 10000u);
    EXPECT_TRUE(rep.capacity_ok);
    EXPECT_GT(rep.events, 1000u);
  }
}

TEST(Replay, FifoPolicyMatchesModel) {
  StoreConfig c;
  c.active_capacity = 5;
  c.server_capacity = 8;
  c.policy = Policy::Fifo;
  auto rep = oracle::replay_against_model(c, 77, 10000, 30);
  EXPECT_EQ(rep.divergence, "");
}

TEST(Property, NoLossBeforeDeletionAndCountersMonotone) {
  StoreConfig c;
  c.active_capacity = 4;
  c.server_capacity = 4;
  c.growth_step = 2;
  c.server_hard_limit = 8;
  c.uplink_latency = 2;
  ProgressiveStore s(c);
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> key(0, 29), roll(0, 9);
  std::set<std::string> live;
  TierStats prev = s.stats();
  Tick now = 0;
  for (int i = 0; i < 5000; ++i) {
    const std::string k = "k" + std::to_string(key(rng));
    std::vector<MemoryEvent> ev;
    try {
      if (roll(rng) < 3) {
        ev = s.tick(++now);
      } else if (roll(rng) < 5) {
        ev = s.put(k, k, now);
        live.insert(k);
      } else {
        ev = s.get(k, now).events;
      }
    } catch (const OverPinned&) {
    }
    for (const auto& e : ev) {
      if (e.kind == EventKind::ServerDeleted) live.erase(e.key);
      ASSERT_LE(e.tick, now);
    }
    for (const auto& l : live) ASSERT_TRUE(s.inspect(l).has_value()) << l;
    const auto st = s.stats();
    ASSERT_LE(st.active_count, c.active_capacity);
    ASSERT_GE(st.offloads, prev.offloads);
    ASSERT_GE(st.fetches, prev.fetches);
    ASSERT_GE(st.server_deletions, prev.server_deletions);
    ASSERT_GE(st.hits, prev.hits);
    ASSERT_GE(st.misses, prev.misses);
    prev = st;
  }
  EXPECT_GT(prev.server_deletions, 0u);
}

TEST(Property, PinnedRecordsAreNeverOffloaded) {
  StoreConfig c = cap(3);
  c.pin_duration = 6;
  ProgressiveStore s(c);
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> key(0, 9), roll(0, 3);
  Tick now = 0;
  for (int i = 0; i < 5000; ++i) {
    const std::string k = "k" + std::to_string(key(rng));
    std::map<std::string, std::optional<Tick>> pins;
    for (int j = 0; j < 10; ++j)
      if (auto r = s.inspect("k" + std::to_string(j))) pins["k" + std::to_string(j)] = r->pin_expiry;
    std::vector<MemoryEvent> ev;
    try {
      if (roll(rng) == 0) ev = s.tick(++now);
      else if (roll(rng) < 2) ev = s.put(k, k, now);
      else ev = s.get(k, now).events;
    } catch (const OverPinned&) {
    }
    for (const auto& e : ev) {
      if (e.kind != EventKind::Offloaded) continue;
      const auto& p = pins[e.key];
      ASSERT_FALSE(p && *p > now) << e.key << " offloaded while pinned";
    }
  }
}

TEST(Bench, TraceRoundTrip) {
  auto t = zipf_trace(10, 50, 1.0, 3);
  EXPECT_EQ(format_trace(parse_trace(format_trace(t))), format_trace(t));
  EXPECT_THROW(parse_trace("fetch a\n"), std::invalid_argument);
  EXPECT_THROW(parse_trace("get\n"), std::invalid_argument);
  EXPECT_EQ(parse_trace("# c\n\nput a\n").size(), 1u);
}

TEST(Bench, ZipfBeatsFifo) {
  const auto trace = zipf_trace(1000, 50000, 1.0, 2024);
  StoreConfig c = cap(100);
  const auto prog = replay(trace, c);
  c.policy = Policy::Fifo;
  const auto fifo = replay(trace, c);
  EXPECT_EQ(prog.gets, 50000u);
  EXPECT_GT(prog.active_hit_rate(), fifo.active_hit_rate());
  EXPECT_EQ(prog.stats.hits + prog.stats.misses, prog.gets);
}

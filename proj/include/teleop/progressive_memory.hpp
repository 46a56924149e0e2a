#pragma once

// Progressive memory: a fixed-size active store ordered by access count, with
// cold records offloaded over a modeled uplink to an expandable server. A
// record fetched back from the server is pinned in the active store for a
// while before it competes for eviction again.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

namespace teleop::progmem {

using Tick = std::int64_t;

enum class Tier { Active, Server };
enum class Policy { Progressive, Fifo };
enum class Provenance { Active, FetchedFromServer, InTransit };
enum class EventKind { Offloaded, Fetched, ServerDeleted, Hit, Miss };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Offloaded: return "Offloaded";
    case EventKind::Fetched: return "Fetched";
    case EventKind::ServerDeleted: return "ServerDeleted";
    case EventKind::Hit: return "Hit";
    case EventKind::Miss: return "Miss";
  }
  return "?";
}

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Active: return "Active";
    case Provenance::FetchedFromServer: return "FetchedFromServer";
    case Provenance::InTransit: return "InTransit";
  }
  return "?";
}

struct MemoryEvent {
  EventKind kind;
  std::string key;
  Tick tick;
  friend bool operator==(const MemoryEvent&, const MemoryEvent&) = default;
};

struct StoreConfig {
  std::size_t active_capacity = 64;
  std::size_t server_capacity = 256;
  std::size_t growth_step = 256;
  std::size_t server_hard_limit = 4096;
  Tick pin_duration = 20;
  Tick uplink_latency = 0;
  double uplink_failure_rate = 0.0;
  std::uint64_t seed = 1;
  Policy policy = Policy::Progressive;

  void validate() const {
    if (active_capacity < 1) throw std::invalid_argument("active_capacity must be >= 1");
    if (pin_duration < 1) throw std::invalid_argument("pin_duration must be >= 1");
    if (uplink_latency < 0) throw std::invalid_argument("uplink_latency must be >= 0");
    if (!(uplink_failure_rate >= 0.0 && uplink_failure_rate < 1.0))
      throw std::invalid_argument("uplink_failure_rate must lie in [0, 1)");
    if (server_hard_limit < server_capacity)
      throw std::invalid_argument("server_hard_limit must be >= server_capacity");
  }
};

struct TierStats {
  std::size_t active_count = 0;
  std::size_t server_count = 0;
  std::size_t in_transit = 0;
  std::size_t server_capacity = 0;
  std::uint64_t offloads = 0;
  std::uint64_t fetches = 0;
  std::uint64_t server_deletions = 0;
  std::uint64_t hits = 0;
  std::uint64_t active_hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t uplink_failures = 0;
  friend bool operator==(const TierStats&, const TierStats&) = default;
};

struct MemoryRecord {
  std::string key;
  std::string payload;
  std::uint64_t access_count;
  Tick last_access_tick;
  Tier tier;
  bool in_transit;
  std::optional<Tick> pin_expiry;
};

struct GetResult {
  std::optional<std::string> payload;
  std::optional<Provenance> provenance;
  std::vector<MemoryEvent> events;
  bool hit() const { return payload.has_value(); }
};

class OverPinned : public std::runtime_error {
public:
  OverPinned() : std::runtime_error("OverPinned: every active record is pinned") {}
};

class UplinkUnavailable : public std::runtime_error {
public:
  explicit UplinkUnavailable(const std::string& key)
      : std::runtime_error("UplinkUnavailable: fetch of '" + key + "' failed") {}
};

class ProgressiveStore {
public:
  explicit ProgressiveStore(StoreConfig config = {})
      : config_(config), server_capacity_(config.server_capacity), rng_(config.seed) {
    config_.validate();
  }

  const StoreConfig& config() const { return config_; }

  std::vector<MemoryEvent> put(const std::string& key, std::string payload, Tick now) {
    if (key.empty()) throw std::invalid_argument("memory key must be nonempty");
    advance_clock(now);
    std::vector<MemoryEvent> events;
    auto it = records_.find(key);
    if (it == records_.end()) {
      require_room(key, now);
      Record r;
      r.payload = std::move(payload);
      r.count = 1;
      r.last_tick = now;
      r.last_seq = ++seq_;
      r.loc = Loc::Active;
      auto& inserted = records_.emplace(key, std::move(r)).first->second;
      index_active(key, inserted);
      evict_if_over(key, now, events);
      return events;
    }

    Record& r = it->second;
    switch (r.loc) {
      case Loc::Active:
        reheat(key, r, now);
        r.payload = std::move(payload);
        break;
      case Loc::FetchTransit:
        touch(r, now);
        r.payload = std::move(payload);
        break;
      case Loc::OffloadTransit:
      case Loc::Server:
        // Fresh payload needs no uplink round trip; the record rejoins the active store.
        require_room(key, now);
        if (r.loc == Loc::Server) unindex_server(key, r);
        r.transit_id = 0;  // invalidates any pending offload job
        touch(r, now);
        r.payload = std::move(payload);
        r.loc = Loc::Active;
        index_active(key, r);
        evict_if_over(key, now, events);
        break;
    }
    return events;
  }

  GetResult get(const std::string& key, Tick now) {
    advance_clock(now);
    GetResult out;
    auto it = records_.find(key);
    if (it == records_.end()) {
      ++stats_.misses;
      out.events.push_back({EventKind::Miss, key, now});
      return out;
    }
    Record& r = it->second;
    switch (r.loc) {
      case Loc::Active:
        reheat(key, r, now);
        ++stats_.active_hits;
        out.provenance = Provenance::Active;
        break;
      case Loc::OffloadTransit:
      case Loc::FetchTransit:
        touch(r, now);
        out.provenance = Provenance::InTransit;
        break;
      case Loc::Server: {
        const double draw = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
        if (draw < config_.uplink_failure_rate) {
          ++stats_.uplink_failures;
          throw UplinkUnavailable(key);
        }
        if (config_.uplink_latency == 0) {
          require_room(key, now);
          unindex_server(key, r);
          touch(r, now);
          arrive_active(key, r, now, out.events);
        } else {
          unindex_server(key, r);
          touch(r, now);
          r.loc = Loc::FetchTransit;
          schedule(key, r, now);
        }
        out.provenance = Provenance::FetchedFromServer;
        break;
      }
    }
    ++stats_.hits;
    out.payload = r.payload;
    out.events.push_back({EventKind::Hit, key, now});
    return out;
  }

  /// Completes transfers whose latency has elapsed and clears expired pins.
  std::vector<MemoryEvent> tick(Tick now) {
    if (last_tick_ && now <= *last_tick_)
      throw std::invalid_argument("memory tick must strictly increase");
    advance_clock(now);
    last_tick_ = now;
    std::vector<MemoryEvent> events;

    while (!pins_.empty() && pins_.begin()->first <= now) {
      auto node = pins_.extract(pins_.begin());
      auto it = records_.find(node.value().second);
      if (it != records_.end() && it->second.pin_expiry == node.value().first)
        it->second.pin_expiry.reset();
    }

    std::deque<Job> deferred;
    while (!jobs_.empty() && jobs_.front().due <= now) {
      Job job = jobs_.front();
      jobs_.pop_front();
      auto it = records_.find(job.key);
      if (it == records_.end() || it->second.transit_id != job.id) continue;
      Record& r = it->second;
      if (r.loc == Loc::OffloadTransit) {
        land_on_server(job.key, r, now, events);
      } else if (r.loc == Loc::FetchTransit) {
        if (!has_room(job.key, now)) {
          deferred.push_back(job);
          continue;
        }
        arrive_active(job.key, r, now, events);
      }
    }
    for (auto d = deferred.rbegin(); d != deferred.rend(); ++d) jobs_.push_front(*d);
    return events;
  }

  TierStats stats() const {
    TierStats s = stats_;
    s.active_count = active_count_;
    s.server_count = server_count_;
    s.in_transit = records_.size() - active_count_ - server_count_;
    s.server_capacity = server_capacity_;
    return s;
  }

  std::optional<MemoryRecord> inspect(const std::string& key) const {
    auto it = records_.find(key);
    if (it == records_.end()) return std::nullopt;
    const Record& r = it->second;
    const bool active_side = r.loc == Loc::Active || r.loc == Loc::FetchTransit;
    return MemoryRecord{key,
                        r.payload,
                        r.count,
                        r.last_tick,
                        active_side ? Tier::Active : Tier::Server,
                        r.loc == Loc::OffloadTransit || r.loc == Loc::FetchTransit,
                        r.pin_expiry};
  }

  std::size_t size() const { return records_.size(); }

private:
  enum class Loc { Active, OffloadTransit, Server, FetchTransit };

  struct Record {
    std::string payload;
    std::uint64_t count = 0;
    Tick last_tick = 0;
    std::uint64_t last_seq = 0;
    std::uint64_t active_seq = 0;
    Loc loc = Loc::Active;
    std::optional<Tick> pin_expiry;
    std::uint64_t transit_id = 0;
  };

  struct Job {
    Tick due;
    std::uint64_t id;
    std::string key;
  };

  // (access_count, last_access_tick, access sequence) orders coldest first.
  using HeatKey = std::tuple<std::uint64_t, Tick, std::uint64_t, std::string>;
  using FifoKey = std::pair<std::uint64_t, std::string>;

  static HeatKey heat(const std::string& key, const Record& r) {
    return {r.count, r.last_tick, r.last_seq, key};
  }

  void advance_clock(Tick now) {
    if (clock_ && now < *clock_) throw std::invalid_argument("memory operations must not go back in time");
    clock_ = now;
  }

  void touch(Record& r, Tick now) {
    ++r.count;
    r.last_tick = now;
    r.last_seq = ++seq_;
  }

  void index_active(const std::string& key, Record& r) {
    r.active_seq = ++seq_;
    heat_index_.insert(heat(key, r));
    fifo_index_.insert({r.active_seq, key});
    ++active_count_;
  }

  void reheat(const std::string& key, Record& r, Tick now) {
    heat_index_.erase(heat(key, r));
    touch(r, now);
    heat_index_.insert(heat(key, r));
  }

  void unindex_active(const std::string& key, const Record& r) {
    heat_index_.erase(heat(key, r));
    fifo_index_.erase({r.active_seq, key});
    --active_count_;
  }

  void unindex_server(const std::string& key, const Record& r) {
    server_index_.erase(heat(key, r));
    --server_count_;
  }

  bool evictable(const std::string& key, const Record& r, const std::string& incoming, Tick now) const {
    return key != incoming && !(r.pin_expiry && *r.pin_expiry > now);
  }

  std::optional<std::string> pick_victim(const std::string& incoming, Tick now) const {
    if (config_.policy == Policy::Fifo) {
      for (const auto& [seq, key] : fifo_index_)
        if (evictable(key, records_.at(key), incoming, now)) return key;
    } else {
      for (const auto& h : heat_index_) {
        const auto& key = std::get<3>(h);
        if (evictable(key, records_.at(key), incoming, now)) return key;
      }
    }
    return std::nullopt;
  }

  bool has_room(const std::string& incoming, Tick now) const {
    return active_count_ < config_.active_capacity || pick_victim(incoming, now).has_value();
  }

  void require_room(const std::string& incoming, Tick now) const {
    if (!has_room(incoming, now)) throw OverPinned();
  }

  void schedule(const std::string& key, Record& r, Tick now) {
    r.transit_id = ++job_seq_;
    jobs_.push_back({now + config_.uplink_latency, r.transit_id, key});
  }

  void arrive_active(const std::string& key, Record& r, Tick now, std::vector<MemoryEvent>& events) {
    r.loc = Loc::Active;
    r.pin_expiry = now + config_.pin_duration;
    pins_.insert({*r.pin_expiry, key});
    index_active(key, r);
    ++stats_.fetches;
    events.push_back({EventKind::Fetched, key, now});
    evict_if_over(key, now, events);
  }

  void evict_if_over(const std::string& incoming, Tick now, std::vector<MemoryEvent>& events) {
    while (active_count_ > config_.active_capacity) {
      auto victim = pick_victim(incoming, now);
      if (!victim) throw std::logic_error("eviction without a candidate");
      Record& v = records_.at(*victim);
      unindex_active(*victim, v);
      v.pin_expiry.reset();
      if (config_.uplink_latency == 0) {
        land_on_server(*victim, v, now, events);
      } else {
        v.loc = Loc::OffloadTransit;
        schedule(*victim, v, now);
      }
    }
  }

  void land_on_server(const std::string& key, Record& r, Tick now, std::vector<MemoryEvent>& events) {
    r.loc = Loc::Server;
    server_index_.insert(heat(key, r));
    ++server_count_;
    ++stats_.offloads;
    events.push_back({EventKind::Offloaded, key, now});
    while (server_count_ > server_capacity_) {
      if (server_capacity_ < config_.server_hard_limit && config_.growth_step > 0) {
        server_capacity_ = std::min(config_.server_hard_limit, server_capacity_ + config_.growth_step);
        continue;
      }
      auto coldest = server_index_.begin();
      std::string doomed = std::get<3>(*coldest);
      server_index_.erase(coldest);
      --server_count_;
      records_.erase(doomed);
      ++stats_.server_deletions;
      events.push_back({EventKind::ServerDeleted, doomed, now});
    }
  }

  StoreConfig config_;
  std::size_t server_capacity_;
  std::mt19937_64 rng_;
  std::unordered_map<std::string, Record> records_;
  std::set<HeatKey> heat_index_;
  std::set<FifoKey> fifo_index_;
  std::set<HeatKey> server_index_;
  std::set<std::pair<Tick, std::string>> pins_;
  std::deque<Job> jobs_;
  std::size_t active_count_ = 0;
  std::size_t server_count_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t job_seq_ = 0;
  std::optional<Tick> clock_;
  std::optional<Tick> last_tick_;
  TierStats stats_;
};

}  // namespace teleop::progmem

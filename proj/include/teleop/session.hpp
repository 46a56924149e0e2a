#pragma once

// One simulation session: the tick engine shared by headless runs and the
// network service. Inbound audio and pulse trains are decoded here and
// queued; step() drains the queue into one controller tick, advances the
// world and produces that tick's telemetry record.

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "teleop/controller.hpp"
#include "teleop/dtmf.hpp"
#include "teleop/scenario.hpp"
#include "teleop/sirc.hpp"
#include "teleop/world.hpp"

namespace teleop::session {

using nlohmann::json;

inline json pose_json(const world::Pose& p) { return {{"x", p.x}, {"y", p.y}, {"heading", p.heading}}; }

inline json sensors_json(const world::SensorReadings& r) {
  return {{"proximity", {r.proximity[0], r.proximity[1], r.proximity[2]}},
          {"ping", r.ping},
          {"pit_ahead", r.pit_ahead},
          {"left_is_obstacle", r.left_is_obstacle},
          {"left_is_white", r.left_is_white},
          {"optical_flow", {r.optical_flow.dx, r.optical_flow.dy}}};
}

inline json stats_json(const progmem::TierStats& s) {
  return {{"active_count", s.active_count},     {"server_count", s.server_count},
          {"in_transit", s.in_transit},         {"server_capacity", s.server_capacity},
          {"offloads", s.offloads},             {"fetches", s.fetches},
          {"server_deletions", s.server_deletions}, {"hits", s.hits},
          {"active_hits", s.active_hits},       {"misses", s.misses},
          {"uplink_failures", s.uplink_failures}};
}

inline json digit_event_json(const dtmf::DigitEvent& e) {
  return {{"symbol", std::string(1, e.symbol.symbol())},
          {"start_frame", e.start_tick},
          {"duration_frames", e.duration},
          {"confidence", e.confidence}};
}

class Engine {
public:
  explicit Engine(scenario::Scenario sc, dtmf::DetectorConfig detector = {})
      : scenario_(std::move(sc)), world_(scenario_.make_world()),
        controller_(scenario_.controller, scenario_.geometry, scenario_.start),
        detector_(detector), readings_(world_.sense()) {}

  /// PCM16 little-endian mono at 8 kHz. Each stream (one per connection;
  /// headless runs use stream 0) has its own decoder. Completed digits are
  /// queued for the next tick in decode order.
  std::vector<dtmf::DigitEvent> ingest_audio(std::span<const std::uint8_t> pcm_le,
                                             std::uint32_t sample_rate = 8000, std::uint64_t stream = 0) {
    if (pcm_le.size() % 2 != 0) throw std::invalid_argument("audio chunk has an odd byte count");
    if (sample_rate != static_cast<std::uint32_t>(dtmf::kDefaultSampleRate))
      throw std::invalid_argument("audio sample rate must be 8000 Hz");
    const auto pcm = dtmf::pcm16_from_le_bytes(pcm_le);
    auto events = decoder(stream).feed_pcm16(pcm);
    for (const auto& e : events) pending_.digits.push_back(e.symbol);
    return events;
  }

  /// Ends a stream; a tone still sounding at the end counts if long enough.
  std::vector<dtmf::DigitEvent> close_stream(std::uint64_t stream) {
    auto it = decoders_.find(stream);
    if (it == decoders_.end()) return {};
    auto events = it->second.flush();
    for (const auto& e : events) pending_.digits.push_back(e.symbol);
    decoders_.erase(it);
    return events;
  }

  /// Text pulse train; throws sirc::DecodeError or std::invalid_argument.
  sirc::SircFrame ingest_sirc(std::string_view text) {
    auto frame = sirc::decode_pulses(sirc::parse_text(text));
    pending_.frames.push_back(frame);
    return frame;
  }

  void enqueue_digit(dtmf::KeypadSymbol s) { pending_.digits.push_back(s); }

  json step() {
    const auto now = static_cast<progmem::Tick>(tick_);
    const auto sensed = readings_;
    const auto truth = world_.pose();
    control::Inbound inbound = std::move(pending_);
    pending_ = {};

    auto out = controller_.control_tick(sensed, inbound, now);
    readings_ = world_.step(out.actuation, scenario_.geometry.tick_s);

    json rec;
    rec["tick"] = tick_;
    rec["pose"] = pose_json(truth);
    rec["estimate"] = pose_json(controller_.pose_estimate());
    rec["fallen"] = world_.fallen();
    rec["safety"] = control::to_string(controller_.safety().mode);
    rec["reverse_ticks"] = controller_.safety().reverse_ticks_remaining;
    rec["mode"] = control::to_string(controller_.mode());
    rec["command"] = {{"kind", control::to_string(out.command.kind)},
                      {"source", control::to_string(out.command.source)}};
    rec["follower"] = out.follower ? json(control::to_string(out.follower->kind)) : json(nullptr);
    std::string digits;
    for (const auto& d : inbound.digits) digits.push_back(d.symbol());
    rec["digits"] = digits;
    json ops = json::array();
    for (const auto& c : out.operator_commands) ops.push_back(control::to_string(c.kind));
    rec["operator"] = ops;
    rec["setpoints"] = {{"left_rpm", out.setpoints.left_rpm}, {"right_rpm", out.setpoints.right_rpm}};
    rec["actuation"] = {{"left_rpm", out.actuation.left_rpm},
                        {"right_rpm", out.actuation.right_rpm},
                        {"arm_rate", out.actuation.arm_rate},
                        {"grabber_action", world::to_string(out.actuation.grabber_action)}};
    rec["sensors"] = sensors_json(sensed);
    rec["arm_angle"] = world_.body().arm_angle;
    rec["grabber"] = world::to_string(world_.grabber_at());
    rec["held_object"] = world_.body().held_object;
    rec["memory"] = stats_json(controller_.memory().stats());
    json mev = json::array();
    for (const auto& e : out.memory_events)
      mev.push_back({{"kind", progmem::to_string(e.kind)}, {"key", e.key}, {"tick", e.tick}});
    rec["memory_events"] = mev;

    ++tick_;
    return rec;
  }

  bool fallen() const { return world_.fallen(); }
  std::uint64_t tick() const { return tick_; }
  std::size_t samples_per_tick() const {
    return static_cast<std::size_t>(std::llround(dtmf::kDefaultSampleRate * scenario_.geometry.tick_s));
  }
  const world::World& world() const { return world_; }
  const control::RobotController& controller() const { return controller_; }
  const scenario::Scenario& scenario() const { return scenario_; }
  const world::SensorReadings& readings() const { return readings_; }

private:
  dtmf::StreamDecoder& decoder(std::uint64_t stream) {
    auto it = decoders_.find(stream);
    if (it == decoders_.end())
      it = decoders_.emplace(stream, dtmf::StreamDecoder(detector_, dtmf::kDefaultSampleRate)).first;
    return it->second;
  }

  scenario::Scenario scenario_;
  world::World world_;
  control::RobotController controller_;
  dtmf::DetectorConfig detector_;
  std::map<std::uint64_t, dtmf::StreamDecoder> decoders_;
  world::SensorReadings readings_;
  control::Inbound pending_;
  std::uint64_t tick_ = 0;
};

}  // namespace teleop::session

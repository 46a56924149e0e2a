#pragma once

// Perception -> processing -> action loop. Owns safety state, operator
// command latches, the line follower, both wheel-speed loops, the
// dead-reckoning estimate and the progressive memory store.

#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "teleop/dtmf.hpp"
#include "teleop/pid.hpp"
#include "teleop/progressive_memory.hpp"
#include "teleop/sirc.hpp"
#include "teleop/world.hpp"

namespace teleop::control {

using world::Pose;

enum class CommandKind {
  Forward, Backward, TurnLeft, TurnRight, Stop,
  ArmUp, ArmDown, GrabOpen, GrabClose, ModeAuto, ModeTeleop
};
enum class Source { Teleop, Follower, Safety };
enum class SafetyMode { Nominal, HaltedAwaitingInstruction, Reversing };
enum class Mode { Auto, Teleop };

inline constexpr std::array<CommandKind, 11> kAllCommandKinds{
    CommandKind::Forward, CommandKind::Backward, CommandKind::TurnLeft, CommandKind::TurnRight,
    CommandKind::Stop,    CommandKind::ArmUp,    CommandKind::ArmDown,  CommandKind::GrabOpen,
    CommandKind::GrabClose, CommandKind::ModeAuto, CommandKind::ModeTeleop};

inline const char* to_string(CommandKind k) {
  switch (k) {
    case CommandKind::Forward: return "Forward";
    case CommandKind::Backward: return "Backward";
    case CommandKind::TurnLeft: return "TurnLeft";
    case CommandKind::TurnRight: return "TurnRight";
    case CommandKind::Stop: return "Stop";
    case CommandKind::ArmUp: return "ArmUp";
    case CommandKind::ArmDown: return "ArmDown";
    case CommandKind::GrabOpen: return "GrabOpen";
    case CommandKind::GrabClose: return "GrabClose";
    case CommandKind::ModeAuto: return "ModeAuto";
    case CommandKind::ModeTeleop: return "ModeTeleop";
  }
  return "?";
}

inline const char* to_string(Source s) {
  switch (s) {
    case Source::Teleop: return "Teleop";
    case Source::Follower: return "Follower";
    case Source::Safety: return "Safety";
  }
  return "?";
}

inline const char* to_string(SafetyMode m) {
  switch (m) {
    case SafetyMode::Nominal: return "Nominal";
    case SafetyMode::HaltedAwaitingInstruction: return "HaltedAwaitingInstruction";
    case SafetyMode::Reversing: return "Reversing";
  }
  return "?";
}

inline const char* to_string(Mode m) { return m == Mode::Auto ? "Auto" : "Teleop"; }

inline bool is_drive(CommandKind k) {
  return k == CommandKind::Forward || k == CommandKind::Backward || k == CommandKind::TurnLeft ||
         k == CommandKind::TurnRight || k == CommandKind::Stop;
}

struct DriveCommand {
  CommandKind kind;
  Source source;
  friend bool operator==(const DriveCommand&, const DriveCommand&) = default;
};

struct SafetyState {
  SafetyMode mode = SafetyMode::Nominal;
  int reverse_ticks_remaining = 0;
  friend bool operator==(const SafetyState&, const SafetyState&) = default;

  static SafetyState nominal() { return {}; }
  static SafetyState halted() { return {SafetyMode::HaltedAwaitingInstruction, 0}; }
  static SafetyState reversing(int ticks) { return {SafetyMode::Reversing, ticks}; }
};

// Keypad: 2 fwd, 8 back, 4 left, 6 right, 5 stop, * open, # close,
// A auto, B teleop, 1 arm up, 7 arm down.
inline std::optional<DriveCommand> map_digit_to_command(dtmf::KeypadSymbol symbol) {
  auto cmd = [](CommandKind k) { return DriveCommand{k, Source::Teleop}; };
  switch (symbol.symbol()) {
    case '2': return cmd(CommandKind::Forward);
    case '8': return cmd(CommandKind::Backward);
    case '4': return cmd(CommandKind::TurnLeft);
    case '6': return cmd(CommandKind::TurnRight);
    case '5': return cmd(CommandKind::Stop);
    case '*': return cmd(CommandKind::GrabOpen);
    case '#': return cmd(CommandKind::GrabClose);
    case 'A': return cmd(CommandKind::ModeAuto);
    case 'B': return cmd(CommandKind::ModeTeleop);
    case '1': return cmd(CommandKind::ArmUp);
    case '7': return cmd(CommandKind::ArmDown);
    default: return std::nullopt;
  }
}

inline constexpr unsigned kGrabberAddress = 0x01;

inline std::optional<DriveCommand> map_sirc_to_command(const sirc::SircFrame& frame) {
  if (frame.address() != kGrabberAddress) return std::nullopt;
  switch (frame.command()) {
    case 0x00: return DriveCommand{CommandKind::GrabOpen, Source::Teleop};
    case 0x01: return DriveCommand{CommandKind::GrabClose, Source::Teleop};
    case 0x02: return DriveCommand{CommandKind::ArmUp, Source::Teleop};
    case 0x03: return DriveCommand{CommandKind::ArmDown, Source::Teleop};
    default: return std::nullopt;
  }
}

/// Tick-driven transcription of the track program:
///   repeat { if (not leftIsObstacle and leftIsWhite) { right; backward(1) } else { forward(1) } }
/// The backward step after a right turn is held in a one-slot continuation.
class TrackFollower {
public:
  DriveCommand follow_track(const world::SensorReadings& r) {
    if (pending_backward_) {
      pending_backward_ = false;
      return {CommandKind::Backward, Source::Follower};
    }
    if (!r.left_is_obstacle && r.left_is_white) {
      pending_backward_ = true;
      return {CommandKind::TurnRight, Source::Follower};
    }
    return {CommandKind::Forward, Source::Follower};
  }
  bool pending_backward() const { return pending_backward_; }
  void reset() { pending_backward_ = false; }

private:
  bool pending_backward_ = false;
};

struct Arbitration {
  DriveCommand command;
  SafetyState safety;
};

/// Safety > Teleop > Follower. A fresh operator command releases a halt;
/// a reversal runs its full count regardless of operator input.
inline Arbitration arbitrate(SafetyState safety, std::optional<DriveCommand> teleop, bool teleop_fresh,
                             std::optional<DriveCommand> follower, Mode mode) {
  if (safety.mode == SafetyMode::Reversing) {
    const int left = safety.reverse_ticks_remaining - 1;
    return {{CommandKind::Backward, Source::Safety},
            left > 0 ? SafetyState::reversing(left) : SafetyState::nominal()};
  }
  if (safety.mode == SafetyMode::HaltedAwaitingInstruction) {
    if (!teleop_fresh) return {{CommandKind::Stop, Source::Safety}, safety};
    safety = SafetyState::nominal();
  }
  if (teleop) return {*teleop, safety};
  if (mode == Mode::Auto && follower) return {*follower, safety};
  return {{CommandKind::Stop, mode == Mode::Auto ? Source::Follower : Source::Teleop}, safety};
}

/// Rotates the body-frame displacement by the current heading, adds it, then
/// applies the heading change.
inline Pose integrate_odometry(const Pose& pose, world::FlowCounts flow, double heading_delta, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("odometry scale must be positive");
  const double bx = static_cast<double>(flow.dx) * scale;
  const double by = static_cast<double>(flow.dy) * scale;
  const double c = std::cos(pose.heading), s = std::sin(pose.heading);
  return Pose{pose.x + c * bx - s * by, pose.y + s * bx + c * by,
              world::normalize_angle(pose.heading + heading_delta)};
}

struct ControllerConfig {
  double stop_distance = 0.2;   // m
  int reverse_ticks = 10;
  double turn_curvature = 2.0;  // 1/m
  double k_ref = 1.0;           // 1/m
  // Trim loop around the wheel-speed feedforward, in rpm.
  pid::PidGains drive_gains{0.25, 0.1, 0.0, -160.0, 160.0, 80.0};
  progmem::StoreConfig memory{};
  Mode start_mode = Mode::Teleop;

  void validate() const {
    if (!(stop_distance >= 0.0)) throw std::invalid_argument("stop_distance must be >= 0");
    if (reverse_ticks < 1) throw std::invalid_argument("reverse_ticks must be >= 1");
    if (!(turn_curvature > 0.0)) throw std::invalid_argument("turn_curvature must be positive");
    if (!(k_ref > 0.0)) throw std::invalid_argument("k_ref must be positive");
    drive_gains.validate();
    memory.validate();
  }
};

struct Inbound {
  std::vector<dtmf::KeypadSymbol> digits;
  std::vector<sirc::SircFrame> frames;
};

struct WheelSetpoints {
  double left_rpm = 0.0;
  double right_rpm = 0.0;
};

struct TickOutput {
  world::Actuation actuation;
  DriveCommand command{CommandKind::Stop, Source::Follower};
  std::optional<DriveCommand> follower;
  std::vector<DriveCommand> operator_commands;
  WheelSetpoints setpoints;
  std::vector<progmem::MemoryEvent> memory_events;
};

/// Wheel-speed targets for a drive command: curvature shapes the linear speed
/// and splits it across the wheels.
inline WheelSetpoints drive_setpoints(CommandKind kind, const world::RobotGeometry& geo,
                                      const ControllerConfig& cfg) {
  const double v_max = geo.max_speed();
  double v = 0.0, kappa = 0.0;
  switch (kind) {
    case CommandKind::Forward: v = pid::curvature_speed_limit(0.0, v_max, cfg.k_ref); break;
    case CommandKind::Backward: v = -pid::curvature_speed_limit(0.0, v_max, cfg.k_ref); break;
    case CommandKind::TurnLeft:
      kappa = cfg.turn_curvature;
      v = pid::curvature_speed_limit(cfg.turn_curvature, v_max, cfg.k_ref);
      break;
    case CommandKind::TurnRight:
      kappa = -cfg.turn_curvature;
      v = pid::curvature_speed_limit(cfg.turn_curvature, v_max, cfg.k_ref);
      break;
    default: return {};
  }
  const double half = 0.5 * kappa * geo.wheel_base;
  return {geo.rpm_for_speed(v * (1.0 - half)), geo.rpm_for_speed(v * (1.0 + half))};
}

class RobotController {
public:
  RobotController(ControllerConfig config, world::RobotGeometry geometry, Pose initial_estimate)
      : config_(config), geometry_(geometry), memory_(config.memory), mode_(config.start_mode),
        estimate_(initial_estimate), left_(config.drive_gains), right_(config.drive_gains) {
    config_.validate();
  }

  TickOutput control_tick(const world::SensorReadings& readings, const Inbound& inbound, progmem::Tick now) {
    TickOutput out;
    const double dt = geometry_.tick_s;

    // Perception: dead reckoning, midpoint heading for the body-frame flow.
    const double heading_delta = last_omega_ * dt;
    estimate_ = integrate_odometry(estimate_, {}, 0.5 * heading_delta, geometry_.flow_resolution);
    estimate_ = integrate_odometry(estimate_, readings.optical_flow, 0.5 * heading_delta,
                                   geometry_.flow_resolution);

    if (!readings.pit_ahead) pit_acknowledged_ = false;
    if (safety_.mode != SafetyMode::Reversing) {
      if (readings.pit_ahead && !pit_acknowledged_) {
        if (safety_.mode != SafetyMode::HaltedAwaitingInstruction) {
          safety_ = SafetyState::halted();
          teleop_latch_.reset();
        }
      } else if (safety_.mode == SafetyMode::Nominal && readings.min_proximity() < config_.stop_distance) {
        safety_ = SafetyState::reversing(config_.reverse_ticks);
        teleop_latch_.reset();
      }
    }

    // Processing.
    bool fresh = false;
    world::GrabberAction grab = world::GrabberAction::None;
    auto apply = [&](const DriveCommand& cmd) {
      fresh = true;
      out.operator_commands.push_back(cmd);
      switch (cmd.kind) {
        case CommandKind::ArmUp: arm_direction_ = 1; break;
        case CommandKind::ArmDown: arm_direction_ = -1; break;
        case CommandKind::GrabOpen: grab = world::GrabberAction::Open; break;
        case CommandKind::GrabClose: grab = world::GrabberAction::Close; break;
        case CommandKind::ModeAuto:
          mode_ = Mode::Auto;
          teleop_latch_.reset();
          follower_.reset();
          break;
        case CommandKind::ModeTeleop: mode_ = Mode::Teleop; break;
        case CommandKind::Stop:
          arm_direction_ = 0;
          teleop_latch_ = cmd;
          break;
        default: teleop_latch_ = cmd; break;
      }
    };
    for (const auto& d : inbound.digits)
      if (auto cmd = map_digit_to_command(d)) apply(*cmd);
    for (const auto& f : inbound.frames)
      if (auto cmd = map_sirc_to_command(f)) apply(*cmd);

    if (mode_ == Mode::Auto) out.follower = follower_.follow_track(readings);

    const bool was_reversing = safety_.mode == SafetyMode::Reversing;
    const bool was_halted = safety_.mode == SafetyMode::HaltedAwaitingInstruction;
    const auto decision = arbitrate(safety_, teleop_latch_, fresh, out.follower, mode_);
    safety_ = decision.safety;
    if (was_halted && safety_.mode == SafetyMode::Nominal && readings.pit_ahead) pit_acknowledged_ = true;
    if (was_reversing && safety_.mode == SafetyMode::Nominal) teleop_latch_.reset();
    out.command = decision.command;

    // Action.
    if (out.command.kind != last_kind_) {
      left_.reset();
      right_.reset();
      last_kind_ = out.command.kind;
    }
    out.setpoints = drive_setpoints(out.command.kind, geometry_, config_);
    if (out.command.kind == CommandKind::Stop) {
      out.actuation.left_rpm = 0.0;
      out.actuation.right_rpm = 0.0;
    } else {
      const double v_meas = static_cast<double>(readings.optical_flow.dx) * geometry_.flow_resolution / dt;
      const double half_w = 0.5 * last_omega_ * geometry_.wheel_base;
      const double meas_l = geometry_.rpm_for_speed(v_meas - half_w);
      const double meas_r = geometry_.rpm_for_speed(v_meas + half_w);
      const double lim = geometry_.max_drive_rpm;
      out.actuation.left_rpm =
          std::clamp(out.setpoints.left_rpm + left_.update(out.setpoints.left_rpm, meas_l, dt), -lim, lim);
      out.actuation.right_rpm =
          std::clamp(out.setpoints.right_rpm + right_.update(out.setpoints.right_rpm, meas_r, dt), -lim, lim);
    }
    out.actuation.arm_rate = arm_direction_ * geometry_.max_arm_rpm;
    out.actuation.grabber_action = grab;
    last_omega_ = (geometry_.wheel_speed(out.actuation.right_rpm) - geometry_.wheel_speed(out.actuation.left_rpm)) /
                  geometry_.wheel_base;

    // Memory: one sensor summary per tick.
    out.memory_events = memory_.tick(now);
    auto put_events = memory_.put("tick:" + std::to_string(now), summarize(readings), now);
    out.memory_events.insert(out.memory_events.end(), put_events.begin(), put_events.end());
    ++memory_puts_;
    return out;
  }

  static std::string summarize(const world::SensorReadings& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "prox=%.3f,%.3f,%.3f;ping=%.3f;pit=%d;lo=%d;lw=%d;flow=%lld,%lld",
                  r.proximity[0], r.proximity[1], r.proximity[2], r.ping, r.pit_ahead ? 1 : 0,
                  r.left_is_obstacle ? 1 : 0, r.left_is_white ? 1 : 0,
                  static_cast<long long>(r.optical_flow.dx), static_cast<long long>(r.optical_flow.dy));
    return buf;
  }

  const SafetyState& safety() const { return safety_; }
  Mode mode() const { return mode_; }
  const Pose& pose_estimate() const { return estimate_; }
  const pid::PidState& pid_left() const { return left_.state(); }
  const pid::PidState& pid_right() const { return right_.state(); }
  const progmem::ProgressiveStore& memory() const { return memory_; }
  progmem::ProgressiveStore& memory() { return memory_; }
  std::uint64_t memory_puts() const { return memory_puts_; }
  const ControllerConfig& config() const { return config_; }
  std::optional<DriveCommand> teleop_latch() const { return teleop_latch_; }

private:
  ControllerConfig config_;
  world::RobotGeometry geometry_;
  progmem::ProgressiveStore memory_;
  SafetyState safety_;
  Mode mode_;
  Pose estimate_;
  pid::Controller left_;
  pid::Controller right_;
  TrackFollower follower_;
  std::optional<DriveCommand> teleop_latch_;
  bool pit_acknowledged_ = false;
  int arm_direction_ = 0;
  double last_omega_ = 0.0;
  CommandKind last_kind_ = CommandKind::Stop;
  std::uint64_t memory_puts_ = 0;
};

}  // namespace teleop::control

#pragma once

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace teleop::pid {

/// Defaults settle a unit step on a first-order plant with a 0.5 s time
/// constant to within 2% in under one second at a 10 ms loop.
struct PidGains {
  double kp = 2.0;
  double ki = 4.0;
  double kd = 0.05;
  double output_min = -10.0;
  double output_max = 10.0;
  double integral_limit = 10.0;

  void validate() const {
    if (!(output_min < output_max)) throw std::invalid_argument("output_min must be < output_max");
    if (!(integral_limit >= 0.0)) throw std::invalid_argument("integral_limit must be >= 0");
  }
};

struct PidState {
  double integral = 0.0;
  double prev_error = 0.0;
  bool initialized = false;
  friend bool operator==(const PidState&, const PidState&) = default;
};

struct PidResult {
  double output;
  PidState state;
};

inline PidState reset(const PidState& = {}) { return PidState{}; }

/// Derivative acts on the error; the first step after a reset uses zero
/// derivative. The integral is frozen while the output is saturated in the
/// direction the error would push it.
inline PidResult step(const PidGains& g, const PidState& s, double setpoint, double measurement,
                      double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("pid step requires dt > 0");
  const double e = setpoint - measurement;
  const double derivative = s.initialized ? (e - s.prev_error) / dt : 0.0;

  double integral = s.integral;
  if (g.ki > 0.0) {
    const double bound = g.integral_limit / std::max(g.ki, std::numeric_limits<double>::epsilon());
    const double candidate = std::clamp(s.integral + e * dt, -bound, bound);
    const double trial = g.kp * e + g.ki * candidate + g.kd * derivative;
    const bool wind_high = trial > g.output_max && e > 0.0;
    const bool wind_low = trial < g.output_min && e < 0.0;
    if (!wind_high && !wind_low) integral = candidate;
  }

  const double raw = g.kp * e + g.ki * integral + g.kd * derivative;
  return PidResult{std::clamp(raw, g.output_min, g.output_max), PidState{integral, e, true}};
}

/// Speed cap that falls off with path curvature: v_max / (1 + curvature / k_ref).
inline double curvature_speed_limit(double curvature, double v_max, double k_ref = 1.0) {
  if (curvature < 0.0) throw std::invalid_argument("curvature must be non-negative (pass |k|)");
  if (!(k_ref > 0.0)) throw std::invalid_argument("k_ref must be positive");
  return v_max / (1.0 + curvature / k_ref);
}

/// Value-semantic convenience wrapper.
class Controller {
public:
  explicit Controller(PidGains gains = {}) : gains_(gains) { gains_.validate(); }
  double update(double setpoint, double measurement, double dt) {
    auto r = step(gains_, state_, setpoint, measurement, dt);
    state_ = r.state;
    return r.output;
  }
  void reset() { state_ = pid::reset(state_); }
  const PidState& state() const { return state_; }
  const PidGains& gains() const { return gains_; }

private:
  PidGains gains_;
  PidState state_;
};

}  // namespace teleop::pid

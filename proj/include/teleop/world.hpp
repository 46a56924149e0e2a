#pragma once

// Fixed-tick grid world with a differential-drive robot. Cells are square;
// cell (cx, cy) spans [cx*size, (cx+1)*size) x [cy*size, (cy+1)*size) with
// y pointing up (map text row 0 is the top, i.e. the largest cy).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace teleop::world {

enum class Cell : std::uint8_t { Free, Obstacle, Pit, WhiteLine, Beacon };
enum class GrabberState { Open, Closed, Holding };
enum class GrabberAction { None, Open, Close };

inline const char* to_string(GrabberState g) {
  switch (g) {
    case GrabberState::Open: return "Open";
    case GrabberState::Closed: return "Closed";
    case GrabberState::Holding: return "Holding";
  }
  return "?";
}

inline const char* to_string(GrabberAction a) {
  switch (a) {
    case GrabberAction::None: return "None";
    case GrabberAction::Open: return "Open";
    case GrabberAction::Close: return "Close";
  }
  return "?";
}

inline double normalize_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // radians, (-pi, pi], 0 = +x, counter-clockwise positive
  friend bool operator==(const Pose&, const Pose&) = default;
};

struct CellIndex {
  int x;
  int y;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

class TerrainGrid {
public:
  TerrainGrid() = default;
  TerrainGrid(int width, int height, double cell_size)
      : width_(width), height_(height), cell_size_(cell_size),
        cells_(static_cast<std::size_t>(width * height), Cell::Free),
        objects_(static_cast<std::size_t>(width * height), 0) {
    if (width < 1 || height < 1) throw std::invalid_argument("grid must be at least 1x1");
    if (!(cell_size > 0.0)) throw std::invalid_argument("cell_size must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  double cell_size() const { return cell_size_; }

  bool contains(CellIndex c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }

  // Out-of-bounds reads as Obstacle: the world is closed.
  Cell at(CellIndex c) const { return contains(c) ? cells_[offset(c)] : Cell::Obstacle; }
  Cell at(int x, int y) const { return at(CellIndex{x, y}); }
  int object_at(CellIndex c) const { return contains(c) ? objects_[offset(c)] : 0; }

  void set(CellIndex c, Cell v, int object_id = 0) {
    if (!contains(c)) throw std::out_of_range("cell outside grid");
    cells_[offset(c)] = v;
    objects_[offset(c)] = v == Cell::Beacon ? object_id : 0;
  }

  CellIndex cell_of(double x, double y) const {
    return {static_cast<int>(std::floor(x / cell_size_)), static_cast<int>(std::floor(y / cell_size_))};
  }

  double center_x(int cx) const { return (cx + 0.5) * cell_size_; }
  double center_y(int cy) const { return (cy + 0.5) * cell_size_; }

  friend bool operator==(const TerrainGrid&, const TerrainGrid&) = default;

private:
  std::size_t offset(CellIndex c) const { return static_cast<std::size_t>(c.y * width_ + c.x); }

  int width_ = 0;
  int height_ = 0;
  double cell_size_ = 0.1;
  std::vector<Cell> cells_;
  std::vector<int> objects_;
};

struct RobotGeometry {
  double wheel_radius = 0.0325;
  double wheel_base = 0.15;
  double max_drive_rpm = 160.0;
  double max_arm_rpm = 60.0;
  double flow_resolution = 0.001;  // m per optical-flow count
  double tick_s = 0.05;
  double grab_range = 0.15;
  double proximity_range = 1.0;
  double ping_range = 2.0;

  double wheel_speed(double rpm) const { return rpm * 2.0 * std::numbers::pi * wheel_radius / 60.0; }
  double rpm_for_speed(double v) const { return v * 60.0 / (2.0 * std::numbers::pi * wheel_radius); }
  double max_speed() const { return wheel_speed(max_drive_rpm); }
};

struct RobotBody {
  Pose pose;
  double left_rpm = 0.0;
  double right_rpm = 0.0;
  double arm_angle = 0.0;
  GrabberState grabber = GrabberState::Open;
  int held_object = 0;
  friend bool operator==(const RobotBody&, const RobotBody&) = default;
};

struct FlowCounts {
  std::int64_t dx = 0;
  std::int64_t dy = 0;
  friend bool operator==(const FlowCounts&, const FlowCounts&) = default;
};

struct SensorReadings {
  // Rays at +30, 0 and -30 degrees relative to heading.
  std::array<double, 3> proximity{1.0, 1.0, 1.0};
  double ping = 2.0;
  bool pit_ahead = false;
  bool left_is_obstacle = false;
  bool left_is_white = false;
  FlowCounts optical_flow;
  friend bool operator==(const SensorReadings&, const SensorReadings&) = default;

  double min_proximity() const { return *std::min_element(proximity.begin(), proximity.end()); }
};

struct Actuation {
  double left_rpm = 0.0;
  double right_rpm = 0.0;
  double arm_rate = 0.0;  // rpm
  GrabberAction grabber_action = GrabberAction::None;
  friend bool operator==(const Actuation&, const Actuation&) = default;
};

struct RayHit {
  double distance;
  Cell cell;
  CellIndex index;
};

inline constexpr double kArmMinAngle = 0.0;
inline constexpr double kArmMaxAngle = std::numbers::pi / 2.0;
inline constexpr double kProximityAngle = std::numbers::pi / 6.0;

class World {
public:
  World() = default;
  World(TerrainGrid grid, RobotGeometry geometry, Pose start, std::uint64_t seed = 0)
      : grid_(std::move(grid)), geometry_(geometry), seed_(seed) {
    body_.pose = start;
    body_.pose.heading = normalize_angle(start.heading);
    if (blocks_motion(grid_.at(grid_.cell_of(start.x, start.y))))
      throw std::invalid_argument("robot start lies in a blocked cell");
  }

  const TerrainGrid& grid() const { return grid_; }
  const RobotGeometry& geometry() const { return geometry_; }
  const RobotBody& body() const { return body_; }
  const Pose& pose() const { return body_.pose; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t tick() const { return tick_; }
  bool fallen() const { return fallen_; }
  GrabberState grabber_at() const { return body_.grabber; }
  const FlowCounts& last_flow() const { return last_flow_; }

  static bool blocks_motion(Cell c) { return c == Cell::Obstacle || c == Cell::Beacon; }
  static bool blocks_ray(Cell c) { return c == Cell::Obstacle || c == Cell::Beacon; }

  /// Grid traversal from (x, y) along `angle`; distance to the boundary of the
  /// first blocking cell, capped at `max_range`.
  RayHit cast_ray(double x, double y, double angle, double max_range) const {
    const double dx = std::cos(angle), dy = std::sin(angle);
    const double cs = grid_.cell_size();
    CellIndex c = grid_.cell_of(x, y);
    const int step_x = dx > 0 ? 1 : -1;
    const int step_y = dy > 0 ? 1 : -1;
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double eps = 1e-12;
    double t_max_x = std::abs(dx) < eps ? inf : ((c.x + (step_x > 0 ? 1 : 0)) * cs - x) / dx;
    double t_max_y = std::abs(dy) < eps ? inf : ((c.y + (step_y > 0 ? 1 : 0)) * cs - y) / dy;
    const double t_delta_x = std::abs(dx) < eps ? inf : cs / std::abs(dx);
    const double t_delta_y = std::abs(dy) < eps ? inf : cs / std::abs(dy);
    while (true) {
      double t;
      if (t_max_x < t_max_y) {
        t = t_max_x;
        c.x += step_x;
        t_max_x += t_delta_x;
      } else {
        t = t_max_y;
        c.y += step_y;
        t_max_y += t_delta_y;
      }
      if (t > max_range) return {max_range, Cell::Free, c};
      const Cell cell = grid_.at(c);
      if (blocks_ray(cell)) return {std::max(0.0, t), cell, c};
    }
  }

  SensorReadings sense() const {
    SensorReadings r;
    const auto& p = body_.pose;
    const double angles[3] = {p.heading + kProximityAngle, p.heading, p.heading - kProximityAngle};
    for (int i = 0; i < 3; ++i)
      r.proximity[i] = cast_ray(p.x, p.y, angles[i], geometry_.proximity_range).distance;
    r.ping = cast_ray(p.x, p.y, p.heading, geometry_.ping_range).distance;
    const double cs = grid_.cell_size();
    const auto ahead = grid_.cell_of(p.x + cs * std::cos(p.heading), p.y + cs * std::sin(p.heading));
    r.pit_ahead = grid_.at(ahead) == Cell::Pit;
    const double left = p.heading + std::numbers::pi / 2.0;
    const auto left_cell = grid_.cell_of(p.x + cs * std::cos(left), p.y + cs * std::sin(left));
    r.left_is_obstacle = grid_.at(left_cell) == Cell::Obstacle;
    r.left_is_white = grid_.at(left_cell) == Cell::WhiteLine;
    r.optical_flow = last_flow_;
    return r;
  }

  void validate(const Actuation& a) const {
    const double lim = geometry_.max_drive_rpm;
    if (!(std::abs(a.left_rpm) <= lim) || !(std::abs(a.right_rpm) <= lim))
      throw std::invalid_argument("drive rpm outside +-" + std::to_string(lim));
    if (!(std::abs(a.arm_rate) <= geometry_.max_arm_rpm))
      throw std::invalid_argument("arm rate outside +-" + std::to_string(geometry_.max_arm_rpm));
  }

  /// Advances one tick and returns the readings observed afterwards.
  SensorReadings step(const Actuation& a, double dt) {
    validate(a);
    if (std::abs(dt - geometry_.tick_s) > 1e-9)
      throw std::invalid_argument("step dt must equal the configured tick");
    if (fallen_) {
      last_flow_ = {};
      return sense();
    }
    ++tick_;
    body_.left_rpm = a.left_rpm;
    body_.right_rpm = a.right_rpm;

    const double vl = geometry_.wheel_speed(a.left_rpm);
    const double vr = geometry_.wheel_speed(a.right_rpm);
    const double v = 0.5 * (vl + vr);
    const double omega = (vr - vl) / geometry_.wheel_base;
    Pose& p = body_.pose;
    const double mid = p.heading + 0.5 * omega * dt;
    const double nx = p.x + v * dt * std::cos(mid);
    const double ny = p.y + v * dt * std::sin(mid);
    const Cell dest = grid_.at(grid_.cell_of(nx, ny));
    double travelled = 0.0;
    if (!blocks_motion(dest)) {
      p.x = nx;
      p.y = ny;
      travelled = v * dt;
      if (dest == Cell::Pit) fallen_ = true;
    }
    p.heading = normalize_angle(p.heading + omega * dt);

    // Body-frame displacement, quantized with the sub-count remainder carried.
    const double counts = flow_residual_ + travelled / geometry_.flow_resolution;
    last_flow_ = {static_cast<std::int64_t>(std::llround(counts)), 0};
    flow_residual_ = counts - static_cast<double>(last_flow_.dx);

    const double arm_rad_s = a.arm_rate * 2.0 * std::numbers::pi / 60.0;
    body_.arm_angle = std::clamp(body_.arm_angle + arm_rad_s * dt, kArmMinAngle, kArmMaxAngle);

    apply_grabber(a.grabber_action);
    return sense();
  }

private:
  void apply_grabber(GrabberAction action) {
    const auto& p = body_.pose;
    if (action == GrabberAction::Close && body_.grabber != GrabberState::Holding) {
      const RayHit hit = cast_ray(p.x, p.y, p.heading, geometry_.ping_range);
      if (hit.cell == Cell::Beacon && hit.distance <= geometry_.grab_range) {
        body_.held_object = grid_.object_at(hit.index);
        grid_.set(hit.index, Cell::Free);
        body_.grabber = GrabberState::Holding;
      } else {
        body_.grabber = GrabberState::Closed;
      }
    } else if (action == GrabberAction::Open) {
      if (body_.grabber == GrabberState::Holding) {
        const double cs = grid_.cell_size();
        const auto ahead = grid_.cell_of(p.x + cs * std::cos(p.heading), p.y + cs * std::sin(p.heading));
        if (grid_.contains(ahead) && grid_.at(ahead) == Cell::Free)
          grid_.set(ahead, Cell::Beacon, body_.held_object);
        body_.held_object = 0;
      }
      body_.grabber = GrabberState::Open;
    }
  }

  TerrainGrid grid_;
  RobotGeometry geometry_;
  RobotBody body_;
  std::uint64_t seed_ = 0;
  std::uint64_t tick_ = 0;
  bool fallen_ = false;
  FlowCounts last_flow_;
  double flow_residual_ = 0.0;
};

}  // namespace teleop::world

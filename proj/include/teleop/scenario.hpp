#pragma once

// Scenario text: `key = value` header lines, then `map:` followed by an ASCII
// grid. Legend: '.' free, '#' obstacle, 'O' pit, '=' white line, 'B' beacon,
// 'S' robot start (a free cell). '#' starts a comment only in the header.

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "teleop/controller.hpp"
#include "teleop/world.hpp"

namespace teleop::scenario {

class ScenarioError : public std::runtime_error {
public:
  ScenarioError(int line, std::string field, const std::string& message)
      : std::runtime_error("scenario line " + std::to_string(line) + (field.empty() ? "" : " [" + field + "]") +
                           ": " + message),
        line_(line), field_(std::move(field)) {}
  int line() const { return line_; }
  const std::string& field() const { return field_; }

private:
  int line_;
  std::string field_;
};

struct Scenario {
  std::uint64_t seed = 1;
  double tick_ms = 50.0;
  world::RobotGeometry geometry;
  world::TerrainGrid grid;
  world::Pose start;
  control::ControllerConfig controller;

  world::World make_world() const { return world::World(grid, geometry, start, seed); }

  void override_seed(std::uint64_t s) {
    seed = s;
    controller.memory.seed = s;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double to_double(std::string_view v, int line, const std::string& key) {
  double out = 0.0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || !std::isfinite(out))
    throw ScenarioError(line, key, "expected a number, got '" + std::string(v) + "'");
  return out;
}

inline long long to_int(std::string_view v, int line, const std::string& key) {
  long long out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size())
    throw ScenarioError(line, key, "expected an integer, got '" + std::string(v) + "'");
  return out;
}

}  // namespace detail

inline Scenario load_scenario(std::string_view text) {
  using detail::to_double;
  using detail::to_int;
  Scenario sc;
  double heading_deg = 0.0;
  bool seed_set = false;

  using Setter = std::function<void(std::string_view, int, const std::string&)>;
  auto real = [](double& dst, double lo) -> Setter {
    return [&dst, lo](std::string_view v, int line, const std::string& key) {
      const double x = to_double(v, line, key);
      if (!(x >= lo)) throw ScenarioError(line, key, "value must be >= " + std::to_string(lo));
      dst = x;
    };
  };
  auto positive = [](double& dst) -> Setter {
    return [&dst](std::string_view v, int line, const std::string& key) {
      const double x = to_double(v, line, key);
      if (!(x > 0.0)) throw ScenarioError(line, key, "value must be positive");
      dst = x;
    };
  };
  auto count = [](auto& dst, long long lo) -> Setter {
    return [&dst, lo](std::string_view v, int line, const std::string& key) {
      const auto x = to_int(v, line, key);
      if (x < lo) throw ScenarioError(line, key, "value must be >= " + std::to_string(lo));
      dst = static_cast<std::remove_reference_t<decltype(dst)>>(x);
    };
  };
  auto any_real = [](double& dst) -> Setter {
    return [&dst](std::string_view v, int line, const std::string& key) { dst = to_double(v, line, key); };
  };

  auto& cc = sc.controller;
  auto& mem = cc.memory;
  const std::map<std::string, Setter, std::less<>> setters{
      {"seed", [&](std::string_view v, int line, const std::string& key) {
         const auto x = to_int(v, line, key);
         if (x < 0) throw ScenarioError(line, key, "seed must be >= 0");
         sc.seed = static_cast<std::uint64_t>(x);
         seed_set = true;
       }},
      {"tick_ms", [&](std::string_view v, int line, const std::string& key) {
         const double x = to_double(v, line, key);
         if (x < 10.0) throw ScenarioError(line, key, "tick_ms must be >= 10");
         sc.tick_ms = x;
       }},
      {"wheel_radius", positive(sc.geometry.wheel_radius)},
      {"wheel_base", positive(sc.geometry.wheel_base)},
      {"flow_resolution", positive(sc.geometry.flow_resolution)},
      {"grab_range", positive(sc.geometry.grab_range)},
      {"start_heading_deg", any_real(heading_deg)},
      {"start_mode", [&](std::string_view v, int line, const std::string& key) {
         if (v == "teleop") cc.start_mode = control::Mode::Teleop;
         else if (v == "auto") cc.start_mode = control::Mode::Auto;
         else throw ScenarioError(line, key, "expected 'teleop' or 'auto'");
       }},
      {"pid.kp", any_real(cc.drive_gains.kp)},
      {"pid.ki", real(cc.drive_gains.ki, 0.0)},
      {"pid.kd", any_real(cc.drive_gains.kd)},
      {"pid.integral_limit", real(cc.drive_gains.integral_limit, 0.0)},
      {"controller.stop_distance", real(cc.stop_distance, 0.0)},
      {"controller.reverse_ticks", count(cc.reverse_ticks, 1)},
      {"controller.turn_curvature", positive(cc.turn_curvature)},
      {"controller.k_ref", positive(cc.k_ref)},
      {"memory.active_capacity", count(mem.active_capacity, 1)},
      {"memory.server_capacity", count(mem.server_capacity, 0)},
      {"memory.growth_step", count(mem.growth_step, 0)},
      {"memory.server_hard_limit", count(mem.server_hard_limit, 0)},
      {"memory.pin_duration", count(mem.pin_duration, 1)},
      {"memory.uplink_latency", count(mem.uplink_latency, 0)},
      {"memory.uplink_failure_rate", [&](std::string_view v, int line, const std::string& key) {
         const double x = to_double(v, line, key);
         if (!(x >= 0.0 && x < 1.0)) throw ScenarioError(line, key, "must lie in [0, 1)");
         mem.uplink_failure_rate = x;
       }},
  };

  double cell_size = 0.1;
  std::vector<std::string> map_rows;
  std::vector<int> map_lines;
  int map_first_line = 0;
  bool in_map = false;
  std::map<std::string, int, std::less<>> seen;

  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = detail::trim(raw);
    if (in_map) {
      if (line.empty()) continue;
      map_rows.emplace_back(line);
      map_lines.push_back(line_no);
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    if (line == "map:") {
      in_map = true;
      map_first_line = line_no + 1;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ScenarioError(line_no, "", "expected 'key = value' or 'map:'");
    const std::string key{detail::trim(line.substr(0, eq))};
    const auto value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ScenarioError(line_no, "", "missing key");
    if (auto [it, inserted] = seen.emplace(key, line_no); !inserted)
      throw ScenarioError(line_no, key, "duplicate key (first on line " + std::to_string(it->second) + ")");
    if (key == "cell_size") {
      cell_size = to_double(value, line_no, key);
      if (!(cell_size > 0.0)) throw ScenarioError(line_no, key, "value must be positive");
      continue;
    }
    auto setter = setters.find(key);
    if (setter == setters.end()) throw ScenarioError(line_no, key, "unknown key");
    setter->second(value, line_no, key);
  }

  if (!in_map) throw ScenarioError(line_no, "map", "missing 'map:' section");
  if (map_rows.size() < 3) throw ScenarioError(map_first_line, "map", "map needs at least 3 rows");
  const auto width = map_rows.front().size();
  if (width < 3) throw ScenarioError(map_first_line, "map", "map needs at least 3 columns");
  const int height = static_cast<int>(map_rows.size());

  sc.geometry.tick_s = sc.tick_ms / 1000.0;
  if (mem.server_hard_limit < mem.server_capacity)
    throw ScenarioError(line_no, "memory.server_hard_limit", "must be >= memory.server_capacity");
  if (!seed_set) sc.seed = 1;
  mem.seed = sc.seed;

  sc.grid = world::TerrainGrid(static_cast<int>(width), height, cell_size);
  bool have_start = false;
  int beacon_id = 0;
  for (int r = 0; r < height; ++r) {
    const auto& row = map_rows[static_cast<std::size_t>(r)];
    const int src_line = map_lines[static_cast<std::size_t>(r)];
    if (row.size() != width)
      throw ScenarioError(src_line, "map", "row width " + std::to_string(row.size()) + " differs from " +
                                               std::to_string(width));
    const int cy = height - 1 - r;
    for (std::size_t c = 0; c < width; ++c) {
      const world::CellIndex idx{static_cast<int>(c), cy};
      const bool border = r == 0 || r == height - 1 || c == 0 || c + 1 == width;
      const char ch = row[c];
      if (border && ch != '#')
        throw ScenarioError(src_line, "map", "border cell at column " + std::to_string(c) + " must be '#'");
      switch (ch) {
        case '.': sc.grid.set(idx, world::Cell::Free); break;
        case '#': sc.grid.set(idx, world::Cell::Obstacle); break;
        case 'O': sc.grid.set(idx, world::Cell::Pit); break;
        case '=': sc.grid.set(idx, world::Cell::WhiteLine); break;
        case 'B': sc.grid.set(idx, world::Cell::Beacon, ++beacon_id); break;
        case 'S':
          if (have_start) throw ScenarioError(src_line, "map", "duplicate robot start 'S'");
          have_start = true;
          sc.grid.set(idx, world::Cell::Free);
          sc.start = {sc.grid.center_x(idx.x), sc.grid.center_y(idx.y), 0.0};
          break;
        default:
          throw ScenarioError(src_line, "map", std::string("unknown map symbol '") + ch + "'");
      }
    }
  }
  if (!have_start) throw ScenarioError(map_first_line, "map", "no robot start 'S'");
  sc.start.heading = world::normalize_angle(heading_deg * std::numbers::pi / 180.0);
  return sc;
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ScenarioError(0, "", "cannot open " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return load_scenario(buf.str());
}

}  // namespace teleop::scenario

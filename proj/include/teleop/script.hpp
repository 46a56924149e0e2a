#pragma once

// Headless scripts, one instruction per line ('#' comments):
//   press <symbol> <ms>      stream the tone, then 60 ms of silence, in tick-sized chunks
//   sirc <cmd> <addr>        queue one pulse train for the next tick
//   wait <ticks>             run ticks with no input
//   expect <field> <op> <v>  compare a field of the latest telemetry record
// Fields are dotted paths into the record (pose.x, sensors.proximity.0, safety).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "teleop/dtmf.hpp"
#include "teleop/session.hpp"
#include "teleop/sirc.hpp"

namespace teleop::script {

using nlohmann::json;

inline constexpr double kPressAmplitude = 0.4;
inline constexpr double kReleaseSilenceMs = 60.0;

class ScriptError : public std::runtime_error {
public:
  ScriptError(int line, const std::string& msg)
      : std::runtime_error("script line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

struct Press {
  char symbol;
  double ms;
};
struct Sirc {
  unsigned command;
  unsigned address;
};
struct Wait {
  long ticks;
};
struct Expect {
  std::string field;
  std::string op;
  std::string value;
};

using Instruction = std::variant<Press, Sirc, Wait, Expect>;

struct Line {
  int number;
  Instruction instruction;
};

using Script = std::vector<Line>;

namespace detail {

inline std::vector<std::string> words(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

template <class T>
T number(const std::string& s, int line) {
  T v{};
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw ScriptError(line, "bad number '" + s + "'");
  return v;
}

inline unsigned parse_uint(const std::string& s, int line) {
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    unsigned v = 0;
    auto [end, ec] = std::from_chars(s.data() + 2, s.data() + s.size(), v, 16);
    if (ec != std::errc() || end != s.data() + s.size()) throw ScriptError(line, "bad number '" + s + "'");
    return v;
  }
  return number<unsigned>(s, line);
}

}  // namespace detail

inline Script parse(std::string_view text) {
  Script script;
  std::istringstream in{std::string(text)};
  std::string raw;
  int n = 0;
  while (std::getline(in, raw)) {
    ++n;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    auto w = detail::words(raw);
    if (w.empty()) continue;
    const auto& op = w[0];
    if (op == "press") {
      if (w.size() != 3 || w[1].size() != 1) throw ScriptError(n, "usage: press <symbol> <ms>");
      try {
        (void)dtmf::KeypadSymbol::from_char(w[1][0]);
      } catch (const std::invalid_argument& e) {
        throw ScriptError(n, e.what());
      }
      const double ms = detail::number<double>(w[2], n);
      if (ms < 40.0) throw ScriptError(n, "press duration must be >= 40 ms");
      script.push_back({n, Press{w[1][0], ms}});
    } else if (op == "sirc") {
      if (w.size() != 3) throw ScriptError(n, "usage: sirc <cmd> <addr>");
      const unsigned cmd = detail::parse_uint(w[1], n), addr = detail::parse_uint(w[2], n);
      if (cmd > 127 || addr > 31) throw ScriptError(n, "sirc command must be < 128 and address < 32");
      script.push_back({n, Sirc{cmd, addr}});
    } else if (op == "wait") {
      if (w.size() != 2) throw ScriptError(n, "usage: wait <ticks>");
      const long t = detail::number<long>(w[1], n);
      if (t < 0) throw ScriptError(n, "wait needs a non-negative tick count");
      script.push_back({n, Wait{t}});
    } else if (op == "expect") {
      if (w.size() != 4) throw ScriptError(n, "usage: expect <field> <op> <value>");
      static const std::vector<std::string> ops{"<", "<=", ">", ">=", "==", "!="};
      if (std::find(ops.begin(), ops.end(), w[2]) == ops.end())
        throw ScriptError(n, "unknown comparison '" + w[2] + "'");
      script.push_back({n, Expect{w[1], w[2], w[3]}});
    } else {
      throw ScriptError(n, "unknown instruction '" + op + "'");
    }
  }
  return script;
}

inline Script parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open script " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse(buf.str());
}

/// Looks up a dotted path; numeric segments index arrays.
inline const json* lookup(const json& rec, std::string_view path) {
  const json* cur = &rec;
  while (!path.empty()) {
    const auto dot = path.find('.');
    const std::string seg{path.substr(0, dot)};
    path = dot == std::string_view::npos ? std::string_view{} : path.substr(dot + 1);
    if (cur->is_object()) {
      auto it = cur->find(seg);
      if (it == cur->end()) return nullptr;
      cur = &*it;
    } else if (cur->is_array()) {
      std::size_t i = 0;
      auto [end, ec] = std::from_chars(seg.data(), seg.data() + seg.size(), i);
      if (ec != std::errc() || end != seg.data() + seg.size() || i >= cur->size()) return nullptr;
      cur = &(*cur)[i];
    } else {
      return nullptr;
    }
  }
  return cur;
}

inline bool evaluate(const json& actual, const std::string& op, const std::string& expected) {
  auto cmp = [&](auto a, auto b) {
    if (op == "<") return a < b;
    if (op == "<=") return a <= b;
    if (op == ">") return a > b;
    if (op == ">=") return a >= b;
    if (op == "==") return a == b;
    return a != b;
  };
  if (actual.is_number()) {
    double want = 0.0;
    auto [end, ec] = std::from_chars(expected.data(), expected.data() + expected.size(), want);
    if (ec != std::errc() || end != expected.data() + expected.size()) return false;
    return cmp(actual.get<double>(), want);
  }
  if (actual.is_boolean()) {
    if (expected != "true" && expected != "false") return false;
    if (op != "==" && op != "!=") return false;
    return cmp(actual.get<bool>(), expected == "true");
  }
  if (actual.is_string()) {
    if (op != "==" && op != "!=") return false;
    return cmp(actual.get<std::string>(), expected);
  }
  if (actual.is_null()) return op == "==" ? expected == "null" : (op == "!=" && expected != "null");
  return false;
}

struct RunResult {
  int exit_code = 0;  // 0 ok, 2 an expectation failed
  std::vector<std::string> failures;
  std::uint64_t ticks = 0;
  bool fallen = false;
  std::vector<json> records;
};

/// Drives an engine through a script. Every telemetry record is appended to
/// `transcript` as one JSON line when given. Stepping stops once the robot
/// has fallen; remaining expectations see the final record.
inline RunResult run(session::Engine& engine, const Script& script, std::ostream* transcript = nullptr,
                     bool keep_records = false) {
  RunResult result;
  std::optional<json> last;
  auto tick = [&](std::span<const std::uint8_t> audio) {
    if (engine.fallen()) return;
    if (!audio.empty()) engine.ingest_audio(audio);
    json rec = engine.step();
    if (transcript) *transcript << rec.dump() << '\n';
    if (keep_records) result.records.push_back(rec);
    last = std::move(rec);
    ++result.ticks;
  };

  for (const auto& line : script) {
    if (const auto* p = std::get_if<Press>(&line.instruction)) {
      auto tone = dtmf::encode_digit(p->symbol, p->ms, dtmf::kDefaultSampleRate, kPressAmplitude);
      const auto silence = static_cast<std::size_t>(std::llround(kReleaseSilenceMs * dtmf::kDefaultSampleRate / 1000.0));
      tone.samples.resize(tone.samples.size() + silence, 0.0);
      const auto bytes = dtmf::pcm16_to_le_bytes(dtmf::to_pcm16(tone.samples));
      const std::size_t chunk = engine.samples_per_tick() * 2;
      for (std::size_t at = 0; at < bytes.size(); at += chunk) {
        const auto len = std::min(chunk, bytes.size() - at);
        tick(std::span<const std::uint8_t>(bytes.data() + at, len));
      }
    } else if (const auto* s = std::get_if<Sirc>(&line.instruction)) {
      engine.ingest_sirc(sirc::to_text(sirc::encode_frame(sirc::SircFrame(s->command, s->address))));
    } else if (const auto* w = std::get_if<Wait>(&line.instruction)) {
      for (long i = 0; i < w->ticks; ++i) tick({});
    } else if (const auto* e = std::get_if<Expect>(&line.instruction)) {
      std::string why;
      if (!last) {
        why = "no telemetry yet";
      } else if (const json* v = lookup(*last, e->field); !v) {
        why = "no field '" + e->field + "'";
      } else if (!evaluate(*v, e->op, e->value)) {
        why = e->field + " = " + v->dump() + ", expected " + e->op + " " + e->value;
      }
      if (!why.empty()) result.failures.push_back("line " + std::to_string(line.number) + ": " + why);
    }
  }
  result.fallen = engine.fallen();
  result.exit_code = result.failures.empty() ? 0 : 2;
  return result;
}

}  // namespace teleop::script

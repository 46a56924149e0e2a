#pragma once

// Wire messages: one JSON object per WebSocket frame,
//   {"type": <string>, "seq": <uint>, "payload": <object>}
// Field names are frozen in docs/wire-schema.json.

#include <sodium.h>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace teleop::wire {

using nlohmann::json;

inline constexpr std::string_view kSchemaVersion = "teleop-wire/1";

enum class MessageType { AudioChunk, SircTrain, Telemetry, DigitEvent, Control, Error };

inline const char* to_string(MessageType t) {
  switch (t) {
    case MessageType::AudioChunk: return "audio_chunk";
    case MessageType::SircTrain: return "sirc_train";
    case MessageType::Telemetry: return "telemetry";
    case MessageType::DigitEvent: return "digit_event";
    case MessageType::Control: return "control";
    case MessageType::Error: return "error";
  }
  return "?";
}

class WireError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline MessageType parse_type(std::string_view s) {
  for (auto t : {MessageType::AudioChunk, MessageType::SircTrain, MessageType::Telemetry,
                 MessageType::DigitEvent, MessageType::Control, MessageType::Error})
    if (s == to_string(t)) return t;
  throw WireError("unknown message type '" + std::string(s) + "'");
}

struct WireMessage {
  MessageType type;
  std::uint64_t seq = 0;
  json payload = json::object();

  std::string serialize() const {
    return json{{"type", to_string(type)}, {"seq", seq}, {"payload", payload}}.dump();
  }

  static WireMessage parse(std::string_view text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw WireError("message is not a JSON object");
    if (!j.contains("type") || !j["type"].is_string()) throw WireError("message lacks a string 'type'");
    if (!j.contains("seq") || !j["seq"].is_number_unsigned()) throw WireError("message lacks an unsigned 'seq'");
    WireMessage m{parse_type(j["type"].get<std::string>()), j["seq"].get<std::uint64_t>(), json::object()};
    if (j.contains("payload")) {
      if (!j["payload"].is_object()) throw WireError("'payload' must be an object");
      m.payload = j["payload"];
    }
    return m;
  }
};

inline void ensure_sodium() {
  if (sodium_init() < 0) throw std::runtime_error("libsodium failed to initialize");
}

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  ensure_sodium();
  std::string out(sodium_base64_ENCODED_LEN(bytes.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  out.resize(out.size() - 1);  // trailing NUL
  return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string_view text) {
  ensure_sodium();
  std::vector<std::uint8_t> out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0)
    throw WireError("invalid base64 payload");
  out.resize(len);
  return out;
}

struct AudioChunk {
  std::uint32_t sample_rate = 8000;
  std::vector<std::uint8_t> pcm;  // 16-bit little-endian mono
};

inline json audio_payload(const AudioChunk& c) {
  return {{"sample_rate", c.sample_rate}, {"pcm", base64_encode(c.pcm)}};
}

inline AudioChunk parse_audio(const json& p) {
  if (!p.contains("pcm") || !p["pcm"].is_string()) throw WireError("audio_chunk needs a base64 'pcm' string");
  AudioChunk c;
  if (p.contains("sample_rate")) {
    if (!p["sample_rate"].is_number_unsigned()) throw WireError("'sample_rate' must be unsigned");
    c.sample_rate = p["sample_rate"].get<std::uint32_t>();
  }
  c.pcm = base64_decode(p["pcm"].get<std::string>());
  return c;
}

inline std::string parse_sirc(const json& p) {
  if (!p.contains("pulses") || !p["pulses"].is_string())
    throw WireError("sirc_train needs a 'pulses' string");
  return p["pulses"].get<std::string>();
}

/// Per-direction sequence counter.
class Sequencer {
public:
  std::uint64_t next() { return ++last_; }
  std::uint64_t last() const { return last_; }

private:
  std::uint64_t last_ = 0;
};

/// Rejects inbound messages whose seq does not strictly increase.
class SeqGuard {
public:
  bool accept(std::uint64_t seq) {
    if (last_ && seq <= *last_) return false;
    last_ = seq;
    return true;
  }

private:
  std::optional<std::uint64_t> last_;
};

}  // namespace teleop::wire

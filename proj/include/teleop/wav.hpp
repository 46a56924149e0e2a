#pragma once

// Canonical RIFF/WAVE, PCM format 1, 16-bit mono.

#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace teleop::wav {

struct Pcm16 {
  std::vector<std::int16_t> samples;
  std::uint32_t sample_rate = 8000;
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_tag(std::vector<std::uint8_t>& b, const char* tag) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(tag[i]));
}
inline std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}
inline std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}
inline bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  for (int i = 0; i < 4; ++i)
    if (b[at + i] != static_cast<std::uint8_t>(tag[i])) return false;
  return true;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode(const Pcm16& pcm) {
  using namespace detail;
  const auto data_bytes = static_cast<std::uint32_t>(pcm.samples.size() * 2);
  std::vector<std::uint8_t> b;
  b.reserve(44 + data_bytes);
  put_tag(b, "RIFF");
  put_u32(b, 36 + data_bytes);
  put_tag(b, "WAVE");
  put_tag(b, "fmt ");
  put_u32(b, 16);
  put_u16(b, 1);  // PCM
  put_u16(b, 1);  // mono
  put_u32(b, pcm.sample_rate);
  put_u32(b, pcm.sample_rate * 2);
  put_u16(b, 2);
  put_u16(b, 16);
  put_tag(b, "data");
  put_u32(b, data_bytes);
  for (auto s : pcm.samples) put_u16(b, static_cast<std::uint16_t>(s));
  return b;
}

inline Pcm16 decode(std::span<const std::uint8_t> b) {
  using namespace detail;
  if (b.size() < 12 || !tag_is(b, 0, "RIFF") || !tag_is(b, 8, "WAVE"))
    throw std::runtime_error("not a RIFF/WAVE file");
  Pcm16 out;
  bool have_fmt = false;
  std::size_t at = 12;
  while (at + 8 <= b.size()) {
    const std::uint32_t len = get_u32(b, at + 4);
    const std::size_t body = at + 8;
    if (body + len > b.size()) throw std::runtime_error("truncated WAV chunk");
    if (tag_is(b, at, "fmt ")) {
      if (len < 16) throw std::runtime_error("short fmt chunk");
      if (get_u16(b, body) != 1) throw std::runtime_error("WAV is not PCM format 1");
      if (get_u16(b, body + 2) != 1) throw std::runtime_error("WAV must be mono");
      if (get_u16(b, body + 14) != 16) throw std::runtime_error("WAV must be 16-bit");
      out.sample_rate = get_u32(b, body + 4);
      have_fmt = true;
    } else if (tag_is(b, at, "data")) {
      if (!have_fmt) throw std::runtime_error("data chunk before fmt chunk");
      out.samples.resize(len / 2);
      for (std::size_t i = 0; i < out.samples.size(); ++i)
        out.samples[i] = static_cast<std::int16_t>(get_u16(b, body + 2 * i));
      return out;
    }
    at = body + len + (len & 1u);
  }
  throw std::runtime_error("WAV has no data chunk");
}

inline void write_file(const std::string& path, const Pcm16& pcm) {
  const auto bytes = encode(pcm);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline Pcm16 read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

}  // namespace teleop::wav

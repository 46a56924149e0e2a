#pragma once

// 12-bit SIRC frames (7-bit command, 5-bit address) as demodulated pulse
// timings, the form a TSOP-style receiver emits.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace teleop::sirc {

inline constexpr int kStartMarkUs = 2400;
inline constexpr int kZeroMarkUs = 600;
inline constexpr int kOneMarkUs = 1200;
inline constexpr int kSpaceUs = 600;
inline constexpr int kCommandBits = 7;
inline constexpr int kAddressBits = 5;
inline constexpr int kDataBits = kCommandBits + kAddressBits;
inline constexpr double kDefaultTolerance = 0.25;

class SircFrame {
public:
  SircFrame(unsigned command, unsigned address) : command_(command), address_(address) {
    if (command >= (1u << kCommandBits)) throw std::invalid_argument("SIRC command exceeds 7 bits");
    if (address >= (1u << kAddressBits)) throw std::invalid_argument("SIRC address exceeds 5 bits");
  }
  unsigned command() const { return command_; }
  unsigned address() const { return address_; }
  friend bool operator==(const SircFrame&, const SircFrame&) = default;

private:
  unsigned command_;
  unsigned address_;
};

struct Pulse {
  int mark_us;
  int space_us;
  friend bool operator==(const Pulse&, const Pulse&) = default;
};

using PulseTrain = std::vector<Pulse>;

enum class DecodeErrorKind { MissingStartBurst, BitCountMismatch, AmbiguousMark };

inline const char* to_string(DecodeErrorKind k) {
  switch (k) {
    case DecodeErrorKind::MissingStartBurst: return "MissingStartBurst";
    case DecodeErrorKind::BitCountMismatch: return "BitCountMismatch";
    case DecodeErrorKind::AmbiguousMark: return "AmbiguousMark";
  }
  return "?";
}

class DecodeError : public std::runtime_error {
public:
  DecodeError(DecodeErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  DecodeErrorKind kind() const { return kind_; }

private:
  DecodeErrorKind kind_;
};

inline PulseTrain encode_frame(const SircFrame& frame) {
  PulseTrain train;
  train.reserve(1 + kDataBits);
  train.push_back({kStartMarkUs, kSpaceUs});
  const unsigned bits = frame.command() | (frame.address() << kCommandBits);
  for (int i = 0; i < kDataBits; ++i)
    train.push_back({(bits >> i) & 1u ? kOneMarkUs : kZeroMarkUs, kSpaceUs});
  return train;
}

namespace detail {
inline bool within(int measured, int nominal, double tolerance) {
  return std::abs(measured - nominal) <= tolerance * nominal;
}
}  // namespace detail

/// Marks are classified by the nominal duration they fall within. Spaces are
/// not inspected beyond being positive.
inline SircFrame decode_pulses(const PulseTrain& train, double tolerance = kDefaultTolerance) {
  if (!(tolerance > 0.0 && tolerance < 0.5))
    throw std::invalid_argument("tolerance must lie in (0, 0.5)");
  if (train.empty() || !detail::within(train.front().mark_us, kStartMarkUs, tolerance))
    throw DecodeError(DecodeErrorKind::MissingStartBurst,
                      train.empty() ? "empty train"
                                    : "first mark " + std::to_string(train.front().mark_us) + " us");
  const auto data = train.size() - 1;
  if (data != static_cast<std::size_t>(kDataBits))
    throw DecodeError(DecodeErrorKind::BitCountMismatch,
                      std::to_string(data) + " data bits, expected " + std::to_string(kDataBits));
  unsigned bits = 0;
  for (int i = 0; i < kDataBits; ++i) {
    const int mark = train[1 + i].mark_us;
    const bool zero = detail::within(mark, kZeroMarkUs, tolerance);
    const bool one = detail::within(mark, kOneMarkUs, tolerance);
    // Bands cannot overlap for tolerance < 1/3; above that prefer the nearer nominal.
    if (zero && one) {
      if (std::abs(mark - kOneMarkUs) < std::abs(mark - kZeroMarkUs)) bits |= 1u << i;
    } else if (one) {
      bits |= 1u << i;
    } else if (!zero) {
      throw DecodeError(DecodeErrorKind::AmbiguousMark,
                        "bit " + std::to_string(i) + " mark " + std::to_string(mark) + " us");
    }
  }
  return SircFrame(bits & 0x7fu, bits >> kCommandBits);
}

// Text form: comma-separated signed integers, positive = mark us, negative = space us.

inline std::string to_text(const PulseTrain& train) {
  std::string s;
  for (const auto& p : train) {
    if (!s.empty()) s += ',';
    s += std::to_string(p.mark_us);
    s += ',';
    s += std::to_string(-p.space_us);
  }
  return s;
}

inline PulseTrain parse_text(std::string_view text) {
  std::vector<int> values;
  std::size_t at = 0;
  while (at <= text.size()) {
    auto comma = text.find(',', at);
    if (comma == std::string_view::npos) comma = text.size();
    auto token = text.substr(at, comma - at);
    while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
    while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\n' ||
                              token.back() == '\r'))
      token.remove_suffix(1);
    int v = 0;
    auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || end != token.data() + token.size() || v == 0)
      throw std::invalid_argument("bad pulse duration '" + std::string(token) + "'");
    values.push_back(v);
    at = comma + 1;
  }
  if (values.size() % 2 != 0) throw std::invalid_argument("pulse train must be mark/space pairs");
  PulseTrain train;
  for (std::size_t i = 0; i < values.size(); i += 2) {
    if (values[i] <= 0 || values[i + 1] >= 0)
      throw std::invalid_argument("pulse train must alternate mark (+) and space (-)");
    train.push_back({values[i], -values[i + 1]});
  }
  return train;
}

}  // namespace teleop::sirc

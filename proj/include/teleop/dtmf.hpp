#pragma once

// Dual-tone keypad signaling: tone synthesis, single-bin power estimation,
// per-frame classification and a debounced stream decoder.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace teleop::dtmf {

inline constexpr std::array<double, 4> kRowFrequencies{697.0, 770.0, 852.0, 941.0};
inline constexpr std::array<double, 4> kColumnFrequencies{1209.0, 1336.0, 1477.0, 1633.0};
inline constexpr std::array<std::string_view, 4> kKeypadRows{"123A", "456B", "789C", "*0#D"};
inline constexpr double kDefaultSampleRate = 8000.0;

class KeypadSymbol {
public:
  static KeypadSymbol from_char(char c) {
    for (int r = 0; r < 4; ++r) {
      auto pos = kKeypadRows[r].find(c);
      if (pos != std::string_view::npos) return KeypadSymbol(r, static_cast<int>(pos));
    }
    throw std::invalid_argument(std::string("not a keypad symbol: '") + c + "'");
  }

  static KeypadSymbol from_grid(int row, int col) {
    if (row < 0 || row > 3 || col < 0 || col > 3)
      throw std::invalid_argument("keypad grid index out of range");
    return KeypadSymbol(row, col);
  }

  static std::vector<KeypadSymbol> all() {
    std::vector<KeypadSymbol> out;
    for (int i = 0; i < 16; ++i) out.push_back(KeypadSymbol(i / 4, i % 4));
    return out;
  }

  char symbol() const { return kKeypadRows[row_][col_]; }
  int row_index() const { return row_; }
  int col_index() const { return col_; }
  double row_frequency() const { return kRowFrequencies[row_]; }
  double column_frequency() const { return kColumnFrequencies[col_]; }

  friend bool operator==(const KeypadSymbol&, const KeypadSymbol&) = default;

private:
  KeypadSymbol(int row, int col) : row_(row), col_(col) {}
  int row_;
  int col_;
};

struct ToneFrame {
  std::vector<double> samples;
  double sample_rate = kDefaultSampleRate;
};

struct DetectorConfig {
  std::size_t frame_len = 205;
  double power_threshold = 1e-4;
  double twist_limit = 8.0;
  // Winner must beat the runner-up in its own group by this factor.
  double dominance = 4.0;
  // Share of frame energy the two tones must carry (the confidence figure).
  double min_tone_fraction = 0.5;
  int min_digit_frames = 2;
  int min_gap_frames = 1;

  void validate() const {
    if (frame_len < 64) throw std::invalid_argument("frame_len must be >= 64");
    if (!(power_threshold > 0) || !(twist_limit > 0) || !(dominance > 0))
      throw std::invalid_argument("detector thresholds must be positive");
    if (!(min_tone_fraction >= 0.0 && min_tone_fraction <= 1.0))
      throw std::invalid_argument("min_tone_fraction must lie in [0, 1]");
    if (min_digit_frames < 1 || min_gap_frames < 0)
      throw std::invalid_argument("debounce counts out of range");
  }
};

struct Detection {
  KeypadSymbol symbol;
  double confidence;
};

struct DigitEvent {
  KeypadSymbol symbol;
  std::size_t start_tick;  // frame index of the first detecting frame
  std::size_t duration;    // frames
  double confidence;       // mean over the run
};

/// Sum of the row and column sinusoids for `symbol`, each at `amplitude`.
inline ToneFrame encode_digit(KeypadSymbol symbol, double duration_ms,
                              double sample_rate = kDefaultSampleRate, double amplitude = 0.4) {
  if (!(amplitude > 0.0) || amplitude > 0.5)
    throw std::invalid_argument("tone amplitude must be in (0, 0.5] so the pair cannot clip");
  if (duration_ms < 40.0) throw std::invalid_argument("tone duration must be >= 40 ms");
  if (!(sample_rate > 2.0 * symbol.column_frequency()))
    throw std::invalid_argument("sample rate too low for keypad tones");

  const auto n = static_cast<std::size_t>(std::llround(duration_ms * sample_rate / 1000.0));
  const double w_row = 2.0 * std::numbers::pi * symbol.row_frequency() / sample_rate;
  const double w_col = 2.0 * std::numbers::pi * symbol.column_frequency() / sample_rate;
  ToneFrame frame;
  frame.sample_rate = sample_rate;
  frame.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = static_cast<double>(i);
    frame.samples[i] = amplitude * std::sin(w_row * t) + amplitude * std::sin(w_col * t);
  }
  return frame;
}

inline ToneFrame encode_digit(char symbol, double duration_ms,
                              double sample_rate = kDefaultSampleRate, double amplitude = 0.4) {
  return encode_digit(KeypadSymbol::from_char(symbol), duration_ms, sample_rate, amplitude);
}

/// Squared magnitude of the frame's content at `target` Hz, divided by N^2.
/// A sinusoid of amplitude A at the target frequency reads close to A^2/4.
inline double goertzel_power(std::span<const double> samples, double sample_rate, double target) {
  if (!(target > 0.0) || !(target < sample_rate / 2.0))
    throw std::invalid_argument("target frequency outside (0, Nyquist)");
  if (samples.empty()) return 0.0;
  const double w = 2.0 * std::numbers::pi * target / sample_rate;
  const double coeff = 2.0 * std::cos(w);
  double s1 = 0.0, s2 = 0.0;
  for (double x : samples) {
    const double s0 = x + coeff * s1 - s2;
    s2 = s1;
    s1 = s0;
  }
  const double mag2 = s1 * s1 + s2 * s2 - coeff * s1 * s2;
  const auto n = static_cast<double>(samples.size());
  return std::max(0.0, mag2) / (n * n);
}

inline double goertzel_power(const ToneFrame& frame, double target) {
  return goertzel_power(frame.samples, frame.sample_rate, target);
}

namespace detail {

struct GroupPick {
  int index = 0;
  double best = 0.0;
  double runner_up = 0.0;
};

inline GroupPick pick(const std::array<double, 4>& p) {
  GroupPick g;
  for (int i = 1; i < 4; ++i)
    if (p[i] > p[g.index]) g.index = i;
  g.best = p[g.index];
  for (int i = 0; i < 4; ++i)
    if (i != g.index) g.runner_up = std::max(g.runner_up, p[i]);
  return g;
}

}  // namespace detail

inline std::optional<Detection> detect_digit(std::span<const double> samples, double sample_rate,
                                             const DetectorConfig& config) {
  if (samples.size() != config.frame_len)
    throw std::invalid_argument("frame length " + std::to_string(samples.size()) +
                                " does not match detector frame_len " +
                                std::to_string(config.frame_len));
  std::array<double, 4> rows{}, cols{};
  for (int i = 0; i < 4; ++i) {
    rows[i] = goertzel_power(samples, sample_rate, kRowFrequencies[i]);
    cols[i] = goertzel_power(samples, sample_rate, kColumnFrequencies[i]);
  }
  const auto r = detail::pick(rows);
  const auto c = detail::pick(cols);
  if (r.best <= config.power_threshold || c.best <= config.power_threshold) return std::nullopt;
  if (r.best > config.twist_limit * c.best || c.best > config.twist_limit * r.best)
    return std::nullopt;
  if (r.best < config.dominance * r.runner_up || c.best < config.dominance * c.runner_up)
    return std::nullopt;

  // A real sinusoid splits its energy between +f and -f, so the one-sided bin
  // power is doubled before comparing against the mean-square frame energy.
  double energy = 0.0;
  for (double x : samples) energy += x * x;
  energy /= static_cast<double>(samples.size());
  const double confidence = energy > 0.0 ? std::min(1.0, 2.0 * (r.best + c.best) / energy) : 0.0;
  if (confidence < config.min_tone_fraction) return std::nullopt;
  return Detection{KeypadSymbol::from_grid(r.index, c.index), confidence};
}

inline std::optional<Detection> detect_digit(const ToneFrame& frame, const DetectorConfig& config) {
  return detect_digit(frame.samples, frame.sample_rate, config);
}

/// Incremental decoder. Feed arbitrary-size chunks; events are emitted when a
/// run of identical per-frame detections ends (or on flush()).
class StreamDecoder {
public:
  explicit StreamDecoder(DetectorConfig config = {}, double sample_rate = kDefaultSampleRate)
      : config_(config), sample_rate_(sample_rate) {
    config_.validate();
    pending_.reserve(config_.frame_len);
  }

  std::vector<DigitEvent> feed(std::span<const double> samples) {
    std::vector<DigitEvent> out;
    for (double x : samples) {
      pending_.push_back(x);
      if (pending_.size() == config_.frame_len) {
        on_frame(detect_digit(pending_, sample_rate_, config_), out);
        pending_.clear();
        ++frame_index_;
      }
    }
    return out;
  }

  std::vector<DigitEvent> feed_pcm16(std::span<const std::int16_t> pcm) {
    std::vector<double> tmp(pcm.size());
    for (std::size_t i = 0; i < pcm.size(); ++i) tmp[i] = static_cast<double>(pcm[i]) / 32768.0;
    return feed(tmp);
  }

  /// Ends the stream. The end reads as silence: a partial trailing window is
  /// zero-padded and classified, then any open run is closed. Without this a
  /// 50 ms tone (400 samples) could never span two 205-sample frames.
  std::vector<DigitEvent> flush() {
    std::vector<DigitEvent> out;
    if (!pending_.empty()) {
      pending_.resize(config_.frame_len, 0.0);
      on_frame(detect_digit(pending_, sample_rate_, config_), out);
      pending_.clear();
      ++frame_index_;
    }
    close_run(out);
    return out;
  }

  const DetectorConfig& config() const { return config_; }
  std::size_t frames_seen() const { return frame_index_; }

private:
  void on_frame(const std::optional<Detection>& d, std::vector<DigitEvent>& out) {
    if (d && run_symbol_ && *run_symbol_ == d->symbol) {
      ++run_len_;
      run_conf_ += d->confidence;
      return;
    }
    close_run(out);
    if (!d) {
      ++gap_;
      return;
    }
    run_symbol_ = d->symbol;
    run_start_ = frame_index_;
    run_len_ = 1;
    run_conf_ = d->confidence;
  }

  void close_run(std::vector<DigitEvent>& out) {
    if (!run_symbol_) return;
    const bool long_enough = run_len_ >= static_cast<std::size_t>(config_.min_digit_frames);
    const bool separated = !last_emitted_ || !(*last_emitted_ == *run_symbol_) ||
                           gap_ >= static_cast<std::size_t>(config_.min_gap_frames);
    if (long_enough && separated) {
      out.push_back(DigitEvent{*run_symbol_, run_start_, run_len_,
                               run_conf_ / static_cast<double>(run_len_)});
      last_emitted_ = run_symbol_;
      gap_ = 0;
    }
    run_symbol_.reset();
    run_len_ = 0;
    run_conf_ = 0.0;
  }

  DetectorConfig config_;
  double sample_rate_;
  std::vector<double> pending_;
  std::size_t frame_index_ = 0;
  std::optional<KeypadSymbol> run_symbol_;
  std::size_t run_start_ = 0;
  std::size_t run_len_ = 0;
  double run_conf_ = 0.0;
  std::optional<KeypadSymbol> last_emitted_;
  std::size_t gap_ = 0;
};

inline std::vector<DigitEvent> decode_stream(std::span<const double> samples,
                                             const DetectorConfig& config = {},
                                             double sample_rate = kDefaultSampleRate) {
  StreamDecoder dec(config, sample_rate);
  auto events = dec.feed(samples);
  auto tail = dec.flush();
  events.insert(events.end(), tail.begin(), tail.end());
  return events;
}

inline std::string symbols_of(const std::vector<DigitEvent>& events) {
  std::string s;
  for (const auto& e : events) s.push_back(e.symbol.symbol());
  return s;
}

// 16-bit little-endian interchange.

inline std::vector<std::int16_t> to_pcm16(std::span<const double> samples) {
  std::vector<std::int16_t> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double v = std::clamp(samples[i], -1.0, 1.0) * 32767.0;
    out[i] = static_cast<std::int16_t>(std::lround(v));
  }
  return out;
}

inline std::vector<double> from_pcm16(std::span<const std::int16_t> pcm) {
  std::vector<double> out(pcm.size());
  for (std::size_t i = 0; i < pcm.size(); ++i) out[i] = static_cast<double>(pcm[i]) / 32768.0;
  return out;
}

inline std::vector<std::int16_t> pcm16_from_le_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 2 != 0) throw std::invalid_argument("PCM byte count must be even");
  std::vector<std::int16_t> out(bytes.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::int16_t>(static_cast<std::uint16_t>(bytes[2 * i]) |
                                       (static_cast<std::uint16_t>(bytes[2 * i + 1]) << 8));
  return out;
}

inline std::vector<std::uint8_t> pcm16_to_le_bytes(std::span<const std::int16_t> pcm) {
  std::vector<std::uint8_t> out(pcm.size() * 2);
  for (std::size_t i = 0; i < pcm.size(); ++i) {
    const auto u = static_cast<std::uint16_t>(pcm[i]);
    out[2 * i] = static_cast<std::uint8_t>(u & 0xff);
    out[2 * i + 1] = static_cast<std::uint8_t>(u >> 8);
  }
  return out;
}

}  // namespace teleop::dtmf

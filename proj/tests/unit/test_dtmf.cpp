#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "dft.hpp"
#include "teleop/dtmf.hpp"
#include "teleop/wav.hpp"

using namespace teleop::dtmf;

namespace {

std::vector<double> concat(std::initializer_list<std::vector<double>> parts) {
  std::vector<double> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<double> silence_ms(double ms) { return std::vector<double>(static_cast<std::size_t>(ms * 8), 0.0); }

std::vector<double> sine(double f, double amp, std::size_t n, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2 * std::numbers::pi * f * static_cast<double>(i) / 8000.0 + phase);
  return x;
}

}  // namespace

TEST(Keypad, GridIsABijection) {
  std::set<std::pair<int, int>> cells;
  std::set<char> symbols;
  for (const auto& s : KeypadSymbol::all()) {
    cells.insert({s.row_index(), s.col_index()});
    symbols.insert(s.symbol());
    EXPECT_EQ(KeypadSymbol::from_char(s.symbol()), s);
  }
  EXPECT_EQ(cells.size(), 16u);
  EXPECT_EQ(symbols.size(), 16u);
  EXPECT_EQ(KeypadSymbol::from_char('5').row_frequency(), 770.0);
  EXPECT_EQ(KeypadSymbol::from_char('5').column_frequency(), 1336.0);
  EXPECT_EQ(KeypadSymbol::from_char('D').row_frequency(), 941.0);
  EXPECT_EQ(KeypadSymbol::from_char('D').column_frequency(), 1633.0);
  EXPECT_THROW(KeypadSymbol::from_char('E'), std::invalid_argument);
  EXPECT_THROW(KeypadSymbol::from_grid(4, 0), std::invalid_argument);
}

TEST(Encode, FivePeaksAtItsRowAndColumn) {
  const auto f = encode_digit('5', 100.0, 8000.0, 0.4);
  ASSERT_EQ(f.samples.size(), 800u);
  const auto [lo, hi] = oracle::two_peaks(f.samples, 8000.0, 600.0, 1700.0);
  EXPECT_EQ(lo, 770.0);
  EXPECT_EQ(hi, 1336.0);
}

TEST(Encode, RejectsClippingAndShortTones) {
  EXPECT_THROW(encode_digit('1', 100.0, 8000.0, 0.6), std::invalid_argument);
  EXPECT_THROW(encode_digit('1', 100.0, 8000.0, 0.0), std::invalid_argument);
  EXPECT_THROW(encode_digit('1', 39.0), std::invalid_argument);
  EXPECT_THROW(encode_digit('x', 100.0), std::invalid_argument);
  for (const auto& s : KeypadSymbol::all()) {
    const auto f = encode_digit(s, 200.0, 8000.0, 0.5);
    for (double x : f.samples) ASSERT_LE(std::abs(x), 1.0);
  }
}

TEST(Goertzel, MatchesDirectDftAtEveryKeypadFrequency) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> phase(0.0, 2 * std::numbers::pi);
  for (double f : {697.0, 770.0, 852.0, 941.0, 1209.0, 1336.0, 1477.0, 1633.0}) {
    for (std::size_t n : {205u, 400u, 800u}) {
      const auto x = sine(f, 0.4, n, phase(rng));
      for (double target : {697.0, 770.0, 852.0, 941.0, 1209.0, 1336.0, 1477.0, 1633.0}) {
        const double want = oracle::dft_power(x, 8000.0, target);
        const double got = goertzel_power(x, 8000.0, target);
        EXPECT_NEAR(got, want, 1e-9 + 1e-9 * want) << f << " Hz tone, " << target << " Hz bin, N=" << n;
      }
    }
  }
}

TEST(Goertzel, AnalyticAmplitude) {
  const auto x = sine(770.0, 0.5, 205);
  EXPECT_NEAR(goertzel_power(x, 8000.0, 770.0), 0.0625, 0.02 * 0.0625);
  EXPECT_EQ(goertzel_power(std::vector<double>(205, 0.0), 8000.0, 1209.0), 0.0);
  EXPECT_THROW(goertzel_power(x, 8000.0, 4000.0), std::invalid_argument);
  EXPECT_THROW(goertzel_power(x, 8000.0, 0.0), std::invalid_argument);
}

TEST(Goertzel, CrossGroupSelectivity) {
  // Both 770 and 1336 Hz fall on exact bins of a 4000-sample frame.
  const auto x = sine(770.0, 0.5, 4000);
  const double on = goertzel_power(x, 8000.0, 770.0);
  EXPECT_LT(goertzel_power(x, 8000.0, 1336.0), 1e-6 * on);
  // At the 205-sample detector frame rectangular leakage is larger; the
  // figure below is the direct-DFT value for this frame.
  const auto y = sine(770.0, 0.5, 205);
  const double ratio = goertzel_power(y, 8000.0, 1336.0) / goertzel_power(y, 8000.0, 770.0);
  EXPECT_NEAR(ratio, oracle::dft_power(y, 8000.0, 1336.0) / oracle::dft_power(y, 8000.0, 770.0), 1e-9);
  EXPECT_NEAR(ratio, 4.7488e-4, 1e-7);
}

TEST(Detect, CleanSevenIsConfident) {
  const auto f = encode_digit('7', 100.0);
  const auto d = detect_digit(std::span<const double>(f.samples).first(205), 8000.0, DetectorConfig{});
  ASSERT_TRUE(d);
  EXPECT_EQ(d->symbol.symbol(), '7');
  EXPECT_GT(d->confidence, 0.9);
  EXPECT_LE(d->confidence, 1.0);
}

TEST(Detect, SilenceAndWrongLength) {
  EXPECT_FALSE(detect_digit(std::vector<double>(205, 0.0), 8000.0, DetectorConfig{}));
  EXPECT_THROW(detect_digit(std::vector<double>(204, 0.0), 8000.0, DetectorConfig{}), std::invalid_argument);
}

TEST(Detect, SingleFrequencyIsNeverADigit) {
  for (double f : {697.0, 770.0, 852.0, 941.0, 1209.0, 1336.0, 1477.0, 1633.0})
    for (double amp : {0.1, 0.4, 0.8})
      EXPECT_FALSE(detect_digit(sine(f, amp, 205), 8000.0, DetectorConfig{})) << f << " Hz";
}

TEST(Detect, ClassificationIsScaleInvariant) {
  for (const auto& s : KeypadSymbol::all()) {
    const auto f = encode_digit(s, 100.0);
    std::vector<double> frame(f.samples.begin() + 100, f.samples.begin() + 305);
    for (double k : {0.5, 0.6, 0.75, 0.9, 1.0}) {
      std::vector<double> scaled(frame);
      for (auto& x : scaled) x *= k;
      const auto d = detect_digit(scaled, 8000.0, DetectorConfig{});
      ASSERT_TRUE(d) << s.symbol() << " k=" << k;
      EXPECT_EQ(d->symbol, s);
    }
  }
}

TEST(Detect, NoiseAtPointOneNeverFires) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> uniform(-0.1, 0.1);
  std::normal_distribution<double> gauss(0.0, 0.1);
  int fired = 0;
  std::vector<double> frame(205);
  for (int i = 0; i < 2000; ++i) {
    for (auto& x : frame) x = i % 2 ? uniform(rng) : gauss(rng);
    fired += detect_digit(frame, 8000.0, DetectorConfig{}).has_value();
  }
  EXPECT_EQ(fired, 0);
}

TEST(Detect, ToneFractionGateIsWhatRejectsNoise) {
  // Without the energy-share gate the four power rules alone pass some noise.
  DetectorConfig loose;
  loose.min_tone_fraction = 0.0;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> gauss(0.0, 0.1);
  int fired = 0;
  std::vector<double> frame(205);
  for (int i = 0; i < 3000; ++i) {
    for (auto& x : frame) x = gauss(rng);
    if (auto d = detect_digit(frame, 8000.0, loose)) {
      ++fired;
      EXPECT_LT(d->confidence, DetectorConfig{}.min_tone_fraction);
    }
  }
  EXPECT_GT(fired, 0);
}

TEST(Detect, TwentyDbGaussianNoise) {
  // Two tones at 0.4 carry 0.16 mean power; 20 dB below is sigma = 0.04.
  std::mt19937_64 rng(77);
  std::normal_distribution<double> noise(0.0, 0.04);
  std::uniform_int_distribution<std::size_t> offset(0, 8000 - 205);
  for (const auto& s : KeypadSymbol::all()) {
    const auto tone = encode_digit(s, 1000.0);
    int ok = 0;
    for (int i = 0; i < 200; ++i) {
      const auto at = offset(rng);
      std::vector<double> frame(tone.samples.begin() + static_cast<long>(at), tone.samples.begin() + static_cast<long>(at) + 205);
      for (auto& x : frame) x += noise(rng);
      const auto d = detect_digit(frame, 8000.0, DetectorConfig{});
      ok += d && d->symbol == s;
    }
    EXPECT_GE(ok, 198) << s.symbol();
  }
}

TEST(Stream, RoundTripAllSymbolsAndDurations) {
  for (double ms : {40.0, 50.0, 100.0, 200.0}) {
    for (const auto& s : KeypadSymbol::all()) {
      const auto events = decode_stream(encode_digit(s, ms).samples);
      ASSERT_EQ(events.size(), 1u) << s.symbol() << " " << ms << " ms";
      EXPECT_EQ(events[0].symbol, s);
      EXPECT_GE(events[0].duration, 2u);
      EXPECT_EQ(events[0].start_tick, 0u);
    }
  }
}

TEST(Stream, DigitSequenceWithGaps) {
  const auto x = concat({encode_digit('1', 100).samples, silence_ms(60), encode_digit('5', 100).samples, silence_ms(60),
                         encode_digit('9', 100).samples, silence_ms(60), encode_digit('#', 100).samples});
  EXPECT_EQ(symbols_of(decode_stream(x)), "159#");
}

TEST(Stream, RepeatedDigitNeedsAGap) {
  const auto twice = concat({encode_digit('5', 100).samples, silence_ms(60), encode_digit('5', 100).samples});
  EXPECT_EQ(symbols_of(decode_stream(twice)), "55");
  // Held continuously it is one press.
  EXPECT_EQ(symbols_of(decode_stream(encode_digit('5', 500).samples)), "5");
}

TEST(Stream, ShortBlipIsIgnored) {
  auto blip = encode_digit('3', 40).samples;
  blip.resize(96);  // 12 ms
  EXPECT_TRUE(decode_stream(blip).empty());
  EXPECT_TRUE(decode_stream(concat({silence_ms(50), blip, silence_ms(50)})).empty());
}

TEST(Stream, ChunkingDoesNotChangeEvents) {
  const auto x = concat({silence_ms(23), encode_digit('A', 130).samples, silence_ms(70), encode_digit('0', 90).samples,
                         silence_ms(40), encode_digit('0', 60).samples, silence_ms(11)});
  const auto whole = decode_stream(x);
  ASSERT_EQ(symbols_of(whole), "A00");
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    StreamDecoder dec;
    std::vector<DigitEvent> got;
    std::size_t at = 0;
    while (at < x.size()) {
      const auto n = std::min<std::size_t>(x.size() - at, std::uniform_int_distribution<std::size_t>(1, 700)(rng));
      auto ev = dec.feed(std::span<const double>(x).subspan(at, n));
      got.insert(got.end(), ev.begin(), ev.end());
      at += n;
    }
    auto tail = dec.flush();
    got.insert(got.end(), tail.begin(), tail.end());
    ASSERT_EQ(got.size(), whole.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].symbol, whole[i].symbol);
      EXPECT_EQ(got[i].start_tick, whole[i].start_tick);
      EXPECT_EQ(got[i].duration, whole[i].duration);
    }
  }
}

TEST(Stream, Deterministic) {
  const auto x = concat({encode_digit('C', 70).samples, silence_ms(50), encode_digit('*', 120).samples});
  const auto a = decode_stream(x), b = decode_stream(x);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].symbol, b[i].symbol);
    EXPECT_EQ(a[i].confidence, b[i].confidence);
  }
}

TEST(Stream, EmptyInputHasNoEvents) {
  StreamDecoder dec;
  EXPECT_TRUE(dec.feed({}).empty());
  EXPECT_TRUE(dec.flush().empty());
}

TEST(Pcm, LittleEndianRoundTrip) {
  const std::vector<std::int16_t> pcm{0, 1, -1, 32767, -32768, 0x1234};
  const auto bytes = pcm16_to_le_bytes(pcm);
  ASSERT_EQ(bytes.size(), 12u);
  EXPECT_EQ(bytes[10], 0x34);
  EXPECT_EQ(bytes[11], 0x12);
  EXPECT_EQ(bytes[4], 0xff);
  EXPECT_EQ(bytes[5], 0xff);
  EXPECT_EQ(pcm16_from_le_bytes(bytes), pcm);
  const std::vector<std::uint8_t> odd{1, 2, 3};
  EXPECT_THROW(pcm16_from_le_bytes(odd), std::invalid_argument);
}

TEST(Pcm, QuantizedTonesStillDecode) {
  for (const auto& s : KeypadSymbol::all()) {
    StreamDecoder dec;
    const auto pcm = to_pcm16(encode_digit(s, 100).samples);
    auto ev = dec.feed_pcm16(pcm);
    auto tail = dec.flush();
    ev.insert(ev.end(), tail.begin(), tail.end());
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].symbol, s);
  }
}

TEST(Wav, CanonicalHeaderAndRoundTrip) {
  teleop::wav::Pcm16 pcm{to_pcm16(encode_digit('2', 50).samples), 8000};
  const auto bytes = teleop::wav::encode(pcm);
  ASSERT_EQ(bytes.size(), 44u + 2 * pcm.samples.size());
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "RIFF");
  EXPECT_EQ(std::string(bytes.begin() + 8, bytes.begin() + 16), "WAVEfmt ");
  EXPECT_EQ(std::string(bytes.begin() + 36, bytes.begin() + 40), "data");
  auto u32 = [&](std::size_t at) {
    return std::uint32_t(bytes[at]) | std::uint32_t(bytes[at + 1]) << 8 | std::uint32_t(bytes[at + 2]) << 16 |
           std::uint32_t(bytes[at + 3]) << 24;
  };
  EXPECT_EQ(u32(4), 36u + 2 * pcm.samples.size());
  EXPECT_EQ(u32(16), 16u);
  EXPECT_EQ(bytes[20], 1);  // PCM
  EXPECT_EQ(bytes[22], 1);  // mono
  EXPECT_EQ(u32(24), 8000u);
  EXPECT_EQ(u32(28), 16000u);
  EXPECT_EQ(bytes[32], 2);
  EXPECT_EQ(bytes[34], 16);
  const auto back = teleop::wav::decode(bytes);
  EXPECT_EQ(back.sample_rate, 8000u);
  EXPECT_EQ(back.samples, pcm.samples);
}

TEST(Wav, RejectsNonPcmAndStereo) {
  teleop::wav::Pcm16 pcm{{1, 2, 3, 4}, 8000};
  auto bytes = teleop::wav::encode(pcm);
  auto stereo = bytes;
  stereo[22] = 2;
  EXPECT_THROW(teleop::wav::decode(stereo), std::runtime_error);
  auto floaty = bytes;
  floaty[20] = 3;
  EXPECT_THROW(teleop::wav::decode(floaty), std::runtime_error);
  bytes.resize(20);
  EXPECT_THROW(teleop::wav::decode(bytes), std::runtime_error);
}

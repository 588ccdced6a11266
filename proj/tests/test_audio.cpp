/* Copyright 2026 The jsed Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "jsed/audio.hpp"
#include "jsed/rng.hpp"
#include "test_util.hpp"

namespace jsed {
namespace {

// Builds a PCM WAV byte stream without going through the library writer.
std::vector<std::uint8_t> wav_bytes(const std::vector<std::int32_t>& interleaved, int channels,
                                    int bits, std::uint32_t rate) {
  std::vector<std::uint8_t> b;
  auto put = [&](std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto tag = [&](const char* t) { b.insert(b.end(), t, t + 4); };
  const std::uint32_t data = static_cast<std::uint32_t>(interleaved.size() * bits / 8);
  tag("RIFF");
  put(36 + data, 4);
  tag("WAVE");
  tag("fmt ");
  put(16, 4);
  put(1, 2);
  put(channels, 2);
  put(rate, 4);
  put(rate * channels * bits / 8, 4);
  put(channels * bits / 8, 2);
  put(bits, 2);
  tag("data");
  put(data, 4);
  for (auto s : interleaved) put(static_cast<std::uint32_t>(s), bits / 8);
  return b;
}

TEST(Wav, SilenceOneSecond) {
  const AudioClip c = parse_wav(wav_bytes(std::vector<std::int32_t>(44100, 0), 1, 16, 44100));
  EXPECT_EQ(c.samples.size(), 44100u);
  EXPECT_EQ(c.sample_rate, 44100.0);
  EXPECT_DOUBLE_EQ(c.duration(), 1.0);
  for (double s : c.samples) EXPECT_EQ(s, 0.0);
}

TEST(Wav, StereoOppositeChannelsDownmixToZero) {
  std::vector<std::int32_t> v;
  for (int i = 0; i < 100; ++i) {
    v.push_back(16384);
    v.push_back(-16384);
  }
  const AudioClip c = parse_wav(wav_bytes(v, 2, 16, 8000));
  ASSERT_EQ(c.samples.size(), 100u);
  for (double s : c.samples) EXPECT_EQ(s, 0.0);
}

TEST(Wav, SixteenBitScaling) {
  const AudioClip c = parse_wav(wav_bytes({16384, -32768, 32767}, 1, 16, 8000));
  EXPECT_NEAR(c.samples[0], 0.5, 1.0 / 32768);
  EXPECT_EQ(c.samples[1], -1.0);
  EXPECT_NEAR(c.samples[2], 1.0, 1.0 / 32768);
}

TEST(Wav, TwentyFourBitScaling) {
  const AudioClip c = parse_wav(wav_bytes({1 << 22, -(1 << 23)}, 1, 24, 8000));
  EXPECT_NEAR(c.samples[0], 0.5, 1.0 / (1 << 23));
  EXPECT_EQ(c.samples[1], -1.0);
}

TEST(Wav, RejectsUnsupportedAndTruncated) {
  auto b = wav_bytes({1, 2, 3, 4}, 1, 16, 8000);
  auto truncated = b;
  truncated.resize(truncated.size() - 3);
  EXPECT_THROW(parse_wav(truncated), Error);
  auto eight_bit = wav_bytes({1, 2, 3, 4}, 1, 16, 8000);
  eight_bit[34] = 8;  // bits per sample
  EXPECT_THROW(parse_wav(eight_bit), Error);
  auto float_fmt = b;
  float_fmt[20] = 3;  // IEEE float codec
  EXPECT_THROW(parse_wav(float_fmt), Error);
  EXPECT_THROW(parse_wav({'R', 'I', 'F'}), Error);
}

TEST(Wav, WriteReadRoundTrip) {
  TempDir dir;
  AudioClip c;
  c.sample_rate = 16000;
  for (int i = 0; i < 1000; ++i) c.samples.push_back(0.5 * std::sin(0.01 * i));
  for (int bits : {16, 24}) {
    const auto p = dir.path() / ("x" + std::to_string(bits) + ".wav");
    write_wav(p, c, bits);
    const AudioClip r = read_wav(p);
    ASSERT_EQ(r.samples.size(), c.samples.size());
    EXPECT_EQ(r.sample_rate, 16000.0);
    for (std::size_t i = 0; i < c.samples.size(); ++i) {
      EXPECT_NEAR(r.samples[i], c.samples[i], 1.0 / (1 << (bits - 1)));
    }
  }
  EXPECT_THROW(read_wav(dir.path() / "missing.wav"), Error);
}

AudioClip tone(double freq, double seconds, double rate, double amp = 0.5) {
  AudioClip c;
  c.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  for (std::size_t i = 0; i < n; ++i) {
    c.samples.push_back(amp * std::sin(2 * std::numbers::pi * freq * i / rate));
  }
  return c;
}

TEST(Stft, FrameArithmeticForTenSecondClip) {
  const FrameGeometry g = frame_geometry(441000, 44100, 40, 20);
  EXPECT_EQ(g.frame_samples, 1764u);
  EXPECT_EQ(g.hop_samples, 882u);
  EXPECT_EQ(g.fft_size, 2048u);
  EXPECT_EQ(g.raw_frames, (441000u - 1764u) / 882u + 1u);
  EXPECT_EQ(g.raw_frames, 499u);
  EXPECT_EQ(g.padded_frames, 500u);
}

TEST(Stft, PaddingRepeatsLastFrame) {
  const AudioClip c = tone(1000, 10, 44100);
  const Tensord raw = stft_power(c, 40, 20, false);
  const Tensord padded = stft_power(c, 40, 20, true);
  ASSERT_EQ(raw.shape(), (Shape{1025, 499}));
  ASSERT_EQ(padded.shape(), (Shape{1025, 500}));
  for (std::size_t k = 0; k < 1025; ++k) {
    EXPECT_EQ(padded(k, 499), raw(k, 498));
    EXPECT_EQ(padded(k, 10), raw(k, 10));
  }
}

TEST(Stft, DcConcentratesInBinZero) {
  AudioClip c;
  c.sample_rate = 8000;
  c.samples.assign(4000, 0.25);
  const Tensord p = stft_power(c, 40, 20);
  for (std::size_t t = 0; t < p.dim(1); ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < p.dim(0); ++k) {
      if (p(k, t) > p(best, t)) best = k;
    }
    EXPECT_EQ(best, 0u);
  }
}

TEST(Stft, BinCenteredSinusoidStaysInMainLobe) {
  const double rate = 44100;
  const std::size_t bin = 93;
  const double freq = bin * rate / 2048.0;
  const Tensord p = stft_power(tone(freq, 1, rate), 40, 20);
  for (std::size_t t = 0; t < p.dim(1); ++t) {
    double total = 0, lobe = 0;
    std::size_t peak = 0;
    for (std::size_t k = 0; k < p.dim(0); ++k) {
      total += p(k, t);
      if (p(k, t) > p(peak, t)) peak = k;
      if (k + 2 >= bin && k <= bin + 2) lobe += p(k, t);
    }
    EXPECT_EQ(peak, bin);
    EXPECT_GE(lobe / total, 0.9);
  }
}

TEST(Stft, Errors) {
  AudioClip c;
  c.sample_rate = 44100;
  c.samples.assign(100, 0.0);
  EXPECT_THROW(stft_power(c, 40, 20), Error);
  c.samples.assign(44100, 0.0);
  EXPECT_THROW(stft_power(c, 10, 20), Error);
}

TEST(Mel, HtkFormula) {
  EXPECT_NEAR(hz_to_mel(700), 2595 * std::log10(2.0), 1e-12);
  EXPECT_NEAR(hz_to_mel(700), 781.17, 0.01);
  EXPECT_NEAR(mel_to_hz(hz_to_mel(1234.5)), 1234.5, 1e-9);
}

TEST(Mel, FilterbankShapeAndRows) {
  const Tensord fb = mel_filterbank(1025, 44100, 64);
  ASSERT_EQ(fb.shape(), (Shape{64, 1025}));
  for (std::size_t m = 0; m < 64; ++m) {
    double s = 0;
    for (std::size_t k = 0; k < 1025; ++k) {
      EXPECT_GE(fb(m, k), 0.0);
      s += fb(m, k);
    }
    EXPECT_GT(s, 0.0);
  }
  const auto centers = mel_center_frequencies(44100, 64);
  ASSERT_EQ(centers.size(), 64u);
  EXPECT_GT(centers.front(), 0.0);
  EXPECT_LT(centers.back(), 22050.0);
  for (std::size_t i = 1; i < centers.size(); ++i) EXPECT_GT(centers[i], centers[i - 1]);
  EXPECT_THROW(mel_filterbank(64, 44100, 64), Error);
}

TEST(LogMel, ZeroPowerGivesFloor) {
  const Tensord fb = mel_filterbank(1025, 44100, 64);
  const LogMelSpec s = log_mel(Tensord({1025, 500}), fb, 1e-10);
  ASSERT_EQ(s.values.shape(), (Shape{64, 500}));
  for (float v : s.values.values()) EXPECT_FLOAT_EQ(v, static_cast<float>(std::log(1e-10)));
}

TEST(LogMel, DoublingPowerAddsLnTwo) {
  const Tensord fb = mel_filterbank(1025, 44100, 64);
  Rng rng(3);
  Tensord p({1025, 20});
  for (auto& v : p.values()) v = rng.uniform(0.1, 10.0);
  Tensord p2 = p;
  for (auto& v : p2.values()) v *= 2;
  const LogMelSpec a = log_mel(p, fb), b = log_mel(p2, fb);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    EXPECT_NEAR(b.values[i] - a.values[i], std::log(2.0), 1e-5);
  }
}

TEST(LogMel, ShapeMismatch) {
  EXPECT_THROW(log_mel(Tensord({1000, 5}), mel_filterbank(1025, 44100, 64)), Error);
}

TEST(Features, TenSecondClipIs64By500AndDeterministic) {
  Rng rng(1);
  AudioClip c;
  c.sample_rate = 44100;
  for (int i = 0; i < 441000; ++i) c.samples.push_back(0.1 * rng.normal());
  const FeatureParams fp;
  const LogMelSpec a = extract_log_mel(c, fp), b = extract_log_mel(c, fp);
  EXPECT_EQ(a.bins(), 64u);
  EXPECT_EQ(a.frames(), 500u);
  EXPECT_EQ(a.values, b.values);
}

TEST(Features, FileRoundTripAndCorruption) {
  TempDir dir;
  Tensorf x({3, 4});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.5f * static_cast<float>(i) - 1.0f;
  const auto p = dir.path() / "a.jsfm";
  write_feature_file(p, x);
  EXPECT_EQ(read_feature_file(p), x);
  auto bytes = read_bytes(p);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 5), "JSFM1");
  bytes.pop_back();
  write_bytes(p, bytes);
  EXPECT_THROW(read_feature_file(p), Error);
}

TEST(Standardizer, TrainingStatisticsNormalize) {
  Rng rng(2);
  std::vector<Tensorf> train;
  for (int c = 0; c < 5; ++c) {
    Tensorf x({4, 50});
    for (std::size_t d = 0; d < 4; ++d) {
      for (std::size_t t = 0; t < 50; ++t) {
        x(d, t) = static_cast<float>(10.0 * d + (d + 1) * rng.normal());
      }
    }
    train.push_back(x);
  }
  std::vector<const Tensorf*> ptrs;
  for (const auto& t : train) ptrs.push_back(&t);
  const Standardizer s = Standardizer::fit(ptrs);
  std::vector<double> sum(4), sq(4);
  for (const auto& t : train) {
    const Tensorf y = s.apply(t);
    for (std::size_t d = 0; d < 4; ++d) {
      for (std::size_t k = 0; k < 50; ++k) {
        sum[d] += y(d, k);
        sq[d] += static_cast<double>(y(d, k)) * y(d, k);
      }
    }
  }
  for (std::size_t d = 0; d < 4; ++d) {
    const double mean = sum[d] / 250;
    EXPECT_LT(std::abs(mean), 1e-6);
    EXPECT_NEAR(std::sqrt(sq[d] / 250 - mean * mean), 1.0, 1e-6);
  }
  EXPECT_THROW(s.apply(Tensorf({3, 5})), Error);
}

TEST(Standardizer, ConstantBinKeepsUnitScale) {
  Tensorf x({1, 10}, std::vector<float>(10, 4.0f));
  const Standardizer s = Standardizer::fit({&x});
  const Tensorf y = s.apply(x);
  for (float v : y.values()) EXPECT_EQ(v, 0.0f);
}

}  // namespace
}  // namespace jsed

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

#ifndef JSED_AUDIO_HPP_
#define JSED_AUDIO_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "jsed/tensor.hpp"

namespace jsed {

struct AudioClip {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  double sample_rate = 0.0;     // Hz

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

// PCM WAV, 16- or 24-bit, mono or stereo. Stereo is downmixed by channel
// mean; samples are scaled by 1/2^(bits-1).
AudioClip read_wav(const std::filesystem::path& path);
AudioClip parse_wav(const std::vector<std::uint8_t>& bytes);
void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               int bits_per_sample = 16);

struct FeatureParams {
  double frame_ms = 40.0;
  double hop_ms = 20.0;
  std::size_t n_mels = 64;
  double log_floor = 1e-10;
  // Repeat the last frame until T == floor(num_samples / hop_samples), so
  // one hop per label frame lines up with the target roll.
  bool pad_to_hop_grid = true;
};

struct FrameGeometry {
  std::size_t frame_samples = 0;
  std::size_t hop_samples = 0;
  std::size_t fft_size = 0;
  std::size_t raw_frames = 0;     // floor((n - frame) / hop) + 1
  std::size_t padded_frames = 0;  // floor(n / hop), never below raw_frames
};

FrameGeometry frame_geometry(std::size_t num_samples, double sample_rate,
                             double frame_ms, double hop_ms);

// Hann-windowed |DFT|^2 per frame, FFT size = next power of two >= frame
// length. Result is [fft_size/2 + 1, T].
Tensord stft_power(const AudioClip& clip, double frame_ms, double hop_ms,
                   bool pad_to_hop_grid = true);

double hz_to_mel(double hz);  // HTK: 2595 log10(1 + f/700)
double mel_to_hz(double mel);

// Triangular HTK-mel filters spanning 0 Hz to Nyquist: [n_mels, f_bins].
Tensord mel_filterbank(std::size_t f_bins, double sample_rate,
                       std::size_t n_mels = 64);
// Filter centre frequencies in Hz, one per mel band.
std::vector<double> mel_center_frequencies(double sample_rate,
                                           std::size_t n_mels);

struct LogMelSpec {
  Tensorf values;  // [D, T]
  double frame_ms = 40.0;
  double hop_ms = 20.0;

  std::size_t bins() const { return values.dim(0); }
  std::size_t frames() const { return values.dim(1); }
};

LogMelSpec log_mel(const Tensord& power, const Tensord& filterbank,
                   double log_floor = 1e-10);

LogMelSpec extract_log_mel(const AudioClip& clip, const FeatureParams& params);

// Per-bin standardization; statistics come from the training split only.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(std::vector<double> mean, std::vector<double> stddev);

  static Standardizer fit(const std::vector<const Tensorf*>& features);

  bool empty() const { return mean_.empty(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return stddev_; }
  Tensorf apply(const Tensorf& features) const;

 private:
  std::vector<double> mean_;
  std::vector<double> stddev_;
};

// Feature file: "JSFM1", u32 D, u32 T, u32 dtype (1 = float32), then D*T
// little-endian float32 values in row-major order.
void write_feature_file(const std::filesystem::path& path, const Tensorf& values);
Tensorf read_feature_file(const std::filesystem::path& path);

}  // namespace jsed

#endif  // JSED_AUDIO_HPP_

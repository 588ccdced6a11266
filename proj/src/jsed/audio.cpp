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

#include "jsed/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "jsed/binio.hpp"

namespace jsed {

namespace {

constexpr char kFeatureMagic[5] = {'J', 'S', 'F', 'M', '1'};
constexpr std::uint32_t kDtypeFloat32 = 1;

// FFTW planning is not thread-safe.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::int32_t read_sample(binio::Reader& rd, int bits) {
  if (bits == 16) {
    return static_cast<std::int16_t>(rd.le<std::uint16_t>());
  }
  std::uint8_t b[3];
  rd.bytes(b, 3);
  std::int32_t v = b[0] | (b[1] << 8) | (b[2] << 16);
  if (v & 0x800000) v -= 0x1000000;
  return v;
}

}  // namespace

AudioClip parse_wav(const std::vector<std::uint8_t>& bytes) {
  binio::Reader rd(bytes, "wav");
  char tag[4];
  rd.bytes(tag, 4);
  require(std::string_view(tag, 4) == "RIFF", ErrorCode::kFormat,
          "wav: missing RIFF header");
  rd.le<std::uint32_t>();
  rd.bytes(tag, 4);
  require(std::string_view(tag, 4) == "WAVE", ErrorCode::kFormat,
          "wav: missing WAVE tag");

  int channels = 0;
  int bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (true) {
    rd.bytes(tag, 4);
    const auto size = rd.le<std::uint32_t>();
    const std::string_view id(tag, 4);
    if (id == "fmt ") {
      require(size >= 16, ErrorCode::kFormat, "wav: short fmt chunk");
      const auto format = rd.le<std::uint16_t>();
      channels = rd.le<std::uint16_t>();
      rate = rd.le<std::uint32_t>();
      rd.le<std::uint32_t>();  // byte rate
      rd.le<std::uint16_t>();  // block align
      bits = rd.le<std::uint16_t>();
      std::size_t consumed = 16;
      std::uint16_t sub_format = format;
      if (format == 0xFFFE && size >= 40) {
        rd.le<std::uint16_t>();  // cb size
        rd.le<std::uint16_t>();  // valid bits
        rd.le<std::uint32_t>();  // channel mask
        sub_format = rd.le<std::uint16_t>();
        consumed += 10;
      }
      require(sub_format == 1, ErrorCode::kFormat,
              "wav: unsupported codec " + std::to_string(sub_format) +
                  " (PCM only)");
      require(bits == 16 || bits == 24, ErrorCode::kFormat,
              "wav: unsupported bit depth " + std::to_string(bits));
      require(channels == 1 || channels == 2, ErrorCode::kFormat,
              "wav: unsupported channel count " + std::to_string(channels));
      require(rate > 0, ErrorCode::kFormat, "wav: zero sample rate");
      rd.skip(size - consumed + (size & 1));
      have_fmt = true;
    } else if (id == "data") {
      require(have_fmt, ErrorCode::kFormat, "wav: data chunk before fmt");
      const std::size_t frame_bytes = static_cast<std::size_t>(channels) * bits / 8;
      require(rd.remaining() >= size, ErrorCode::kFormat, "wav: truncated data");
      require(size % frame_bytes == 0, ErrorCode::kFormat,
              "wav: truncated sample frame");
      const std::size_t n = size / frame_bytes;
      const double scale = 1.0 / static_cast<double>(1 << (bits - 1));
      AudioClip clip;
      clip.sample_rate = rate;
      clip.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int c = 0; c < channels; ++c) acc += read_sample(rd, bits) * scale;
        clip.samples[i] = acc / channels;
      }
      return clip;
    } else {
      rd.skip(size + (size & 1));
    }
  }
}

AudioClip read_wav(const std::filesystem::path& path) {
  try {
    return parse_wav(binio::read_file(path));
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               int bits_per_sample) {
  require(bits_per_sample == 16 || bits_per_sample == 24,
          ErrorCode::kInvalidArgument, "write_wav: bits must be 16 or 24");
  const std::uint32_t bytes_per_sample = bits_per_sample / 8;
  const auto data_size =
      static_cast<std::uint32_t>(clip.samples.size() * bytes_per_sample);
  const auto rate = static_cast<std::uint32_t>(std::lround(clip.sample_rate));
  binio::Writer w;
  w.bytes("RIFF", 4);
  w.le<std::uint32_t>(36 + data_size);
  w.bytes("WAVEfmt ", 8);
  w.le<std::uint32_t>(16);
  w.le<std::uint16_t>(1);
  w.le<std::uint16_t>(1);
  w.le<std::uint32_t>(rate);
  w.le<std::uint32_t>(rate * bytes_per_sample);
  w.le<std::uint16_t>(static_cast<std::uint16_t>(bytes_per_sample));
  w.le<std::uint16_t>(static_cast<std::uint16_t>(bits_per_sample));
  w.bytes("data", 4);
  w.le<std::uint32_t>(data_size);
  const double full = static_cast<double>(1 << (bits_per_sample - 1));
  for (double x : clip.samples) {
    auto v = static_cast<std::int64_t>(std::lround(x * full));
    v = std::clamp<std::int64_t>(v, -static_cast<std::int64_t>(full),
                                 static_cast<std::int64_t>(full) - 1);
    const auto u = static_cast<std::uint32_t>(v);
    if (bits_per_sample == 16) {
      w.le<std::uint16_t>(static_cast<std::uint16_t>(u));
    } else {
      w.le<std::uint8_t>(static_cast<std::uint8_t>(u));
      w.le<std::uint8_t>(static_cast<std::uint8_t>(u >> 8));
      w.le<std::uint8_t>(static_cast<std::uint8_t>(u >> 16));
    }
  }
  w.save(path);
}

FrameGeometry frame_geometry(std::size_t num_samples, double sample_rate,
                             double frame_ms, double hop_ms) {
  require(sample_rate > 0, ErrorCode::kInvalidArgument, "sample rate must be > 0");
  require(hop_ms > 0 && frame_ms >= hop_ms, ErrorCode::kInvalidArgument,
          "frame length must be >= hop length > 0");
  FrameGeometry g;
  g.frame_samples =
      static_cast<std::size_t>(std::lround(sample_rate * frame_ms / 1000.0));
  g.hop_samples =
      static_cast<std::size_t>(std::lround(sample_rate * hop_ms / 1000.0));
  require(g.hop_samples > 0, ErrorCode::kInvalidArgument, "hop is below one sample");
  g.fft_size = next_pow2(g.frame_samples);
  require(num_samples >= g.frame_samples, ErrorCode::kInvalidArgument,
          "clip shorter than one frame");
  g.raw_frames = (num_samples - g.frame_samples) / g.hop_samples + 1;
  g.padded_frames = std::max(g.raw_frames, num_samples / g.hop_samples);
  return g;
}

Tensord stft_power(const AudioClip& clip, double frame_ms, double hop_ms,
                   bool pad_to_hop_grid) {
  const auto g =
      frame_geometry(clip.samples.size(), clip.sample_rate, frame_ms, hop_ms);
  const std::size_t bins = g.fft_size / 2 + 1;
  const std::size_t frames = pad_to_hop_grid ? g.padded_frames : g.raw_frames;

  // Periodic Hann.
  std::vector<double> window(g.frame_samples);
  for (std::size_t i = 0; i < g.frame_samples; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i /
                                     static_cast<double>(g.frame_samples));
  }

  double* in = fftw_alloc_real(g.fft_size);
  fftw_complex* out = fftw_alloc_complex(bins);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(g.fft_size), in, out,
                                FFTW_ESTIMATE);
  }

  Tensord power({bins, frames});
  for (std::size_t t = 0; t < g.raw_frames; ++t) {
    const double* src = clip.samples.data() + t * g.hop_samples;
    for (std::size_t i = 0; i < g.frame_samples; ++i) in[i] = src[i] * window[i];
    for (std::size_t i = g.frame_samples; i < g.fft_size; ++i) in[i] = 0.0;
    fftw_execute(plan);
    for (std::size_t k = 0; k < bins; ++k) {
      power(k, t) = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    }
  }
  for (std::size_t t = g.raw_frames; t < frames; ++t) {
    for (std::size_t k = 0; k < bins; ++k) power(k, t) = power(k, g.raw_frames - 1);
  }

  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  check_finite(power, "stft_power");
  return power;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_center_frequencies(double sample_rate, std::size_t n_mels) {
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> centers(n_mels);
  for (std::size_t m = 0; m < n_mels; ++m) {
    centers[m] = mel_to_hz(top * static_cast<double>(m + 1) /
                           static_cast<double>(n_mels + 1));
  }
  return centers;
}

Tensord mel_filterbank(std::size_t f_bins, double sample_rate, std::size_t n_mels) {
  require(f_bins >= 2 && n_mels < f_bins, ErrorCode::kInvalidArgument,
          "mel_filterbank needs n_mels < f_bins");
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  const double bin_hz = (sample_rate / 2.0) / static_cast<double>(f_bins - 1);
  Tensord fb({n_mels, f_bins});
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m];
    const double mid = edges[m + 1];
    const double hi = edges[m + 2];
    for (std::size_t k = 0; k < f_bins; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      double w = 0.0;
      if (f > lo && f <= mid) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      fb(m, k) = w;
    }
  }
  return fb;
}

LogMelSpec log_mel(const Tensord& power, const Tensord& filterbank,
                   double log_floor) {
  require(power.rank() == 2 && filterbank.rank() == 2 &&
              filterbank.dim(1) == power.dim(0),
          ErrorCode::kShape,
          "log_mel: filterbank " + shape_string(filterbank.shape()) +
              " does not conform to power " + shape_string(power.shape()));
  const Tensord mel = matmul(filterbank, power);
  LogMelSpec spec;
  spec.values = Tensorf(mel.shape());
  for (std::size_t i = 0; i < mel.size(); ++i) {
    spec.values[i] = static_cast<float>(std::log(mel[i] + log_floor));
  }
  return spec;
}

LogMelSpec extract_log_mel(const AudioClip& clip, const FeatureParams& params) {
  require(clip.sample_rate > 0, ErrorCode::kInvalidArgument,
          "clip sample rate must be > 0");
  const Tensord power =
      stft_power(clip, params.frame_ms, params.hop_ms, params.pad_to_hop_grid);
  const Tensord fb = mel_filterbank(power.dim(0), clip.sample_rate, params.n_mels);
  LogMelSpec spec = log_mel(power, fb, params.log_floor);
  spec.frame_ms = params.frame_ms;
  spec.hop_ms = params.hop_ms;
  return spec;
}

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> stddev)
    : mean_(std::move(mean)), stddev_(std::move(stddev)) {
  require(mean_.size() == stddev_.size(), ErrorCode::kShape,
          "standardizer mean/std length mismatch");
}

Standardizer Standardizer::fit(const std::vector<const Tensorf*>& features) {
  require(!features.empty(), ErrorCode::kInvalidArgument,
          "standardizer needs at least one feature map");
  const std::size_t bins = features.front()->dim(0);
  std::vector<double> sum(bins, 0.0);
  std::vector<double> count(bins, 0.0);
  for (const Tensorf* f : features) {
    require(f->rank() == 2 && f->dim(0) == bins, ErrorCode::kShape,
            "standardizer: inconsistent feature bins");
    for (std::size_t d = 0; d < bins; ++d) {
      for (std::size_t t = 0; t < f->dim(1); ++t) sum[d] += (*f)(d, t);
      count[d] += static_cast<double>(f->dim(1));
    }
  }
  std::vector<double> mean(bins);
  for (std::size_t d = 0; d < bins; ++d) mean[d] = sum[d] / count[d];
  std::vector<double> sq(bins, 0.0);
  for (const Tensorf* f : features) {
    for (std::size_t d = 0; d < bins; ++d) {
      for (std::size_t t = 0; t < f->dim(1); ++t) {
        const double c = (*f)(d, t) - mean[d];
        sq[d] += c * c;
      }
    }
  }
  std::vector<double> stddev(bins);
  for (std::size_t d = 0; d < bins; ++d) {
    const double s = std::sqrt(sq[d] / count[d]);
    stddev[d] = s > 0.0 ? s : 1.0;
  }
  return Standardizer(std::move(mean), std::move(stddev));
}

Tensorf Standardizer::apply(const Tensorf& features) const {
  require(features.rank() == 2 && features.dim(0) == mean_.size(),
          ErrorCode::kShape, "standardizer: feature bins do not match statistics");
  Tensorf out(features.shape());
  for (std::size_t d = 0; d < features.dim(0); ++d) {
    for (std::size_t t = 0; t < features.dim(1); ++t) {
      out(d, t) = static_cast<float>((features(d, t) - mean_[d]) / stddev_[d]);
    }
  }
  return out;
}

void write_feature_file(const std::filesystem::path& path, const Tensorf& values) {
  require(values.rank() == 2, ErrorCode::kShape, "feature map must be rank 2");
  binio::Writer w;
  w.bytes(kFeatureMagic, 5);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(values.dim(0)));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(values.dim(1)));
  w.le<std::uint32_t>(kDtypeFloat32);
  for (float v : values.values()) w.f32(v);
  w.save(path);
}

Tensorf read_feature_file(const std::filesystem::path& path) {
  const auto bytes = binio::read_file(path);
  binio::Reader rd(bytes, path.string());
  char magic[5];
  rd.bytes(magic, 5);
  require(std::equal(magic, magic + 5, kFeatureMagic), ErrorCode::kFormat,
          path.string() + ": not a JSFM1 feature file");
  const std::size_t d = rd.le<std::uint32_t>();
  const std::size_t t = rd.le<std::uint32_t>();
  const auto dtype = rd.le<std::uint32_t>();
  require(dtype == kDtypeFloat32, ErrorCode::kFormat,
          path.string() + ": unsupported dtype " + std::to_string(dtype));
  require(rd.remaining() == d * t * 4, ErrorCode::kFormat,
          path.string() + ": payload size does not match header");
  Tensorf out({d, t});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = rd.f32();
  return out;
}

}  // namespace jsed

// core/src/audio.cpp
//
// Copyright 2026  The punct Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "punct/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>

#include "json.hpp"
#include "punct/errors.hpp"
#include "punct/io.hpp"

namespace punct {

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::uint16_t read_u16(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t read_u32(std::string_view b, std::size_t at) {
  return static_cast<std::uint32_t>(read_u16(b, at)) | (static_cast<std::uint32_t>(read_u16(b, at + 2)) << 16);
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  put_u16(out, static_cast<std::uint16_t>(v & 0xffff));
  put_u16(out, static_cast<std::uint16_t>(v >> 16));
}

double hann(std::size_t n, std::size_t length) {
  if (length == 1) return 1.0;
  return 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(length - 1));
}

// RBJ band-pass biquad, constant 0 dB peak gain.
struct Biquad {
  double b0, b1, b2, a1, a2;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;

  Biquad(double center_hz, double q, double sample_rate) {
    const double w0 = 2.0 * std::numbers::pi * center_hz / sample_rate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    b0 = alpha / a0;
    b1 = 0.0;
    b2 = -alpha / a0;
    a1 = -2.0 * std::cos(w0) / a0;
    a2 = (1.0 - alpha) / a0;
  }

  double operator()(double x) {
    const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return y;
  }
};

}  // namespace

void AudioBuffer::validate() const {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw ValidationError("audio sample_rate must be positive");
  for (double s : samples)
    if (!std::isfinite(s)) throw ValidationError("audio contains non-finite samples");
}

bool Spectrogram::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double token_midpoint(const Utterance& utt, std::size_t t) {
  if (!utt.alignments) throw ValidationError("utterance '" + utt.source_id + "' has no alignments");
  if (t >= utt.alignments->size())
    throw ValidationError("token " + std::to_string(t) + " has no alignment in '" + utt.source_id + "'");
  const Alignment& a = (*utt.alignments)[t];
  return (a.start_sec + a.end_sec) / 2.0;
}

std::size_t window_samples(double sample_rate, double sec) {
  return static_cast<std::size_t>(std::llround(sec * sample_rate));
}

AudioBuffer extract_audio_window(const AudioBuffer& audio, double midpoint_sec, double half_width_sec) {
  if (!(half_width_sec > 0.0)) throw ValidationError("audio window half-width must be positive");
  const std::size_t n = window_samples(audio.sample_rate, 2.0 * half_width_sec);
  AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  out.samples.assign(n, 0.0);
  const auto start = std::llround((midpoint_sec - half_width_sec) * audio.sample_rate);
  const auto total = static_cast<long long>(audio.samples.size());
  for (std::size_t i = 0; i < n; ++i) {
    const long long src = start + static_cast<long long>(i);
    if (src >= 0 && src < total) out.samples[i] = audio.samples[static_cast<std::size_t>(src)];
  }
  return out;
}

std::size_t stft_frame_count(std::size_t n_samples, double sample_rate, const StftOptions& options) {
  const std::size_t win = window_samples(sample_rate, options.win_sec);
  const std::size_t hop = window_samples(sample_rate, options.hop_sec);
  if (win == 0 || hop == 0) throw ValidationError("stft window and hop must be at least one sample");
  if (n_samples < win) return 0;
  return 1 + (n_samples - win) / hop;
}

StftFrames stft(const AudioBuffer& audio, const StftOptions& options) {
  audio.validate();
  const std::size_t win = window_samples(audio.sample_rate, options.win_sec);
  const std::size_t hop = window_samples(audio.sample_rate, options.hop_sec);
  if (win == 0 || hop == 0) throw ValidationError("stft window and hop must be at least one sample");
  if (options.n_fft < win)
    throw ValidationError("n_fft " + std::to_string(options.n_fft) + " is shorter than the window (" +
                          std::to_string(win) + " samples)");
  if (audio.samples.size() < win)
    throw ValidationError("audio of " + std::to_string(audio.samples.size()) + " samples is shorter than one " +
                          std::to_string(win) + "-sample window");

  StftFrames out;
  out.n_fft = options.n_fft;
  out.bins = options.n_fft / 2 + 1;
  out.frames = stft_frame_count(audio.samples.size(), audio.sample_rate, options);
  out.sample_rate = audio.sample_rate;
  out.hop_sec = static_cast<double>(hop) / audio.sample_rate;
  out.values.resize(out.frames * out.bins);

  std::vector<double> window(win);
  for (std::size_t n = 0; n < win; ++n) window[n] = hann(n, win);

  double* in = fftw_alloc_real(options.n_fft);
  fftw_complex* spectrum = fftw_alloc_complex(out.bins);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(options.n_fft), in, spectrum, FFTW_ESTIMATE);
  }
  for (std::size_t f = 0; f < out.frames; ++f) {
    const double* seg = audio.samples.data() + f * hop;
    for (std::size_t n = 0; n < win; ++n) in[n] = seg[n] * window[n];
    std::fill(in + win, in + options.n_fft, 0.0);
    fftw_execute(plan);
    for (std::size_t k = 0; k < out.bins; ++k) out.values[f * out.bins + k] = {spectrum[k][0], spectrum[k][1]};
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(spectrum);
  fftw_free(in);
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_edges_hz(std::size_t n_mels, double sample_rate) {
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  return edges;
}

}  // namespace

std::vector<double> mel_center_frequencies(std::size_t n_mels, double sample_rate) {
  auto edges = mel_edges_hz(n_mels, sample_rate);
  return {edges.begin() + 1, edges.end() - 1};
}

std::vector<double> mel_filterbank(std::size_t n_mels, std::size_t n_fft, double sample_rate) {
  const std::size_t bins = n_fft / 2 + 1;
  if (n_mels < 2) throw ValidationError("n_mels must be at least 2");
  if (n_mels > bins)
    throw ValidationError("n_mels " + std::to_string(n_mels) + " exceeds the " + std::to_string(bins) + " FFT bins");
  const auto edges = mel_edges_hz(n_mels, sample_rate);
  std::vector<double> bank(n_mels * bins, 0.0);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    double row_sum = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
      double w = 0.0;
      if (f > lo && f <= mid)
        w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi)
        w = (hi - f) / (hi - mid);
      bank[m * bins + k] = w;
      row_sum += w;
    }
    if (!(row_sum > 0.0))
      throw ValidationError("mel filter " + std::to_string(m) + " covers no FFT bin; reduce n_mels or raise n_fft");
  }
  return bank;
}

Spectrogram log_mel(const StftFrames& frames, std::size_t n_mels) {
  const auto bank = mel_filterbank(n_mels, frames.n_fft, frames.sample_rate);
  Spectrogram out;
  out.frames = frames.frames;
  out.n_mels = n_mels;
  out.frame_hop_sec = frames.hop_sec;
  out.values.assign(frames.frames * n_mels, 0.0);
  std::vector<double> power(frames.bins);
  for (std::size_t f = 0; f < frames.frames; ++f) {
    for (std::size_t k = 0; k < frames.bins; ++k) power[k] = std::norm(frames.at(f, k));
    for (std::size_t m = 0; m < n_mels; ++m) {
      const double* row = bank.data() + m * frames.bins;
      double e = 0.0;
      for (std::size_t k = 0; k < frames.bins; ++k) e += row[k] * power[k];
      out.values[f * n_mels + m] = std::log(e + kLogFloor);
    }
  }
  return out;
}

std::size_t AudioFeatureConfig::frame_count(double sample_rate) const {
  return stft_frame_count(window_samples(sample_rate, 2.0 * half_width_sec), sample_rate, stft);
}

Spectrogram token_spectrogram(const AudioBuffer& audio, double midpoint_sec, const AudioFeatureConfig& config) {
  return log_mel(stft(extract_audio_window(audio, midpoint_sec, config.half_width_sec), config.stft), config.n_mels);
}

Spectrogram normalize_log_mel(Spectrogram spec) {
  const double floor = std::log(kLogFloor);
  for (double& v : spec.values) v = (v - floor) / 10.0;
  return spec;
}

AudioBuffer parse_wav(std::string_view b) {
  if (b.size() < 12 || b.substr(0, 4) != "RIFF" || b.substr(8, 4) != "WAVE")
    throw CorruptFileError("not a RIFF/WAVE file");
  std::size_t at = 12;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (at + 8 <= b.size()) {
    const std::string_view id = b.substr(at, 4);
    const std::uint32_t size = read_u32(b, at + 4);
    const std::size_t body = at + 8;
    if (body + size > b.size()) throw CorruptFileError("WAV chunk '" + std::string(id) + "' is truncated");
    if (id == "fmt ") {
      if (size < 16) throw CorruptFileError("WAV fmt chunk too short");
      format = read_u16(b, body);
      channels = read_u16(b, body + 2);
      rate = read_u32(b, body + 4);
      bits = read_u16(b, body + 14);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw CorruptFileError("WAV data chunk precedes fmt chunk");
      if (format != 1 || bits != 16) throw DataError("only PCM16 WAV is supported");
      if (channels == 0 || rate == 0) throw CorruptFileError("WAV has zero channels or sample rate");
      const std::size_t frame_bytes = 2u * channels;
      const std::size_t n = size / frame_bytes;
      AudioBuffer out;
      out.sample_rate = rate;
      out.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c)
          acc += static_cast<std::int16_t>(read_u16(b, body + i * frame_bytes + 2 * c)) / 32768.0;
        out.samples[i] = acc / channels;
      }
      return out;
    }
    at = body + size + (size & 1u);
  }
  throw CorruptFileError("WAV has no data chunk");
}

AudioBuffer read_wav(const std::filesystem::path& path) {
  try {
    return parse_wav(read_file(path));
  } catch (const CorruptFileError& e) {
    throw CorruptFileError(path.string() + ": " + e.what());
  }
}

std::string encode_wav(const AudioBuffer& audio) {
  audio.validate();
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));
  std::string out = "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : audio.samples) {
    const long q = std::clamp(std::lround(s * 32768.0), -32768L, 32767L);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
  write_file_atomic(path, encode_wav(audio));
}

double SynthProfile::pause_after(PunctClass label) const {
  switch (label) {
    case PunctClass::Comma: return pause_comma_sec;
    case PunctClass::Period: return pause_period_sec;
    case PunctClass::Question: return pause_question_sec;
    case PunctClass::None: return pause_none_sec;
  }
  return pause_none_sec;
}

SynthResult synth_speechlike(const Utterance& utt, const SynthProfile& profile, Rng& rng) {
  if (utt.labels.size() != utt.tokens.size()) throw ValidationError("utterance labels do not match tokens");
  const double sr = profile.sample_rate;
  const std::size_t token_n = window_samples(sr, profile.token_sec);
  const std::size_t fade_n = std::min(window_samples(sr, profile.fade_sec), token_n / 2);

  SynthResult out;
  out.audio.sample_rate = sr;
  Biquad band(1200.0, 0.8, sr);
  std::size_t cursor = 0;
  for (std::size_t t = 0; t < utt.size(); ++t) {
    const double pitch = profile.base_pitch_hz * (1.0 + 0.08 * static_cast<double>(utt.tokens[t] % 8));
    const bool rising = utt.labels[t] == PunctClass::Question;
    double phase = 0.0;
    out.audio.samples.resize(cursor + token_n, 0.0);
    for (std::size_t i = 0; i < token_n; ++i) {
      const double progress = static_cast<double>(i) / static_cast<double>(token_n);
      const double f = rising ? pitch * (1.0 + (profile.question_rise - 1.0) * progress) : pitch;
      phase += 2.0 * std::numbers::pi * f / sr;
      double env = 1.0;
      if (i < fade_n) env = static_cast<double>(i) / static_cast<double>(fade_n);
      if (token_n - i <= fade_n) env = std::min(env, static_cast<double>(token_n - i) / static_cast<double>(fade_n));
      const double noise = band(rng.normal());
      const double s = env * (profile.noise_amplitude * noise + profile.tone_amplitude * std::sin(phase));
      out.audio.samples[cursor + i] = std::clamp(s, -1.0, 1.0);
    }
    const double start = static_cast<double>(cursor) / sr;
    cursor += token_n;
    out.alignments.push_back({start, static_cast<double>(cursor) / sr});
    cursor += window_samples(sr, profile.pause_after(utt.labels[t]));
    out.audio.samples.resize(cursor, 0.0);
  }
  return out;
}

void write_feature_cache(const std::filesystem::path& path, std::span<const FeatureCacheEntry> entries,
                         const AudioFeatureConfig& config, double sample_rate) {
  std::string blob;
  nlohmann::json index = nlohmann::json::array();
  for (const auto& e : entries) {
    const auto& s = e.spectrogram;
    if (s.n_mels != config.n_mels || s.values.size() != s.frames * s.n_mels)
      throw DimensionError("feature cache entry '" + e.key + "' does not have " + std::to_string(config.n_mels) +
                           " mel bins");
    index.push_back({{"key", e.key}, {"frames", s.frames}});
    for (double v : s.values) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
      char raw[8];
      std::memcpy(raw, &bits, 8);
      blob.append(raw, 8);
    }
  }
  nlohmann::json sidecar = {
      {"dtype", "float64"},
      {"byte_order", "little"},
      {"layout", "entries of frames x n_mels, row-major, concatenated"},
      {"n_mels", config.n_mels},
      {"entries", index},
      {"checksum", hex64(fnv1a64(blob))},
      {"params",
       {{"sample_rate", sample_rate},
        {"half_width_sec", config.half_width_sec},
        {"win_sec", config.stft.win_sec},
        {"hop_sec", config.stft.hop_sec},
        {"n_fft", config.stft.n_fft},
        {"n_mels", config.n_mels}}},
  };
  write_file_atomic(path, blob);
  write_file_atomic(path.string() + ".json", sidecar.dump(2) + "\n");
}

FeatureCache read_feature_cache(const std::filesystem::path& path) {
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(read_file(path.string() + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(path.string() + ".json: " + e.what());
  }
  const std::string blob = read_file(path);
  try {
    FeatureCache cache;
    const auto& params = sidecar.at("params");
    cache.sample_rate = params.at("sample_rate").get<double>();
    cache.config.half_width_sec = params.at("half_width_sec").get<double>();
    cache.config.stft.win_sec = params.at("win_sec").get<double>();
    cache.config.stft.hop_sec = params.at("hop_sec").get<double>();
    cache.config.stft.n_fft = params.at("n_fft").get<std::size_t>();
    cache.config.n_mels = params.at("n_mels").get<std::size_t>();
    const std::size_t mels = sidecar.at("n_mels").get<std::size_t>();
    const double hop = static_cast<double>(window_samples(cache.sample_rate, cache.config.stft.hop_sec)) /
                       cache.sample_rate;
    std::size_t expected = 0;
    for (const auto& e : sidecar.at("entries")) expected += e.at("frames").get<std::size_t>() * mels * 8;
    if (blob.size() != expected)
      throw CorruptFileError("feature cache " + path.string() + " has " + std::to_string(blob.size()) +
                             " bytes, sidecar expects " + std::to_string(expected));
    if (sidecar.at("checksum").get<std::string>() != hex64(fnv1a64(blob)))
      throw CorruptFileError("feature cache " + path.string() + " checksum mismatch");
    std::size_t at = 0;
    for (const auto& e : sidecar.at("entries")) {
      FeatureCacheEntry entry;
      entry.key = e.at("key").get<std::string>();
      auto& s = entry.spectrogram;
      s.frames = e.at("frames").get<std::size_t>();
      s.n_mels = mels;
      s.frame_hop_sec = hop;
      s.values.resize(s.frames * mels);
      for (double& v : s.values) {
        std::uint64_t bits;
        std::memcpy(&bits, blob.data() + at, 8);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        v = std::bit_cast<double>(bits);
        at += 8;
      }
      cache.entries.push_back(std::move(entry));
    }
    return cache;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(path.string() + ".json: " + e.what());
  }
}

}  // namespace punct

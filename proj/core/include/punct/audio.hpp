// core/include/punct/audio.hpp
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

#pragma once

// Audio side of the pipeline: token-centred clips, STFT, log-mel features,
// WAV and feature-cache I/O, and a speech-like synthesizer for paired test data.

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "punct/rng.hpp"
#include "punct/text.hpp"

namespace punct {

inline constexpr double kDefaultSampleRate = 16000.0;
// Added to mel energies before the log.
inline constexpr double kLogFloor = 1e-10;

struct AudioBuffer {
  std::vector<double> samples;
  double sample_rate = kDefaultSampleRate;

  void validate() const;
  double duration_sec() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct StftOptions {
  double win_sec = 0.025;
  double hop_sec = 0.010;
  std::size_t n_fft = 512;

  friend bool operator==(const StftOptions&, const StftOptions&) = default;
};

struct StftFrames {
  std::size_t frames = 0;
  std::size_t bins = 0;  // n_fft / 2 + 1
  std::size_t n_fft = 0;
  double sample_rate = kDefaultSampleRate;
  double hop_sec = 0.0;
  std::vector<std::complex<double>> values;  // frames x bins

  std::complex<double> at(std::size_t frame, std::size_t bin) const { return values[frame * bins + bin]; }
};

struct Spectrogram {
  std::size_t frames = 0;
  std::size_t n_mels = 0;
  double frame_hop_sec = 0.0;
  std::vector<double> values;  // frames x n_mels, natural log scale

  double at(std::size_t frame, std::size_t mel) const { return values[frame * n_mels + mel]; }
  bool all_finite() const;
};

// (start + end) / 2 of token t. Throws ValidationError without alignments.
double token_midpoint(const Utterance& utt, std::size_t t);

// Exactly round(2 * half_width * sample_rate) samples centred on `midpoint`;
// anything outside the recording is zero.
AudioBuffer extract_audio_window(const AudioBuffer& audio, double midpoint_sec, double half_width_sec = 1.0);

std::size_t window_samples(double sample_rate, double sec);
std::size_t stft_frame_count(std::size_t n_samples, double sample_rate, const StftOptions& options);

// Hann-windowed frames zero-padded to n_fft; bins 0..n_fft/2.
StftFrames stft(const AudioBuffer& audio, const StftOptions& options = {});

double hz_to_mel(double hz);
double mel_to_hz(double mel);
// Triangular filters between 0 Hz and Nyquist, n_mels x (n_fft / 2 + 1).
std::vector<double> mel_filterbank(std::size_t n_mels, std::size_t n_fft, double sample_rate);
std::vector<double> mel_center_frequencies(std::size_t n_mels, double sample_rate);

// ln(filterbank * |X|^2 + kLogFloor).
Spectrogram log_mel(const StftFrames& frames, std::size_t n_mels = 40);

struct AudioFeatureConfig {
  double half_width_sec = 1.0;
  StftOptions stft;
  std::size_t n_mels = 40;

  std::size_t frame_count(double sample_rate) const;

  friend bool operator==(const AudioFeatureConfig&, const AudioFeatureConfig&) = default;
};

Spectrogram token_spectrogram(const AudioBuffer& audio, double midpoint_sec, const AudioFeatureConfig& config);

// Shifts the log floor to zero and scales to roughly unit range before the
// spectrogram is fed to the audio encoder.
Spectrogram normalize_log_mel(Spectrogram spec);

// PCM16; stereo input is averaged to mono.
AudioBuffer read_wav(const std::filesystem::path& path);
AudioBuffer parse_wav(std::string_view bytes);
std::string encode_wav(const AudioBuffer& audio);
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);

struct SynthProfile {
  double sample_rate = kDefaultSampleRate;
  double token_sec = 0.2;
  double pause_none_sec = 0.030;
  double pause_comma_sec = 0.200;
  double pause_period_sec = 0.400;
  double pause_question_sec = 0.400;
  double noise_amplitude = 0.25;
  double tone_amplitude = 0.2;
  double base_pitch_hz = 140.0;
  // Pitch multiplier reached at the end of a question-final token.
  double question_rise = 1.6;
  double fade_sec = 0.005;

  double pause_after(PunctClass label) const;
};

struct SynthResult {
  AudioBuffer audio;
  std::vector<Alignment> alignments;
};

// Each token is a band-limited noise burst plus a tone whose pitch depends on
// the token id, followed by silence whose length depends on the token's label.
SynthResult synth_speechlike(const Utterance& utt, const SynthProfile& profile, Rng& rng);

// Flat little-endian float64 file plus a JSON sidecar (path + ".json")
// recording per-entry frame counts, keys, and feature parameters. Entries
// share n_mels but may differ in length.
struct FeatureCacheEntry {
  std::string key;
  Spectrogram spectrogram;
};

struct FeatureCache {
  AudioFeatureConfig config;
  double sample_rate = kDefaultSampleRate;
  std::vector<FeatureCacheEntry> entries;
};

void write_feature_cache(const std::filesystem::path& path, std::span<const FeatureCacheEntry> entries,
                         const AudioFeatureConfig& config, double sample_rate);
FeatureCache read_feature_cache(const std::filesystem::path& path);

}  // namespace punct

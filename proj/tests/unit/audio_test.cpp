// tests/unit/audio_test.cpp
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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <unistd.h>

#include "punct/audio.hpp"
#include "punct/errors.hpp"
#include "punct/io.hpp"

namespace punct {
namespace {

AudioBuffer sine(double hz, std::size_t n, double sr = 16000.0, double amp = 0.5) {
  AudioBuffer a;
  a.sample_rate = sr;
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) a.samples[i] = amp * std::sin(2 * std::numbers::pi * hz * i / sr);
  return a;
}

// O(n^2) transform of one Hann-windowed segment, zero-padded to n_fft.
std::vector<std::complex<double>> naive_dft(const std::vector<double>& x, std::size_t start, std::size_t win,
                                            std::size_t n_fft) {
  std::vector<std::complex<double>> out(n_fft / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::complex<double> acc = 0;
    for (std::size_t n = 0; n < win; ++n) {
      const double w = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * n / (win - 1));
      acc += w * x[start + n] * std::polar(1.0, -2 * std::numbers::pi * double(k * n % n_fft) / n_fft);
    }
    out[k] = acc;
  }
  return out;
}

Utterance aligned(std::vector<Alignment> al) {
  Utterance u;
  u.source_id = "fixture";
  for (std::size_t i = 0; i < al.size(); ++i) {
    u.tokens.push_back(static_cast<TokenId>(Vocab::kNumReserved + i));
    u.labels.push_back(PunctClass::None);
  }
  u.alignments = std::move(al);
  return u;
}

TEST(TokenMidpoint, Examples) {
  EXPECT_DOUBLE_EQ(token_midpoint(aligned({{1.0, 2.0}}), 0), 1.5);
  EXPECT_DOUBLE_EQ(token_midpoint(aligned({{0.0, 0.0}}), 0), 0.0);
  const Utterance five = aligned({{0.0, 0.3}, {0.3, 0.5}, {0.6, 1.2}, {1.25, 1.45}, {2.0, 3.0}});
  const double expected[] = {0.15, 0.4, 0.9, 1.35, 2.5};
  for (std::size_t t = 0; t < 5; ++t) EXPECT_NEAR(token_midpoint(five, t), expected[t], 1e-15);
  Utterance none = five;
  none.alignments.reset();
  EXPECT_THROW(token_midpoint(none, 0), ValidationError);
}

TEST(ExtractAudioWindow, CenterSliceAndBoundaries) {
  AudioBuffer a;
  a.samples.resize(100000);
  for (std::size_t i = 0; i < a.samples.size(); ++i) a.samples[i] = 0.5 + 1e-6 * static_cast<double>(i);
  auto mid = extract_audio_window(a, a.duration_sec() / 2, 1.0);
  ASSERT_EQ(mid.samples.size(), 32000u);
  EXPECT_TRUE(std::none_of(mid.samples.begin(), mid.samples.end(), [](double s) { return s == 0.0; }));
  EXPECT_EQ(mid.samples.front(), a.samples[50000 - 16000]);

  auto left = extract_audio_window(a, 0.0, 1.0);
  ASSERT_EQ(left.samples.size(), 32000u);
  for (std::size_t i = 0; i < 16000; ++i) ASSERT_EQ(left.samples[i], 0.0);
  EXPECT_EQ(left.samples[16000], a.samples[0]);

  auto outside = extract_audio_window(a, 1000.0, 1.0);
  EXPECT_TRUE(std::all_of(outside.samples.begin(), outside.samples.end(), [](double s) { return s == 0.0; }));
}

TEST(ExtractAudioWindow, LengthIndependentOfMidpoint) {
  AudioBuffer a = sine(300, 24000);
  Rng rng(9);
  for (double ca : {0.25, 0.5, 1.0, 1.3}) {
    const std::size_t n = static_cast<std::size_t>(std::llround(2 * ca * 16000));
    for (int i = 0; i < 50; ++i) ASSERT_EQ(extract_audio_window(a, rng.uniform(-3, 5), ca).samples.size(), n);
  }
  EXPECT_THROW(extract_audio_window(a, 0.5, 0.0), ValidationError);
}

TEST(Stft, SineHasPeakAtNearestBin) {
  auto frames = stft(sine(1000, 8000));
  const std::size_t nearest = static_cast<std::size_t>(std::lround(1000.0 * 512 / 16000));
  for (std::size_t f = 0; f < frames.frames; ++f) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < frames.bins; ++k)
      if (std::abs(frames.at(f, k)) > std::abs(frames.at(f, best))) best = k;
    ASSERT_EQ(best, nearest) << "frame " << f;
  }
}

TEST(Stft, ZeroInputGivesZeroMagnitudes) {
  AudioBuffer z;
  z.samples.assign(1600, 0.0);
  auto frames = stft(z);
  for (auto v : frames.values) ASSERT_EQ(std::abs(v), 0.0);
}

TEST(Stft, MatchesNaiveDft) {
  Rng rng(123);
  for (std::size_t n : {4000u, 8000u}) {
    AudioBuffer a;
    a.samples.resize(n);
    for (double& s : a.samples) s = rng.uniform(-1, 1);
    auto frames = stft(a);
    ASSERT_EQ(frames.frames, 1 + (n - 400) / 160);
    double worst = 0;
    for (std::size_t f = 0; f < frames.frames; f += (n == 4000 ? 1 : 7)) {
      auto ref = naive_dft(a.samples, f * 160, 400, 512);
      for (std::size_t k = 0; k < frames.bins; ++k)
        worst = std::max(worst, std::abs(std::abs(frames.at(f, k)) - std::abs(ref[k])));
    }
    EXPECT_LE(worst, 1e-6) << n;
  }
}

TEST(Stft, ShortAudioRejected) {
  AudioBuffer a;
  a.samples.assign(399, 0.1);
  EXPECT_THROW(stft(a), ValidationError);
  a.samples.push_back(0.1);
  EXPECT_EQ(stft(a).frames, 1u);
}

TEST(LogMel, ZeroSpectrumIsLogFloor) {
  AudioBuffer z;
  z.samples.assign(3200, 0.0);
  auto spec = log_mel(stft(z), 40);
  EXPECT_EQ(spec.n_mels, 40u);
  for (double v : spec.values) ASSERT_DOUBLE_EQ(v, std::log(1e-10));
}

TEST(LogMel, FilterbankRowsPositiveAndContiguous) {
  for (std::size_t n_mels : {2u, 40u, 64u}) {
    auto bank = mel_filterbank(n_mels, 512, 16000);
    const std::size_t bins = 257;
    for (std::size_t m = 0; m < n_mels; ++m) {
      double sum = 0;
      std::size_t first = bins, last = 0;
      for (std::size_t k = 0; k < bins; ++k) {
        const double w = bank[m * bins + k];
        ASSERT_GE(w, 0.0);
        sum += w;
        if (w > 0) {
          first = std::min(first, k);
          last = std::max(last, k);
        }
      }
      ASSERT_GT(sum, 0.0) << n_mels << "/" << m;
      for (std::size_t k = first; k <= last; ++k) ASSERT_GT(bank[m * bins + k], 0.0);
    }
  }
  EXPECT_THROW(mel_filterbank(258, 512, 16000), ValidationError);
  // Fits in the bin count, but the lowest filters fall between bins.
  EXPECT_THROW(mel_filterbank(128, 512, 16000), ValidationError);
  EXPECT_THROW(mel_filterbank(1, 512, 16000), ValidationError);
}

TEST(LogMel, SingleToneMatchesDirectOracle) {
  Rng rng(4);
  const auto centers = mel_center_frequencies(40, 16000);
  const auto bank = mel_filterbank(40, 512, 16000);
  for (int trial = 0; trial < 12; ++trial) {
    // Tone placed exactly on a channel centre.
    const std::size_t channel = 4 + rng.below(34);
    const double hz = centers[channel];
    AudioBuffer a = sine(hz, 2000);
    auto frames = stft(a);
    auto spec = log_mel(frames, 40);
    for (std::size_t f = 0; f < frames.frames; f += 3) {
      auto ref = naive_dft(a.samples, f * 160, 400, 512);
      std::vector<double> direct(40);
      for (std::size_t m = 0; m < 40; ++m) {
        double e = 0;
        for (std::size_t k = 0; k < 257; ++k) e += bank[m * 257 + k] * std::norm(ref[k]);
        direct[m] = std::log(e + 1e-10);
        ASSERT_NEAR(spec.at(f, m), direct[m], 1e-8);
      }
      const auto arg = static_cast<std::size_t>(std::max_element(direct.begin(), direct.end()) - direct.begin());
      std::size_t nearest = 0;
      for (std::size_t m = 1; m < 40; ++m)
        if (std::abs(centers[m] - hz) < std::abs(centers[nearest] - hz)) nearest = m;
      ASSERT_EQ(arg, nearest) << hz;
      const auto got = static_cast<std::size_t>(
          std::max_element(spec.values.begin() + f * 40, spec.values.begin() + (f + 1) * 40) -
          (spec.values.begin() + f * 40));
      ASSERT_EQ(got, nearest);
    }
  }
}

TEST(TokenSpectrogram, FixedFrameCount) {
  AudioFeatureConfig cfg;
  EXPECT_EQ(cfg.frame_count(16000), 198u);
  AudioBuffer a = sine(440, 40000);
  Rng rng(2);
  for (int i = 0; i < 10; ++i) {
    auto s = token_spectrogram(a, rng.uniform(-1, 4), cfg);
    ASSERT_EQ(s.frames, 198u);
    ASSERT_EQ(s.n_mels, 40u);
    ASSERT_TRUE(s.all_finite());
  }
  auto n = normalize_log_mel(log_mel(stft(extract_audio_window(a, 100.0)), 40));
  EXPECT_TRUE(std::all_of(n.values.begin(), n.values.end(), [](double v) { return v == 0.0; }));
}

TEST(SynthSpeechlike, DurationsFollowPauseTable) {
  SynthProfile p;
  Rng rng(1);
  Utterance u = aligned({{0, 0}});
  u.alignments.reset();
  auto none = synth_speechlike(u, p, rng);
  EXPECT_EQ(none.audio.samples.size(), 3200u + 480u);
  u.labels[0] = PunctClass::Period;
  auto period = synth_speechlike(u, p, rng);
  EXPECT_EQ(period.audio.samples.size() - none.audio.samples.size(), 5920u);  // 370 ms
  u.labels[0] = PunctClass::Comma;
  EXPECT_EQ(synth_speechlike(u, p, rng).audio.samples.size(), 3200u + 3200u);
}

TEST(SynthSpeechlike, AlignmentsMonotoneAndMidpointsInside) {
  Rng rng(11);
  SynthProfile p;
  for (int trial = 0; trial < 30; ++trial) {
    Utterance u;
    u.source_id = "s";
    const std::size_t n = 1 + rng.below(20);
    for (std::size_t i = 0; i < n; ++i) {
      u.tokens.push_back(static_cast<TokenId>(4 + rng.below(50)));
      u.labels.push_back(class_from_index(rng.below(4)));
    }
    auto r = synth_speechlike(u, p, rng);
    ASSERT_EQ(r.alignments.size(), n);
    u.alignments = r.alignments;
    EXPECT_NO_THROW(u.validate());
    for (std::size_t t = 0; t < n; ++t) {
      const double mid = token_midpoint(u, t);
      ASSERT_GT(mid, r.alignments[t].start_sec);
      ASSERT_LT(mid, r.alignments[t].end_sec);
      ASSERT_NE(r.audio.samples[static_cast<std::size_t>(mid * 16000)], 0.0);
      if (t > 0) ASSERT_GE(r.alignments[t].start_sec, r.alignments[t - 1].end_sec);
    }
    for (double s : r.audio.samples) ASSERT_LE(std::abs(s), 1.0);
    EXPECT_NEAR(r.audio.duration_sec(), r.alignments.back().end_sec + p.pause_after(u.labels.back()), 1e-9);
  }
}

TEST(SynthSpeechlike, SilenceAfterTokensIsExactlyZero) {
  Rng rng(3);
  Utterance u = aligned({{0, 0}, {0, 0}});
  u.alignments.reset();
  u.labels = {PunctClass::Comma, PunctClass::Question};
  auto r = synth_speechlike(u, SynthProfile{}, rng);
  for (std::size_t i = 3200; i < 6400; ++i) ASSERT_EQ(r.audio.samples[i], 0.0);
  EXPECT_EQ(r.audio.samples.size(), 6400u + 3200u + 6400u);
}

std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("punct_audio_" + tag + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

TEST(Wav, RoundTripQuantizesBy32768) {
  AudioBuffer a;
  a.samples = {0.0, 0.5, -0.5, 1.0, -1.0, 0.25, 1.0 / 32768.0};
  auto back = parse_wav(encode_wav(a));
  ASSERT_EQ(back.samples.size(), a.samples.size());
  EXPECT_EQ(back.sample_rate, 16000.0);
  EXPECT_EQ(back.samples[1], 0.5);
  EXPECT_EQ(back.samples[3], 32767.0 / 32768.0);
  EXPECT_EQ(back.samples[4], -1.0);
  EXPECT_EQ(back.samples[6], 1.0 / 32768.0);

  auto dir = temp_dir("wav");
  write_wav(dir / "a.wav", a);
  EXPECT_EQ(read_wav(dir / "a.wav").samples, back.samples);
  std::filesystem::remove_all(dir);
}

TEST(Wav, StereoIsAveraged) {
  std::string bytes = encode_wav(AudioBuffer{{0.5, -0.25}, 8000});
  // Rewrite header as 2 channels: one frame of (0.5, -0.25).
  bytes[22] = 2;
  const std::uint32_t rate = 8000, byte_rate = 8000 * 4;
  for (int i = 0; i < 4; ++i) bytes[28 + i] = static_cast<char>((byte_rate >> (8 * i)) & 0xff);
  bytes[32] = 4;
  auto a = parse_wav(bytes);
  ASSERT_EQ(a.samples.size(), 1u);
  EXPECT_EQ(a.sample_rate, rate);
  EXPECT_DOUBLE_EQ(a.samples[0], 0.125);
}

TEST(Wav, MalformedInputRejected) {
  EXPECT_THROW(parse_wav("RIFF"), CorruptFileError);
  std::string bytes = encode_wav(AudioBuffer{{0.1, 0.2, 0.3}, 16000});
  EXPECT_THROW(parse_wav(bytes.substr(0, 30)), CorruptFileError);
  EXPECT_THROW(parse_wav(bytes.substr(0, bytes.size() - 2)), CorruptFileError);
}

TEST(FeatureCache, RoundTripAndCorruption) {
  AudioFeatureConfig cfg;
  AudioBuffer a = sine(700, 20000);
  std::vector<FeatureCacheEntry> entries;
  for (int i = 0; i < 3; ++i) entries.push_back({"utt/" + std::to_string(i), token_spectrogram(a, 0.3 * i, cfg)});
  auto dir = temp_dir("cache");
  // Entries of different lengths share one file.
  entries.push_back({"utt/long", log_mel(stft(a), 40)});
  write_feature_cache(dir / "feats.bin", entries, cfg, 16000);
  auto cache = read_feature_cache(dir / "feats.bin");
  EXPECT_EQ(cache.config.n_mels, 40u);
  EXPECT_EQ(cache.sample_rate, 16000.0);
  auto& back = cache.entries;
  ASSERT_EQ(back.size(), 4u);
  EXPECT_EQ(back[3].spectrogram.frames, 1 + (20000u - 400u) / 160u);
  EXPECT_EQ(back[3].spectrogram.values, entries[3].spectrogram.values);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].key, entries[i].key);
    EXPECT_EQ(back[i].spectrogram.values, entries[i].spectrogram.values);
    EXPECT_EQ(back[i].spectrogram.frames, 198u);
    EXPECT_DOUBLE_EQ(back[i].spectrogram.frame_hop_sec, 0.01);
  }
  auto blob = read_file(dir / "feats.bin");
  write_file_atomic(dir / "feats.bin", blob.substr(0, blob.size() - 8));
  EXPECT_THROW(read_feature_cache(dir / "feats.bin"), CorruptFileError);
  blob[17] ^= 0x40;
  write_file_atomic(dir / "feats.bin", blob);
  EXPECT_THROW(read_feature_cache(dir / "feats.bin"), CorruptFileError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace punct

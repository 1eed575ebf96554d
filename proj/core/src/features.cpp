// core/src/features.cpp
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

#include "punct/features.hpp"

#include <bit>
#include <cmath>

#include "punct/errors.hpp"
#include "punct/io.hpp"

namespace punct {

FeatureBank::FeatureBank(AudioFeatureConfig config, double sample_rate)
    : config_(std::move(config)), sample_rate_(sample_rate) {
  window_n_ = window_samples(sample_rate_, 2.0 * config_.half_width_sec);
  hop_n_ = window_samples(sample_rate_, config_.stft.hop_sec);
  frames_ = config_.frame_count(sample_rate_);
  if (frames_ == 0) throw ValidationError("audio window is shorter than one STFT frame");
}

std::optional<std::size_t> FeatureBank::grid_offset(const std::string& source_id, double midpoint_sec) const {
  const auto it = grids_.find(source_id);
  if (it == grids_.end()) return std::nullopt;
  // Same rounding as extract_audio_window; the grid is padded by one window.
  const long long start = std::llround((midpoint_sec - config_.half_width_sec) * sample_rate_);
  const long long padded = start + static_cast<long long>(window_n_);
  if (padded < 0 || padded % static_cast<long long>(hop_n_) != 0) return std::nullopt;
  const auto frame = static_cast<std::size_t>(padded) / hop_n_;
  if (frame + frames_ > it->second.frames) return std::nullopt;
  return frame;
}

void FeatureBank::add(const Utterance& utt, const AudioBuffer& audio) {
  if (!utt.alignments) throw ValidationError("utterance '" + utt.source_id + "' has no alignments");
  if (audio.sample_rate != sample_rate_)
    throw DataError("audio for '" + utt.source_id + "' is " + std::to_string(audio.sample_rate) + " Hz, expected " +
                    std::to_string(sample_rate_));
  AudioBuffer padded;
  padded.sample_rate = sample_rate_;
  padded.samples.assign(audio.samples.size() + 2 * window_n_, 0.0);
  std::copy(audio.samples.begin(), audio.samples.end(), padded.samples.begin() + static_cast<long>(window_n_));
  grids_[utt.source_id] = log_mel(stft(padded, config_.stft), config_.n_mels);
  audio_samples_[utt.source_id] = audio.samples.size();
  for (std::size_t t = 0; t < utt.size(); ++t) {
    const double mid = token_midpoint(utt, t);
    if (!grid_offset(utt.source_id, mid))
      direct_[{utt.source_id, mid}] = token_spectrogram(audio, mid, config_);
  }
}

Spectrogram FeatureBank::token(const AudioRef& ref) const {
  if (!contains(ref.source_id)) throw DataError("no audio features for '" + ref.source_id + "'");
  if (const auto frame = grid_offset(ref.source_id, ref.midpoint_sec)) {
    const Spectrogram& grid = grids_.at(ref.source_id);
    Spectrogram s;
    s.frames = frames_;
    s.n_mels = config_.n_mels;
    s.frame_hop_sec = grid.frame_hop_sec;
    const auto first = grid.values.begin() + static_cast<long>(*frame * config_.n_mels);
    s.values.assign(first, first + static_cast<long>(frames_ * config_.n_mels));
    return normalize_log_mel(std::move(s));
  }
  const auto it = direct_.find({ref.source_id, ref.midpoint_sec});
  if (it == direct_.end())
    throw DataError("no audio window for '" + ref.source_id + "' at " + std::to_string(ref.midpoint_sec) + " s");
  return normalize_log_mel(it->second);
}

namespace {

std::string midpoint_key(double sec) { return hex64(std::bit_cast<std::uint64_t>(sec)); }

}  // namespace

void FeatureBank::save(const std::filesystem::path& path) const {
  std::vector<FeatureCacheEntry> entries;
  for (const auto& [id, grid] : grids_)
    entries.push_back({"grid:" + std::to_string(audio_samples_.at(id)) + ":" + id, grid});
  for (const auto& [key, spec] : direct_) entries.push_back({"token:" + midpoint_key(key.second) + ":" + key.first, spec});
  write_feature_cache(path, entries, config_, sample_rate_);
}

FeatureBank FeatureBank::load(const std::filesystem::path& path) {
  FeatureCache cache = read_feature_cache(path);
  FeatureBank bank(cache.config, cache.sample_rate);
  for (auto& e : cache.entries) {
    const auto first = e.key.find(':');
    const auto second = first == std::string::npos ? first : e.key.find(':', first + 1);
    if (second == std::string::npos) throw CorruptFileError("feature cache key '" + e.key + "' is malformed");
    const std::string kind = e.key.substr(0, first);
    const std::string field = e.key.substr(first + 1, second - first - 1);
    const std::string id = e.key.substr(second + 1);
    try {
      if (kind == "grid") {
        bank.audio_samples_[id] = std::stoull(field);
        bank.grids_[id] = std::move(e.spectrogram);
      } else if (kind == "token") {
        bank.direct_[{id, std::bit_cast<double>(std::stoull(field, nullptr, 16))}] = std::move(e.spectrogram);
      } else {
        throw CorruptFileError("feature cache key '" + e.key + "' has unknown kind");
      }
    } catch (const std::logic_error&) {
      throw CorruptFileError("feature cache key '" + e.key + "' is malformed");
    }
  }
  return bank;
}

FeatureBank features_from_wav_dir(std::span<const Utterance> corpus, const std::filesystem::path& dir,
                                  const AudioFeatureConfig& config, double sample_rate) {
  FeatureBank bank(config, sample_rate);
  for (const auto& u : corpus) {
    const auto path = dir / (u.source_id + ".wav");
    if (!std::filesystem::exists(path)) throw DataError("no audio for '" + u.source_id + "': " + path.string() + " is missing");
    bank.add(u, read_wav(path));
  }
  return bank;
}

}  // namespace punct

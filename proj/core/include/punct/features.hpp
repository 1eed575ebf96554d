// core/include/punct/features.hpp
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

// Per-token audio features for a corpus. Each utterance is analysed once on a
// zero-padded frame grid; a token window whose start lands on that grid is a
// slice of it, bit-identical to computing the window directly. Tokens whose
// windows fall between grid points are computed directly when added.

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>

#include "punct/audio.hpp"
#include "punct/text.hpp"

namespace punct {

class FeatureBank {
 public:
  explicit FeatureBank(AudioFeatureConfig config = {}, double sample_rate = kDefaultSampleRate);

  // Requires alignments on `utt`; audio must use the bank's sample rate.
  void add(const Utterance& utt, const AudioBuffer& audio);
  bool contains(const std::string& source_id) const { return grids_.count(source_id) != 0; }
  std::size_t size() const { return grids_.size(); }

  // Normalized log-mel window centred on the reference midpoint.
  Spectrogram token(const AudioRef& ref) const;
  std::size_t frames_per_token() const { return frames_; }
  const AudioFeatureConfig& config() const { return config_; }
  double sample_rate() const { return sample_rate_; }

  void save(const std::filesystem::path& path) const;
  static FeatureBank load(const std::filesystem::path& path);

 private:
  std::optional<std::size_t> grid_offset(const std::string& source_id, double midpoint_sec) const;

  AudioFeatureConfig config_;
  double sample_rate_;
  std::size_t window_n_ = 0;
  std::size_t hop_n_ = 0;
  std::size_t frames_ = 0;
  std::map<std::string, Spectrogram> grids_;
  std::map<std::string, std::size_t> audio_samples_;
  std::map<std::pair<std::string, double>, Spectrogram> direct_;
};

// Reads <dir>/<source_id>.wav for every utterance. Throws DataError when a
// file is missing or unreadable.
FeatureBank features_from_wav_dir(std::span<const Utterance> corpus, const std::filesystem::path& dir,
                                  const AudioFeatureConfig& config = {}, double sample_rate = kDefaultSampleRate);

}  // namespace punct

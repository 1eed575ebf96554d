// core/include/punct/training.hpp
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

// Training configuration, balanced class sampling, the training loop, and
// checkpoint persistence.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "punct/augmentation.hpp"
#include "punct/encoders.hpp"
#include "punct/features.hpp"
#include "punct/rng.hpp"
#include "punct/text.hpp"

namespace punct {

inline constexpr std::array<std::size_t, 6> kContextGrid{0, 2, 4, 8, 16, 32};

struct TrainConfig {
  EncoderKind encoder = EncoderKind::Transformer;
  std::size_t past_context = 32;
  std::size_t future_context = 32;
  std::size_t future_capacity = 32;
  // All zero disables contextual dropout.
  DropoutRates dropout = dropout_schedule_for_eval();
  bool multimodal = false;
  std::size_t batch_size = 32;
  std::size_t steps = 2000;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double sample_rate = kDefaultSampleRate;

  TransformerConfig transformer;
  LstmConfig lstm;
  CnnConfig cnn;
  // n_frames and n_mels are taken from `features`.
  AudioCnnConfig audio;
  AudioFeatureConfig features;
  std::size_t head_hidden = 256;

  double validation_fraction = 0.0;
  std::size_t log_every = 100;

  // Inputs used by the command-line tool; empty when unused.
  std::string corpus;
  std::string vocab;
  std::string audio_dir;
  std::string feature_cache;

  void validate() const;
  bool uses_dropout() const { return !dropout.is_zero(); }
  ModelConfig model_config(std::size_t vocab_size) const;

  friend bool operator==(const TrainConfig&, const TrainConfig&);
};

// Canonical JSON: sorted keys, every field present.
std::string config_to_json(const TrainConfig& config);
// Missing fields keep their defaults; unknown fields are a ValidationError
// naming the field.
TrainConfig config_from_json(std::string_view json);
TrainConfig load_config(const std::filesystem::path& path);

class BalancedSampler {
 public:
  // Throws ValidationError naming the first class with no examples.
  explicit BalancedSampler(std::span<const PunctClass> labels);
  // A class uniformly at random, then an example of it uniformly at random.
  std::size_t next(Rng& rng) const;
  std::size_t class_size(PunctClass c) const { return by_class_[class_index(c)].size(); }

 private:
  std::array<std::vector<std::size_t>, kNumClasses> by_class_;
};

struct TokenRef {
  std::size_t utterance = 0;
  std::size_t position = 0;
};

std::vector<TokenRef> all_tokens(std::span<const Utterance> corpus);

struct Checkpoint {
  TrainConfig config;
  Vocab vocab;
  std::unique_ptr<PunctuationModel> model;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "PUNCTCKP", u32 version, u64 header length, header JSON, u32 tensor count,
// then per tensor: u32 name length, name, u32 rank, u64 dims, float64 data;
// finally an FNV-1a checksum of everything before it. Little-endian.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Model freshly initialized from config.seed.
Checkpoint initial_checkpoint(const TrainConfig& config, const Vocab& vocab);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> losses;
};

using LossCallback = std::function<void(std::size_t step, double loss)>;

// Throws ValidationError when multimodal training lacks alignments or audio
// for an utterance, NonFiniteLossError when the loss diverges.
TrainResult train(const TrainConfig& config, const Vocab& vocab, std::span<const Utterance> corpus,
                  const FeatureBank* audio = nullptr, const LossCallback& on_log = {});

// Deterministic split of utterance indices into (train, validation).
std::pair<std::vector<Utterance>, std::vector<Utterance>> split_corpus(std::span<const Utterance> corpus,
                                                                       double validation_fraction,
                                                                       std::uint64_t seed);

// Batched inference over windows already padded or truncated as desired.
std::vector<Logits> infer_windows(const Checkpoint& ckpt, std::span<const WindowExample> windows,
                                  const FeatureBank* audio, std::size_t batch_size = 64);

}  // namespace punct

// core/include/punct/encoders.hpp
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

// Text encoders (transformer, BiLSTM, CNN), the spectrogram CNN, and the
// fusion head, plus the model that wires them together.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "punct/audio.hpp"
#include "punct/rng.hpp"
#include "punct/tensor.hpp"
#include "punct/text.hpp"

namespace punct {

enum class EncoderKind { Transformer, Lstm, Cnn };

std::string_view encoder_name(EncoderKind kind);
// Throws ValidationError for anything but "transformer", "lstm", "cnn".
EncoderKind parse_encoder_kind(std::string_view name);

struct TransformerConfig {
  std::size_t d_model = 128;
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t d_ff = 512;

  void validate() const;
  std::size_t feature_dim() const { return (n_layers + 1) * d_model; }
};

struct LstmConfig {
  std::size_t d_embed = 128;
  std::size_t d_hidden = 128;

  void validate() const;
  std::size_t feature_dim() const { return 2 * d_hidden; }
};

struct CnnConfig {
  std::size_t d_embed = 128;
  std::size_t channels = 128;
  std::size_t n_layers = 3;
  std::size_t kernel = 3;

  void validate() const;
  std::size_t feature_dim() const { return channels; }
};

struct AudioCnnConfig {
  std::size_t n_frames = 198;
  std::size_t n_mels = 40;
  // One conv + ReLU + 2x2 max-pool stage per entry.
  std::vector<std::size_t> channels{8, 16, 16};
  std::size_t kernel = 3;
  std::size_t d_audio = 256;

  void validate() const;
  std::size_t flatten_dim() const;
  std::size_t feature_dim() const { return d_audio; }
};

struct ModelConfig {
  EncoderKind encoder = EncoderKind::Transformer;
  std::size_t vocab_size = 0;
  std::size_t past_context = 32;
  // Future slots in every model input; shorter contexts are PAD-filled.
  std::size_t future_capacity = 32;
  TransformerConfig transformer;
  LstmConfig lstm;
  CnnConfig cnn;
  bool multimodal = false;
  AudioCnnConfig audio;
  std::size_t head_hidden = 256;

  void validate() const;
  std::size_t window_length() const { return past_context + 2 + future_capacity; }
  std::size_t mask_index() const { return past_context + 1; }
  std::size_t text_feature_dim() const;
  std::size_t head_input_dim() const { return text_feature_dim() + (multimodal ? audio.feature_dim() : 0); }
};

// Token ids of a batch of equal-length windows. key_mask is 1 for positions
// attention may read; build_text_batch masks exactly the PAD slots.
struct TextBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::size_t mask_index = 0;
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> key_mask;
};

TextBatch build_text_batch(std::span<const std::vector<TokenId>> inputs, std::size_t mask_index);
// Examples are padded to `future_capacity` future slots first.
TextBatch build_text_batch(std::span<const WindowExample> examples, std::size_t future_capacity);

// Normalized spectrograms stacked as [batch, 1, frames, mels].
struct AudioBatch {
  std::size_t batch = 0;
  std::size_t frames = 0;
  std::size_t n_mels = 0;
  std::vector<double> values;

  void append(const Spectrogram& spec);
};

struct NamedParameter {
  std::string name;
  Tensor* tensor = nullptr;
};

class TransformerEncoder {
 public:
  struct Layer {
    Tensor ln1_gain, ln1_bias, wq, wk, wv, wo;
    Tensor ln2_gain, ln2_bias, w1, b1, w2, b2;
  };

  TransformerEncoder(const TransformerConfig& config, std::size_t vocab_size, std::size_t positions);
  void initialize(Rng& rng);
  // [batch, (n_layers + 1) * d_model]: the MASK row of the embedding sum and
  // of every layer's output.
  Var forward(Graph& g, const TextBatch& batch);
  void collect(std::vector<NamedParameter>& out, const std::string& prefix);

  const TransformerConfig& config() const { return config_; }
  Tensor token_embedding, position_embedding;
  std::vector<Layer> layers;

 private:
  TransformerConfig config_;
};

class LstmEncoder {
 public:
  struct Direction {
    Tensor w_input, w_hidden, bias;  // gates i, f, g, o
  };

  LstmEncoder(const LstmConfig& config, std::size_t vocab_size);
  void initialize(Rng& rng);
  // [batch, 2 * d_hidden]: forward state after reading up to the MASK slot,
  // then backward state after reading from the end down to the MASK slot.
  Var forward(Graph& g, const TextBatch& batch);
  void collect(std::vector<NamedParameter>& out, const std::string& prefix);

  const LstmConfig& config() const { return config_; }
  Tensor embedding;
  Direction fwd, bwd;

 private:
  LstmConfig config_;
};

class CnnEncoder {
 public:
  struct Layer {
    Tensor kernels, bias;
  };

  CnnEncoder(const CnnConfig& config, std::size_t vocab_size);
  void initialize(Rng& rng);
  // [batch, channels] at the MASK slot.
  Var forward(Graph& g, const TextBatch& batch);
  void collect(std::vector<NamedParameter>& out, const std::string& prefix);

  const CnnConfig& config() const { return config_; }
  Tensor embedding;
  std::vector<Layer> layers;

 private:
  CnnConfig config_;
};

class AudioCnnEncoder {
 public:
  struct Stage {
    Tensor kernels, bias;
  };

  explicit AudioCnnEncoder(const AudioCnnConfig& config);
  void initialize(Rng& rng);
  // [batch, d_audio].
  Var forward(Graph& g, const AudioBatch& batch);
  void collect(std::vector<NamedParameter>& out, const std::string& prefix);

  const AudioCnnConfig& config() const { return config_; }
  std::vector<Stage> stages;
  Tensor w_out, b_out;

 private:
  AudioCnnConfig config_;
};

class FusionHead {
 public:
  FusionHead(std::size_t input_dim, std::size_t hidden);
  void initialize(Rng& rng);
  // affine -> ReLU -> affine, [batch, 4].
  Var forward(Graph& g, Var features);
  void collect(std::vector<NamedParameter>& out, const std::string& prefix);

  std::size_t input_dim() const { return w1.dim(0); }
  Tensor w1, b1, w2, b2;
};

using Logits = std::array<double, kNumClasses>;

class PunctuationModel {
 public:
  // Parameters are initialized from `seed`.
  PunctuationModel(const ModelConfig& config, std::uint64_t seed);
  PunctuationModel(const PunctuationModel&) = delete;
  PunctuationModel& operator=(const PunctuationModel&) = delete;

  const ModelConfig& config() const { return config_; }
  // Stable order; names are unique.
  std::vector<NamedParameter> parameters();

  Var text_features(Graph& g, const TextBatch& text);
  Var audio_features(Graph& g, const AudioBatch& audio);
  // Audio must be given exactly when the model is multimodal.
  Var logits(Graph& g, const TextBatch& text, const AudioBatch* audio);
  std::vector<Logits> infer(const TextBatch& text, const AudioBatch* audio);

 private:
  ModelConfig config_;
  std::optional<TransformerEncoder> transformer_;
  std::optional<LstmEncoder> lstm_;
  std::optional<CnnEncoder> cnn_;
  std::optional<AudioCnnEncoder> audio_;
  std::optional<FusionHead> head_;
};

// Concatenates text and optional audio features and runs the head.
Var fuse_and_classify(Graph& g, Var text, std::optional<Var> audio, FusionHead& head);

// Argmax with ties going to the lowest class index. Throws ValidationError on
// non-finite logits.
PunctClass predict(std::span<const double> logits);

}  // namespace punct

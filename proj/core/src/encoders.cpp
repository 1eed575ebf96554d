// core/src/encoders.cpp
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

#include "punct/encoders.hpp"

#include <cmath>

#include "punct/errors.hpp"

namespace punct {

namespace {

void fill_uniform(Tensor& t, Rng& rng, double lo, double hi) {
  for (double& v : t.data()) v = rng.uniform(lo, hi);
}

void fill_fan_in(Tensor& t, Rng& rng, std::size_t fan_in) {
  const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data()) v = sd * rng.normal();
}

void fill_embedding(Tensor& t, Rng& rng) { fill_uniform(t, rng, -0.05, 0.05); }

void require_positive(std::size_t v, const char* field) {
  if (v == 0) throw ValidationError(std::string(field) + " must be positive");
}

void check_batch(const TextBatch& batch, std::size_t vocab_size) {
  if (batch.batch == 0 || batch.length == 0) throw DimensionError("empty text batch");
  if (batch.ids.size() != batch.batch * batch.length || batch.key_mask.size() != batch.ids.size())
    throw DimensionError("text batch arrays do not match batch x length");
  if (batch.mask_index >= batch.length) throw DimensionError("text batch MASK index outside the window");
  for (TokenId id : batch.ids)
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size)
      throw ValidationError("token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(vocab_size));
}

std::vector<std::size_t> mask_rows(const TextBatch& batch) {
  std::vector<std::size_t> rows(batch.batch);
  for (std::size_t b = 0; b < batch.batch; ++b) rows[b] = b * batch.length + batch.mask_index;
  return rows;
}

Var p(Graph& g, Tensor& t) { return g.parameter(t); }

}  // namespace

std::string_view encoder_name(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::Transformer: return "transformer";
    case EncoderKind::Lstm: return "lstm";
    case EncoderKind::Cnn: return "cnn";
  }
  return "transformer";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "transformer") return EncoderKind::Transformer;
  if (name == "lstm") return EncoderKind::Lstm;
  if (name == "cnn") return EncoderKind::Cnn;
  throw ValidationError("encoder: unknown kind '" + std::string(name) + "' (expected transformer, lstm, or cnn)");
}

void TransformerConfig::validate() const {
  require_positive(d_model, "transformer.d_model");
  require_positive(n_layers, "transformer.n_layers");
  require_positive(n_heads, "transformer.n_heads");
  require_positive(d_ff, "transformer.d_ff");
  if (d_model % n_heads != 0)
    throw ValidationError("transformer.d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                          std::to_string(n_heads));
}

void LstmConfig::validate() const {
  require_positive(d_embed, "lstm.d_embed");
  require_positive(d_hidden, "lstm.d_hidden");
}

void CnnConfig::validate() const {
  require_positive(d_embed, "cnn.d_embed");
  require_positive(channels, "cnn.channels");
  require_positive(n_layers, "cnn.n_layers");
  if (kernel % 2 == 0) throw ValidationError("cnn.kernel must be odd for same-padding");
}

void AudioCnnConfig::validate() const {
  require_positive(n_frames, "audio.n_frames");
  require_positive(n_mels, "audio.n_mels");
  require_positive(kernel, "audio.kernel");
  require_positive(d_audio, "audio.d_audio");
  if (channels.empty()) throw ValidationError("audio.channels must list at least one stage");
  for (std::size_t c : channels) require_positive(c, "audio.channels");
  flatten_dim();
}

std::size_t AudioCnnConfig::flatten_dim() const {
  std::size_t h = n_frames, w = n_mels;
  const std::size_t pad = (kernel - 1) / 2;
  for (std::size_t s = 0; s < channels.size(); ++s) {
    if (h + 2 * pad < kernel || w + 2 * pad < kernel)
      throw ValidationError("audio.channels: spectrogram too small for stage " + std::to_string(s));
    h = (h + 2 * pad - kernel + 1) / 2;
    w = (w + 2 * pad - kernel + 1) / 2;
    if (h == 0 || w == 0)
      throw ValidationError("audio.channels: spectrogram " + std::to_string(n_frames) + "x" +
                            std::to_string(n_mels) + " pooled away at stage " + std::to_string(s));
  }
  return channels.back() * h * w;
}

void ModelConfig::validate() const {
  if (vocab_size <= Vocab::kNumReserved)
    throw ValidationError("model vocab_size " + std::to_string(vocab_size) + " has no corpus tokens");
  switch (encoder) {
    case EncoderKind::Transformer: transformer.validate(); break;
    case EncoderKind::Lstm: lstm.validate(); break;
    case EncoderKind::Cnn: cnn.validate(); break;
  }
  if (multimodal) audio.validate();
  require_positive(head_hidden, "head_hidden");
}

std::size_t ModelConfig::text_feature_dim() const {
  switch (encoder) {
    case EncoderKind::Transformer: return transformer.feature_dim();
    case EncoderKind::Lstm: return lstm.feature_dim();
    case EncoderKind::Cnn: return cnn.feature_dim();
  }
  return 0;
}

TextBatch build_text_batch(std::span<const std::vector<TokenId>> inputs, std::size_t mask_index) {
  if (inputs.empty()) throw DimensionError("empty text batch");
  TextBatch batch;
  batch.batch = inputs.size();
  batch.length = inputs.front().size();
  batch.mask_index = mask_index;
  batch.ids.reserve(batch.batch * batch.length);
  for (const auto& in : inputs) {
    if (in.size() != batch.length)
      throw DimensionError("window length " + std::to_string(in.size()) + " differs from " +
                           std::to_string(batch.length));
    if (mask_index >= in.size() || in[mask_index] != Vocab::kMask)
      throw DimensionError("window has no <mask> at index " + std::to_string(mask_index));
    for (TokenId id : in) {
      batch.ids.push_back(id);
      batch.key_mask.push_back(id == Vocab::kPad ? 0 : 1);
    }
  }
  return batch;
}

TextBatch build_text_batch(std::span<const WindowExample> examples, std::size_t future_capacity) {
  std::vector<std::vector<TokenId>> inputs;
  inputs.reserve(examples.size());
  std::size_t mask = 0;
  for (const auto& ex : examples) {
    WindowExample padded = ex;
    extend_future(padded, future_capacity);
    inputs.push_back(padded.model_input());
    mask = padded.mask_index();
  }
  return build_text_batch(inputs, mask);
}

void AudioBatch::append(const Spectrogram& spec) {
  if (batch == 0) {
    frames = spec.frames;
    n_mels = spec.n_mels;
  } else if (spec.frames != frames || spec.n_mels != n_mels) {
    throw DimensionError("spectrogram " + std::to_string(spec.frames) + "x" + std::to_string(spec.n_mels) +
                         " differs from batch shape " + std::to_string(frames) + "x" + std::to_string(n_mels));
  }
  values.insert(values.end(), spec.values.begin(), spec.values.end());
  ++batch;
}

// ---------------------------------------------------------------- transformer

TransformerEncoder::TransformerEncoder(const TransformerConfig& config, std::size_t vocab_size,
                                       std::size_t positions)
    : token_embedding({vocab_size, config.d_model}),
      position_embedding({positions, config.d_model}),
      config_(config) {
  config.validate();
  const std::size_t d = config.d_model, f = config.d_ff;
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    layers.push_back(Layer{Tensor({d}, 1.0), Tensor({d}), Tensor({d, d}), Tensor({d, d}), Tensor({d, d}),
                           Tensor({d, d}), Tensor({d}, 1.0), Tensor({d}), Tensor({d, f}), Tensor({f}),
                           Tensor({f, d}), Tensor({d})});
  }
}

void TransformerEncoder::initialize(Rng& rng) {
  fill_embedding(token_embedding, rng);
  fill_embedding(position_embedding, rng);
  const std::size_t d = config_.d_model;
  for (auto& L : layers) {
    fill_fan_in(L.wq, rng, d);
    fill_fan_in(L.wk, rng, d);
    fill_fan_in(L.wv, rng, d);
    fill_fan_in(L.wo, rng, d);
    fill_fan_in(L.w1, rng, d);
    fill_fan_in(L.w2, rng, config_.d_ff);
  }
}

Var TransformerEncoder::forward(Graph& g, const TextBatch& batch) {
  check_batch(batch, token_embedding.dim(0));
  if (batch.length > position_embedding.dim(0))
    throw DimensionError("window length " + std::to_string(batch.length) + " exceeds " +
                         std::to_string(position_embedding.dim(0)) + " learned positions");
  std::vector<TokenId> positions(batch.ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<TokenId>(i % batch.length);
  const auto rows = mask_rows(batch);

  Var x = add(embedding(p(g, token_embedding), batch.ids), embedding(p(g, position_embedding), positions));
  std::vector<Var> features{select_rows(x, rows)};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Layer& L = layers[l];
    // Only the MASK row of the last layer is ever read.
    const bool last = l + 1 == layers.size();
    Var h = layer_norm(x, p(g, L.ln1_gain), p(g, L.ln1_bias));
    Var q = matmul(last ? select_rows(h, rows) : h, p(g, L.wq));
    Var k = matmul(h, p(g, L.wk));
    Var v = matmul(h, p(g, L.wv));
    Var a = attention(q, k, v, batch.key_mask, {batch.batch, last ? 1 : batch.length, batch.length, config_.n_heads});
    Var res = add(last ? select_rows(x, rows) : x, matmul(a, p(g, L.wo)));
    Var h2 = layer_norm(res, p(g, L.ln2_gain), p(g, L.ln2_bias));
    Var ff = add_bias(matmul(relu(add_bias(matmul(h2, p(g, L.w1)), p(g, L.b1))), p(g, L.w2)), p(g, L.b2));
    x = add(res, ff);
    features.push_back(last ? x : select_rows(x, rows));
  }
  return concat_cols(features);
}

void TransformerEncoder::collect(std::vector<NamedParameter>& out, const std::string& prefix) {
  out.push_back({prefix + "token_embedding", &token_embedding});
  out.push_back({prefix + "position_embedding", &position_embedding});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string n = prefix + "layer" + std::to_string(l) + ".";
    Layer& L = layers[l];
    out.push_back({n + "ln1_gain", &L.ln1_gain});
    out.push_back({n + "ln1_bias", &L.ln1_bias});
    out.push_back({n + "wq", &L.wq});
    out.push_back({n + "wk", &L.wk});
    out.push_back({n + "wv", &L.wv});
    out.push_back({n + "wo", &L.wo});
    out.push_back({n + "ln2_gain", &L.ln2_gain});
    out.push_back({n + "ln2_bias", &L.ln2_bias});
    out.push_back({n + "w1", &L.w1});
    out.push_back({n + "b1", &L.b1});
    out.push_back({n + "w2", &L.w2});
    out.push_back({n + "b2", &L.b2});
  }
}

// ----------------------------------------------------------------------- lstm

LstmEncoder::LstmEncoder(const LstmConfig& config, std::size_t vocab_size)
    : embedding({vocab_size, config.d_embed}), config_(config) {
  config.validate();
  for (Direction* d : {&fwd, &bwd})
    *d = Direction{Tensor({config.d_embed, 4 * config.d_hidden}), Tensor({config.d_hidden, 4 * config.d_hidden}),
                   Tensor({4 * config.d_hidden})};
}

void LstmEncoder::initialize(Rng& rng) {
  fill_embedding(embedding, rng);
  for (Direction* d : {&fwd, &bwd}) {
    fill_fan_in(d->w_input, rng, config_.d_embed);
    fill_fan_in(d->w_hidden, rng, config_.d_hidden);
  }
}

Var LstmEncoder::forward(Graph& g, const TextBatch& batch) {
  check_batch(batch, embedding.dim(0));
  const std::size_t H = config_.d_hidden, B = batch.batch;
  Var emb = punct::embedding(p(g, embedding), batch.ids);
  auto run = [&](Direction& dir, std::size_t first, std::size_t last, bool reverse) {
    Var xw = matmul(emb, p(g, dir.w_input));
    Var wh = p(g, dir.w_hidden);
    Var bias = p(g, dir.bias);
    Var h = g.constant(Tensor({B, H}));
    Var c = g.constant(Tensor({B, H}));
    std::vector<std::size_t> rows(B);
    const std::size_t steps = last - first + 1;
    for (std::size_t s = 0; s < steps; ++s) {
      const std::size_t t = reverse ? last - s : first + s;
      for (std::size_t b = 0; b < B; ++b) rows[b] = b * batch.length + t;
      Var z = add_bias(add(select_rows(xw, rows), matmul(h, wh)), bias);
      Var i = sigmoid(slice_cols(z, 0, H));
      Var f = sigmoid(slice_cols(z, H, 2 * H));
      Var u = tanh(slice_cols(z, 2 * H, 3 * H));
      Var o = sigmoid(slice_cols(z, 3 * H, 4 * H));
      c = add(mul(f, c), mul(i, u));
      h = mul(o, tanh(c));
    }
    return h;
  };
  Var hf = run(fwd, 0, batch.mask_index, false);
  Var hb = run(bwd, batch.mask_index, batch.length - 1, true);
  const Var parts[] = {hf, hb};
  return concat_cols(parts);
}

void LstmEncoder::collect(std::vector<NamedParameter>& out, const std::string& prefix) {
  out.push_back({prefix + "embedding", &embedding});
  for (auto [name, d] : {std::pair{"fwd.", &fwd}, std::pair{"bwd.", &bwd}}) {
    out.push_back({prefix + name + "w_input", &d->w_input});
    out.push_back({prefix + name + "w_hidden", &d->w_hidden});
    out.push_back({prefix + name + "bias", &d->bias});
  }
}

// ------------------------------------------------------------------------ cnn

CnnEncoder::CnnEncoder(const CnnConfig& config, std::size_t vocab_size)
    : embedding({vocab_size, config.d_embed}), config_(config) {
  config.validate();
  std::size_t in = config.d_embed;
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    layers.push_back(Layer{Tensor({config.channels, in, config.kernel}), Tensor({config.channels})});
    in = config.channels;
  }
}

void CnnEncoder::initialize(Rng& rng) {
  fill_embedding(embedding, rng);
  for (auto& L : layers) fill_fan_in(L.kernels, rng, L.kernels.dim(1) * L.kernels.dim(2));
}

Var CnnEncoder::forward(Graph& g, const TextBatch& batch) {
  check_batch(batch, embedding.dim(0));
  Var x = reshape(punct::embedding(p(g, embedding), batch.ids), {batch.batch, batch.length, config_.d_embed});
  const Conv1dOptions same{1, config_.kernel / 2};
  for (auto& L : layers) x = relu(conv1d(x, p(g, L.kernels), p(g, L.bias), same));
  x = reshape(x, {batch.batch * batch.length, config_.channels});
  return select_rows(x, mask_rows(batch));
}

void CnnEncoder::collect(std::vector<NamedParameter>& out, const std::string& prefix) {
  out.push_back({prefix + "embedding", &embedding});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string n = prefix + "layer" + std::to_string(l) + ".";
    out.push_back({n + "kernels", &layers[l].kernels});
    out.push_back({n + "bias", &layers[l].bias});
  }
}

// ------------------------------------------------------------------ audio cnn

AudioCnnEncoder::AudioCnnEncoder(const AudioCnnConfig& config)
    : w_out({config.flatten_dim(), config.d_audio}), b_out({config.d_audio}), config_(config) {
  config.validate();
  std::size_t in = 1;
  for (std::size_t c : config.channels) {
    stages.push_back(Stage{Tensor({c, in, config.kernel, config.kernel}), Tensor({c})});
    in = c;
  }
}

void AudioCnnEncoder::initialize(Rng& rng) {
  for (auto& s : stages) fill_fan_in(s.kernels, rng, s.kernels.dim(1) * config_.kernel * config_.kernel);
  fill_fan_in(w_out, rng, w_out.dim(0));
}

Var AudioCnnEncoder::forward(Graph& g, const AudioBatch& batch) {
  if (batch.batch == 0) throw DimensionError("empty audio batch");
  if (batch.frames != config_.n_frames || batch.n_mels != config_.n_mels)
    throw DimensionError("spectrogram " + std::to_string(batch.frames) + "x" + std::to_string(batch.n_mels) +
                         " does not match the trained " + std::to_string(config_.n_frames) + "x" +
                         std::to_string(config_.n_mels));
  Var x = g.constant(Tensor({batch.batch, 1, batch.frames, batch.n_mels}, batch.values));
  const std::size_t pad = (config_.kernel - 1) / 2;
  const Conv2dOptions opt{1, 1, pad, pad};
  for (auto& s : stages) x = max_pool2d(relu(conv2d(x, p(g, s.kernels), p(g, s.bias), opt)), 2, 2);
  x = reshape(x, {batch.batch, config_.flatten_dim()});
  return add_bias(matmul(x, p(g, w_out)), p(g, b_out));
}

void AudioCnnEncoder::collect(std::vector<NamedParameter>& out, const std::string& prefix) {
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const std::string n = prefix + "stage" + std::to_string(s) + ".";
    out.push_back({n + "kernels", &stages[s].kernels});
    out.push_back({n + "bias", &stages[s].bias});
  }
  out.push_back({prefix + "w_out", &w_out});
  out.push_back({prefix + "b_out", &b_out});
}

// ----------------------------------------------------------------------- head

FusionHead::FusionHead(std::size_t input_dim, std::size_t hidden)
    : w1({input_dim, hidden}), b1({hidden}), w2({hidden, kNumClasses}), b2({kNumClasses}) {}

void FusionHead::initialize(Rng& rng) {
  fill_fan_in(w1, rng, w1.dim(0));
  fill_fan_in(w2, rng, w2.dim(0));
}

Var FusionHead::forward(Graph& g, Var features) {
  if (features.shape().size() != 2 || features.shape()[1] != input_dim())
    throw DimensionError("head expects [batch, " + std::to_string(input_dim()) + "] features, got " +
                         shape_string(features.shape()));
  Var h = relu(add_bias(matmul(features, p(g, w1)), p(g, b1)));
  return add_bias(matmul(h, p(g, w2)), p(g, b2));
}

void FusionHead::collect(std::vector<NamedParameter>& out, const std::string& prefix) {
  out.push_back({prefix + "w1", &w1});
  out.push_back({prefix + "b1", &b1});
  out.push_back({prefix + "w2", &w2});
  out.push_back({prefix + "b2", &b2});
}

Var fuse_and_classify(Graph& g, Var text, std::optional<Var> audio, FusionHead& head) {
  if (!audio) return head.forward(g, text);
  const Var parts[] = {text, *audio};
  return head.forward(g, concat_cols(parts));
}

// ---------------------------------------------------------------------- model

PunctuationModel::PunctuationModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config.validate();
  Rng rng(seed);
  switch (config.encoder) {
    case EncoderKind::Transformer:
      transformer_.emplace(config.transformer, config.vocab_size, config.window_length());
      transformer_->initialize(rng);
      break;
    case EncoderKind::Lstm:
      lstm_.emplace(config.lstm, config.vocab_size);
      lstm_->initialize(rng);
      break;
    case EncoderKind::Cnn:
      cnn_.emplace(config.cnn, config.vocab_size);
      cnn_->initialize(rng);
      break;
  }
  if (config.multimodal) {
    audio_.emplace(config.audio);
    audio_->initialize(rng);
  }
  head_.emplace(config.head_input_dim(), config.head_hidden);
  head_->initialize(rng);
}

std::vector<NamedParameter> PunctuationModel::parameters() {
  std::vector<NamedParameter> out;
  if (transformer_) transformer_->collect(out, "text.");
  if (lstm_) lstm_->collect(out, "text.");
  if (cnn_) cnn_->collect(out, "text.");
  if (audio_) audio_->collect(out, "audio.");
  head_->collect(out, "head.");
  return out;
}

Var PunctuationModel::text_features(Graph& g, const TextBatch& text) {
  if (text.length != config_.window_length() || text.mask_index != config_.mask_index())
    throw DimensionError("window length " + std::to_string(text.length) + " (mask at " +
                         std::to_string(text.mask_index) + ") does not match the model's " +
                         std::to_string(config_.window_length()) + " (mask at " +
                         std::to_string(config_.mask_index()) + ")");
  if (transformer_) return transformer_->forward(g, text);
  if (lstm_) return lstm_->forward(g, text);
  return cnn_->forward(g, text);
}

Var PunctuationModel::audio_features(Graph& g, const AudioBatch& audio) {
  if (!audio_) throw ValidationError("text-only model has no audio encoder");
  return audio_->forward(g, audio);
}

Var PunctuationModel::logits(Graph& g, const TextBatch& text, const AudioBatch* audio) {
  if (config_.multimodal && !audio) throw ValidationError("multimodal model needs audio features");
  if (!config_.multimodal && audio) throw ValidationError("text-only model was given audio features");
  Var t = text_features(g, text);
  if (!audio) return fuse_and_classify(g, t, std::nullopt, *head_);
  if (audio->batch != text.batch)
    throw DimensionError("audio batch " + std::to_string(audio->batch) + " does not match text batch " +
                         std::to_string(text.batch));
  return fuse_and_classify(g, t, audio_features(g, *audio), *head_);
}

std::vector<Logits> PunctuationModel::infer(const TextBatch& text, const AudioBatch* audio) {
  Graph g(false);
  const auto values = logits(g, text, audio).value().data();
  std::vector<Logits> out(text.batch);
  for (std::size_t b = 0; b < text.batch; ++b)
    for (std::size_t c = 0; c < kNumClasses; ++c) out[b][c] = values[b * kNumClasses + c];
  return out;
}

PunctClass predict(std::span<const double> logits) {
  if (logits.size() != kNumClasses)
    throw DimensionError("predict expects " + std::to_string(kNumClasses) + " logits, got " +
                         std::to_string(logits.size()));
  std::size_t best = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (!std::isfinite(logits[c])) throw ValidationError("non-finite logit for class " + std::to_string(c));
    if (logits[c] > logits[best]) best = c;
  }
  return class_from_index(best);
}

}  // namespace punct

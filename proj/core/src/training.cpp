// core/src/training.cpp
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

#include "punct/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

#include "json.hpp"
#include "punct/errors.hpp"
#include "punct/io.hpp"

namespace punct {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported by name.
class FieldReader {
 public:
  FieldReader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ValidationError("config: '" + where() + "' must be an object");
  }

  void size(const char* key, std::size_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<long long>() < 0))
        throw ValidationError("config: field '" + name(key) + "' must be a non-negative integer");
      out = v->get<std::size_t>();
    }
  }
  void u64(const char* key, std::uint64_t& out) {
    std::size_t v = out;
    size(key, v);
    out = v;
  }
  void real(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) throw ValidationError("config: field '" + name(key) + "' must be a number");
      out = v->get<double>();
    }
  }
  void boolean(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) throw ValidationError("config: field '" + name(key) + "' must be true or false");
      out = v->get<bool>();
    }
  }
  void string(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) throw ValidationError("config: field '" + name(key) + "' must be a string");
      out = v->get<std::string>();
    }
  }
  void sizes(const char* key, std::vector<std::size_t>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) throw ValidationError("config: field '" + name(key) + "' must be an array");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_unsigned()) throw ValidationError("config: field '" + name(key) + "' must hold integers");
        out.push_back(e.get<std::size_t>());
      }
    }
  }
  template <typename Fn>
  void object(const char* key, Fn&& fn) {
    if (const json* v = take(key)) {
      FieldReader sub(*v, name(key));
      fn(sub);
      sub.finish();
    }
  }
  const json* take(const char* key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }
  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (!seen_.count(key)) throw ValidationError("config: unknown field '" + name(key.c_str()) + "'");
  }
  std::string name(const char* key) const { return prefix_.empty() ? std::string(key) : prefix_ + "." + key; }

 private:
  std::string where() const { return prefix_.empty() ? "<root>" : prefix_; }

  const json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

json config_object(const TrainConfig& c) {
  return {
      {"encoder", std::string(encoder_name(c.encoder))},
      {"past_context", c.past_context},
      {"future_context", c.future_context},
      {"future_capacity", c.future_capacity},
      {"dropout",
       {{"token_drop", c.dropout.token_drop},
        {"half_future", c.dropout.half_future},
        {"no_future", c.dropout.no_future},
        {"token_swap", c.dropout.token_swap}}},
      {"multimodal", c.multimodal},
      {"batch_size", c.batch_size},
      {"steps", c.steps},
      {"lr", c.lr},
      {"seed", c.seed},
      {"sample_rate", c.sample_rate},
      {"transformer",
       {{"d_model", c.transformer.d_model},
        {"n_layers", c.transformer.n_layers},
        {"n_heads", c.transformer.n_heads},
        {"d_ff", c.transformer.d_ff}}},
      {"lstm", {{"d_embed", c.lstm.d_embed}, {"d_hidden", c.lstm.d_hidden}}},
      {"cnn",
       {{"d_embed", c.cnn.d_embed}, {"channels", c.cnn.channels}, {"n_layers", c.cnn.n_layers}, {"kernel", c.cnn.kernel}}},
      {"audio", {{"channels", c.audio.channels}, {"kernel", c.audio.kernel}, {"d_audio", c.audio.d_audio}}},
      {"features",
       {{"half_width_sec", c.features.half_width_sec},
        {"win_sec", c.features.stft.win_sec},
        {"hop_sec", c.features.stft.hop_sec},
        {"n_fft", c.features.stft.n_fft},
        {"n_mels", c.features.n_mels}}},
      {"head_hidden", c.head_hidden},
      {"validation_fraction", c.validation_fraction},
      {"log_every", c.log_every},
      {"corpus", c.corpus},
      {"vocab", c.vocab},
      {"audio_dir", c.audio_dir},
      {"feature_cache", c.feature_cache},
  };
}

TrainConfig config_from_object(const json& root) {
  TrainConfig c;
  FieldReader r(root, "");
  if (const json* v = r.take("encoder")) {
    if (!v->is_string()) throw ValidationError("config: field 'encoder' must be a string");
    c.encoder = parse_encoder_kind(v->get<std::string>());
  }
  r.size("past_context", c.past_context);
  r.size("future_context", c.future_context);
  r.size("future_capacity", c.future_capacity);
  if (const json* v = r.take("dropout")) {
    if (v->is_null() || (v->is_string() && v->get<std::string>() == "none")) {
      c.dropout = dropout_schedule_for_eval();
    } else {
      FieldReader d(*v, "dropout");
      d.real("token_drop", c.dropout.token_drop);
      d.real("half_future", c.dropout.half_future);
      d.real("no_future", c.dropout.no_future);
      d.real("token_swap", c.dropout.token_swap);
      d.finish();
    }
  }
  r.boolean("multimodal", c.multimodal);
  r.size("batch_size", c.batch_size);
  r.size("steps", c.steps);
  r.real("lr", c.lr);
  r.u64("seed", c.seed);
  r.real("sample_rate", c.sample_rate);
  r.object("transformer", [&](FieldReader& t) {
    t.size("d_model", c.transformer.d_model);
    t.size("n_layers", c.transformer.n_layers);
    t.size("n_heads", c.transformer.n_heads);
    t.size("d_ff", c.transformer.d_ff);
  });
  r.object("lstm", [&](FieldReader& t) {
    t.size("d_embed", c.lstm.d_embed);
    t.size("d_hidden", c.lstm.d_hidden);
  });
  r.object("cnn", [&](FieldReader& t) {
    t.size("d_embed", c.cnn.d_embed);
    t.size("channels", c.cnn.channels);
    t.size("n_layers", c.cnn.n_layers);
    t.size("kernel", c.cnn.kernel);
  });
  r.object("audio", [&](FieldReader& t) {
    t.sizes("channels", c.audio.channels);
    t.size("kernel", c.audio.kernel);
    t.size("d_audio", c.audio.d_audio);
  });
  r.object("features", [&](FieldReader& t) {
    t.real("half_width_sec", c.features.half_width_sec);
    t.real("win_sec", c.features.stft.win_sec);
    t.real("hop_sec", c.features.stft.hop_sec);
    t.size("n_fft", c.features.stft.n_fft);
    t.size("n_mels", c.features.n_mels);
  });
  r.size("head_hidden", c.head_hidden);
  r.real("validation_fraction", c.validation_fraction);
  r.size("log_every", c.log_every);
  r.string("corpus", c.corpus);
  r.string("vocab", c.vocab);
  r.string("audio_dir", c.audio_dir);
  r.string("feature_cache", c.feature_cache);
  r.finish();
  c.validate();
  return c;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t uint(std::size_t width) {
    need(width);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[at_ + i])) << (8 * i);
    at_ += width;
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(at_, n);
    at_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - at_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - at_ < n) throw CorruptFileError("checkpoint is truncated");
  }

  std::string_view bytes_;
  std::size_t at_ = 0;
};

constexpr std::string_view kMagic = "PUNCTCKP";

std::uint64_t model_seed(std::uint64_t seed) { return Rng::stream(seed, 0).next(); }

}  // namespace

void TrainConfig::validate() const {
  if (std::find(kContextGrid.begin(), kContextGrid.end(), future_context) == kContextGrid.end())
    throw ValidationError("future_context: " + std::to_string(future_context) +
                          " is not one of 0, 2, 4, 8, 16, 32");
  if (future_capacity < future_context)
    throw ValidationError("future_capacity: " + std::to_string(future_capacity) + " is smaller than future_context " +
                          std::to_string(future_context));
  dropout.validate();
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("lr must be a positive finite number");
  if (!(sample_rate > 0.0)) throw ValidationError("sample_rate must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ValidationError("validation_fraction must lie in [0, 1)");
  if (!(features.half_width_sec > 0.0)) throw ValidationError("features.half_width_sec must be positive");
  switch (encoder) {
    case EncoderKind::Transformer: transformer.validate(); break;
    case EncoderKind::Lstm: lstm.validate(); break;
    case EncoderKind::Cnn: cnn.validate(); break;
  }
  if (multimodal) model_config(Vocab::kNumReserved + 1).validate();
}

ModelConfig TrainConfig::model_config(std::size_t vocab_size) const {
  ModelConfig m;
  m.encoder = encoder;
  m.vocab_size = vocab_size;
  m.past_context = past_context;
  m.future_capacity = future_capacity;
  m.transformer = transformer;
  m.lstm = lstm;
  m.cnn = cnn;
  m.multimodal = multimodal;
  m.audio = audio;
  m.audio.n_frames = features.frame_count(sample_rate);
  m.audio.n_mels = features.n_mels;
  m.head_hidden = head_hidden;
  return m;
}

bool operator==(const TrainConfig& a, const TrainConfig& b) { return config_object(a) == config_object(b); }

std::string config_to_json(const TrainConfig& config) { return config_object(config).dump(2) + "\n"; }

TrainConfig config_from_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: malformed JSON: ") + e.what());
  }
  return config_from_object(root);
}

TrainConfig load_config(const std::filesystem::path& path) { return config_from_json(read_file(path)); }

BalancedSampler::BalancedSampler(std::span<const PunctClass> labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) by_class_[class_index(labels[i])].push_back(i);
  for (PunctClass c : kAllClasses)
    if (by_class_[class_index(c)].empty())
      throw ValidationError("balanced sampling: no training examples of class '" + std::string(class_name(c)) + "'");
}

std::size_t BalancedSampler::next(Rng& rng) const {
  const auto& pool = by_class_[rng.below(kNumClasses)];
  return pool[rng.below(pool.size())];
}

std::vector<TokenRef> all_tokens(std::span<const Utterance> corpus) {
  std::vector<TokenRef> refs;
  for (std::size_t u = 0; u < corpus.size(); ++u)
    for (std::size_t t = 0; t < corpus[u].size(); ++t) refs.push_back({u, t});
  return refs;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const auto tokens = ckpt.vocab.corpus_tokens();
  json header = {
      {"config", config_object(ckpt.config)},
      {"vocab", std::vector<std::string>(tokens.begin(), tokens.end())},
      {"vocab_hash", hex64(ckpt.vocab.hash())},
      {"seed", ckpt.config.seed},
  };
  const std::string header_text = header.dump();
  std::string out(kMagic);
  put_u32(out, kCheckpointVersion);
  put_u64(out, header_text.size());
  out += header_text;
  auto params = ckpt.model->parameters();
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put_u32(out, static_cast<std::uint32_t>(p.tensor->rank()));
    for (std::size_t d : p.tensor->shape()) put_u64(out, d);
    for (double v : p.tensor->data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  put_u64(out, fnv1a64(out));
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 4 || bytes.substr(0, kMagic.size()) != kMagic)
    throw CorruptFileError("not a punct checkpoint");
  ByteReader r(bytes.substr(kMagic.size()));
  const auto version = static_cast<std::uint32_t>(r.uint(4));
  if (version != kCheckpointVersion)
    throw VersionMismatchError("checkpoint format version " + std::to_string(version) + ", this build reads " +
                               std::to_string(kCheckpointVersion));
  if (bytes.size() < kMagic.size() + 4 + 8 + 8) throw CorruptFileError("checkpoint is truncated");
  const std::string_view body = bytes.substr(0, bytes.size() - 8);
  ByteReader tail(bytes.substr(bytes.size() - 8));
  if (tail.uint(8) != fnv1a64(body)) throw CorruptFileError("checkpoint checksum mismatch (truncated or corrupted)");

  ByteReader b(body.substr(kMagic.size() + 4));
  const std::size_t header_len = b.uint(8);
  json header;
  try {
    header = json::parse(b.take(header_len));
  } catch (const json::exception& e) {
    throw CorruptFileError(std::string("checkpoint header: ") + e.what());
  }
  Checkpoint ckpt;
  try {
    ckpt.config = config_from_object(header.at("config"));
    ckpt.vocab = Vocab(header.at("vocab").get<std::vector<std::string>>());
    if (header.at("vocab_hash").get<std::string>() != hex64(ckpt.vocab.hash()))
      throw CorruptFileError("checkpoint vocabulary hash mismatch");
  } catch (const json::exception& e) {
    throw CorruptFileError(std::string("checkpoint header: ") + e.what());
  }
  auto model = std::make_unique<PunctuationModel>(ckpt.config.model_config(ckpt.vocab.size()),
                                                  model_seed(ckpt.config.seed));
  auto params = model->parameters();
  const std::size_t count = b.uint(4);
  if (count != params.size())
    throw CorruptFileError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                           std::to_string(params.size()));
  for (auto& p : params) {
    const std::string name(b.take(b.uint(4)));
    if (name != p.name) throw CorruptFileError("checkpoint tensor '" + name + "' found where '" + p.name + "' expected");
    Shape shape(b.uint(4));
    for (auto& d : shape) d = b.uint(8);
    if (shape != p.tensor->shape())
      throw CorruptFileError("checkpoint tensor '" + name + "' has shape " + shape_string(shape) + ", expected " +
                             shape_string(p.tensor->shape()));
    for (double& v : p.tensor->data()) v = std::bit_cast<double>(b.uint(8));
  }
  if (b.remaining() != 0) throw CorruptFileError("checkpoint has trailing bytes");
  ckpt.model = std::move(model);
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return parse_checkpoint(read_file(path));
  } catch (const CorruptFileError& e) {
    throw CorruptFileError(path.string() + ": " + e.what());
  } catch (const VersionMismatchError& e) {
    throw VersionMismatchError(path.string() + ": " + e.what());
  }
}

Checkpoint initial_checkpoint(const TrainConfig& config, const Vocab& vocab) {
  config.validate();
  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.vocab = vocab;
  ckpt.model = std::make_unique<PunctuationModel>(config.model_config(vocab.size()), model_seed(config.seed));
  return ckpt;
}

TrainResult train(const TrainConfig& config, const Vocab& vocab, std::span<const Utterance> corpus,
                  const FeatureBank* audio, const LossCallback& on_log) {
  config.validate();
  if (config.multimodal) {
    if (!audio) throw ValidationError("multimodal training needs an audio source");
    for (const auto& u : corpus) {
      if (!u.alignments) throw ValidationError("multimodal training: utterance '" + u.source_id + "' has no alignments");
      if (!audio->contains(u.source_id))
        throw ValidationError("multimodal training: utterance '" + u.source_id + "' has no audio");
    }
  }
  TrainResult result{initial_checkpoint(config, vocab), {}};
  PunctuationModel& model = *result.checkpoint.model;

  const auto refs = all_tokens(corpus);
  std::vector<PunctClass> labels(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) labels[i] = corpus[refs[i].utterance].labels[refs[i].position];
  if (config.steps > 0 && refs.empty()) throw ValidationError("training corpus is empty");
  std::optional<BalancedSampler> sampler;
  if (config.steps > 0) sampler.emplace(labels);

  auto named = model.parameters();
  std::vector<Tensor*> params;
  for (auto& p : named) {
    p.tensor->set_requires_grad(true);
    params.push_back(p.tensor);
  }
  AdamState adam;
  const AdamOptions opts{config.lr};
  Rng rng = Rng::stream(config.seed, 1);
  std::vector<WindowExample> batch(config.batch_size);
  std::vector<std::size_t> targets(config.batch_size);
  double window_sum = 0.0;
  std::size_t window_n = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    AudioBatch audio_batch;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const TokenRef ref = refs[sampler->next(rng)];
      WindowExample ex = build_window(corpus[ref.utterance], ref.position, config.past_context, config.future_context);
      if (config.uses_dropout()) ex = apply_contextual_dropout(ex, config.dropout, rng, vocab.size());
      targets[b] = class_index(ex.gold);
      if (config.multimodal) audio_batch.append(audio->token(*ex.audio_ref));
      batch[b] = std::move(ex);
    }
    const TextBatch text = build_text_batch(batch, config.future_capacity);
    Graph g;
    Var loss = cross_entropy(model.logits(g, text, config.multimodal ? &audio_batch : nullptr), targets);
    const double value = loss.value().item();
    if (!std::isfinite(value))
      throw NonFiniteLossError("training loss became non-finite at step " + std::to_string(step + 1),
                               static_cast<long>(step + 1));
    g.backward(loss);
    adam_step(params, adam, opts);
    for (Tensor* p : params) p->zero_grad();
    result.losses.push_back(value);
    window_sum += value;
    ++window_n;
    if (on_log && config.log_every > 0 && ((step + 1) % config.log_every == 0 || step + 1 == config.steps)) {
      on_log(step + 1, window_sum / static_cast<double>(window_n));
      window_sum = 0.0;
      window_n = 0;
    }
  }
  for (Tensor* p : params) p->set_requires_grad(false);
  return result;
}

std::pair<std::vector<Utterance>, std::vector<Utterance>> split_corpus(std::span<const Utterance> corpus,
                                                                       double validation_fraction,
                                                                       std::uint64_t seed) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ValidationError("validation_fraction must lie in [0, 1)");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::stream(seed, 2);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(corpus.size())));
  std::vector<bool> is_val(corpus.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
  std::pair<std::vector<Utterance>, std::vector<Utterance>> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) (is_val[i] ? out.second : out.first).push_back(corpus[i]);
  return out;
}

std::vector<Logits> infer_windows(const Checkpoint& ckpt, std::span<const WindowExample> windows,
                                  const FeatureBank* audio, std::size_t batch_size) {
  const bool mm = ckpt.config.multimodal;
  if (mm && !audio) throw ValidationError("multimodal checkpoint needs an audio source");
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  std::vector<Logits> out;
  out.reserve(windows.size());
  for (std::size_t begin = 0; begin < windows.size(); begin += batch_size) {
    const auto chunk = windows.subspan(begin, std::min(batch_size, windows.size() - begin));
    for (const auto& w : chunk)
      if (w.future.size() > ckpt.config.future_capacity)
        throw ValidationError("window has " + std::to_string(w.future.size()) + " future slots, checkpoint holds " +
                              std::to_string(ckpt.config.future_capacity));
    const TextBatch text = build_text_batch(chunk, ckpt.config.future_capacity);
    AudioBatch audio_batch;
    if (mm)
      for (const auto& w : chunk) {
        if (!w.audio_ref) throw ValidationError("multimodal checkpoint: window has no audio reference");
        audio_batch.append(audio->token(*w.audio_ref));
      }
    auto logits = ckpt.model->infer(text, mm ? &audio_batch : nullptr);
    out.insert(out.end(), logits.begin(), logits.end());
  }
  return out;
}

}  // namespace punct

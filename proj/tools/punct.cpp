// tools/punct.cpp
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

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "punct/errors.hpp"
#include "punct/evaluation.hpp"
#include "punct/features.hpp"
#include "punct/io.hpp"
#include "punct/synth.hpp"
#include "punct/text.hpp"
#include "punct/training.hpp"
#include "punct/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace punct;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Provenance record written next to every artifact.
class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)), started_(utc_now()) {}

  void inputs(const json& settings) { settings_ = settings; }
  void seed(std::uint64_t s) { seed_ = s; }
  void corpus(const fs::path& path) {
    corpora_.push_back({{"path", path.string()}, {"hash", hex64(fnv1a64(read_file(path)))}});
  }
  void output(const fs::path& path) { outputs_.push_back(path.string()); }

  void write(const fs::path& path) const {
    json m = {
        {"command", command_},
        {"tool_version", std::string(kVersion)},
        {"config_hash", hex64(fnv1a64(settings_.dump()))},
        {"settings", settings_},
        {"corpora", corpora_},
        {"outputs", outputs_},
        {"started_at", started_},
        {"finished_at", utc_now()},
    };
    if (seed_) m["seed"] = *seed_;
    write_file_atomic(path, m.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::string started_;
  json settings_ = json::object();
  std::optional<std::uint64_t> seed_;
  json corpora_ = json::array();
  std::vector<std::string> outputs_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::vector<std::size_t> parse_grid(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || item.front() == '-')
      throw ValidationError("--grid: '" + item + "' is not a non-negative integer");
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("--grid: no contexts given");
  return out;
}

ClassMix parse_mix(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      throw ValidationError("--mix: '" + item + "' is not a number");
    }
  }
  if (v.size() != 4) throw ValidationError("--mix: expected comma,period,question,none shares");
  ClassMix m{v[0], v[1], v[2], v[3]};
  m.validate();
  return m;
}

// Audio for a corpus, from a feature cache or a directory of WAV files.
std::optional<FeatureBank> load_audio(std::span<const Utterance> corpus, const fs::path& features,
                                      const fs::path& audio_dir, const AudioFeatureConfig& config,
                                      double sample_rate) {
  if (!features.empty()) {
    FeatureBank bank = FeatureBank::load(features);
    if (!(bank.config() == config) || bank.sample_rate() != sample_rate)
      throw ValidationError("feature cache " + features.string() + " was computed with different audio parameters");
    for (const auto& u : corpus)
      if (!bank.contains(u.source_id))
        throw DataError("feature cache " + features.string() + " has no audio for '" + u.source_id + "'");
    return bank;
  }
  if (!audio_dir.empty()) return features_from_wav_dir(corpus, audio_dir, config, sample_rate);
  return std::nullopt;
}

std::string model_name(const std::string& spec, fs::path& path) {
  const auto eq = spec.find('=');
  if (eq != std::string::npos) {
    path = spec.substr(eq + 1);
    return spec.substr(0, eq);
  }
  path = spec;
  const fs::path parent = path.parent_path().filename();
  return parent.empty() ? path.stem().string() : parent.string();
}

// --------------------------------------------------------------------------

struct BuildVocabArgs {
  std::string corpus;
  std::size_t max_size = 10000;
  std::string out;
};

int cmd_build_vocab(const BuildVocabArgs& a) {
  Manifest m("build-vocab");
  m.inputs({{"corpus", a.corpus}, {"max_size", a.max_size}});
  const auto records = read_transcripts(a.corpus);
  m.corpus(a.corpus);
  const auto words = corpus_words(records);
  const Vocab vocab = build_vocab(words, a.max_size);
  const fs::path out = fs::path(a.out) / "vocab.txt";
  vocab.save(out);
  m.output(out);
  m.write(fs::path(a.out) / "vocab.manifest.json");
  std::cout << "vocabulary size " << vocab.size() << " (" << vocab.size() - Vocab::kNumReserved
            << " corpus tokens) -> " << out.string() << "\n";
  return 0;
}

struct SynthArgs {
  std::size_t size = 100;
  std::uint64_t seed = 0;
  std::string style = "ted";
  std::string mix;
  std::size_t min_sentences = CorpusSpec{}.min_sentences;
  std::size_t max_sentences = CorpusSpec{}.max_sentences;
  std::string id_prefix = "synth";
  bool no_audio = false;
  std::string out;
};

int cmd_synth_data(const SynthArgs& a) {
  CorpusSpec spec;
  spec.utterances = a.size;
  spec.seed = a.seed;
  spec.style = parse_style(a.style);
  if (!a.mix.empty()) spec.mix = parse_mix(a.mix);
  spec.min_sentences = a.min_sentences;
  spec.max_sentences = a.max_sentences;
  spec.id_prefix = a.id_prefix;
  spec.validate();
  Manifest m("synth-data");
  m.seed(a.seed);
  m.inputs({{"size", a.size},
            {"style", a.style},
            {"mix", {spec.mix.comma, spec.mix.period, spec.mix.question, spec.mix.none}},
            {"min_sentences", a.min_sentences},
            {"max_sentences", a.max_sentences},
            {"id_prefix", a.id_prefix},
            {"audio", !a.no_audio}});
  auto records = synth_corpus(spec);
  const fs::path out(a.out);
  if (!a.no_audio) {
    const std::uint64_t audio_seed = Rng::stream(a.seed, ~0ull).next();
    const SynthProfile profile;
    for (std::size_t i = 0; i < records.size(); ++i) {
      Rng rng = Rng::stream(audio_seed, i);
      SynthResult s = synth_record_audio(records[i], profile, rng);
      records[i].alignment = s.alignments;
      const fs::path wav = out / "audio" / (records[i].id + ".wav");
      write_wav(wav, s.audio);
    }
    m.output(out / "audio");
  }
  const fs::path transcripts = out / "transcripts.jsonl";
  write_transcripts(transcripts, records);
  m.output(transcripts);
  m.write(out / "synth.manifest.json");
  std::cout << "wrote " << records.size() << " utterances to " << transcripts.string()
            << (a.no_audio ? "" : " with audio") << "\n";
  return 0;
}

struct PrepareArgs {
  std::string corpus;
  std::string audio_dir;
  std::string config;
  std::string out;
};

int cmd_prepare(const PrepareArgs& a) {
  TrainConfig cfg;
  if (!a.config.empty()) cfg = load_config(a.config);
  Manifest m("prepare");
  m.inputs({{"corpus", a.corpus}, {"audio_dir", a.audio_dir}, {"features", json::parse(config_to_json(cfg))["features"]}});
  const auto records = read_transcripts(a.corpus);
  m.corpus(a.corpus);
  const auto corpus = make_utterances(records, Vocab());
  const fs::path out(a.out);
  const CorpusStats stats = corpus_stats(corpus);
  json counts = json::object();
  for (PunctClass c : kAllClasses) counts[std::string(class_name(c))] = stats.count(c);
  const fs::path stats_path = out / "corpus_stats.json";
  write_file_atomic(stats_path, json{{"utterances", corpus.size()}, {"tokens", stats.total}, {"counts", counts}}.dump(2) + "\n");
  m.output(stats_path);
  if (!a.audio_dir.empty()) {
    const FeatureBank bank = features_from_wav_dir(corpus, a.audio_dir, cfg.features, cfg.sample_rate);
    const fs::path cache = out / "features.bin";
    bank.save(cache);
    m.output(cache);
    m.output(cache.string() + ".json");
    std::cout << "cached audio features for " << bank.size() << " utterances -> " << cache.string() << "\n";
  }
  m.write(out / "prepare.manifest.json");
  std::cout << corpus.size() << " utterances, " << stats.total << " tokens:";
  for (PunctClass c : kAllClasses) std::cout << " " << class_name(c) << "=" << stats.count(c);
  std::cout << "\n";
  return 0;
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> future_context;
  std::optional<bool> multimodal;
  std::string out;
};

int cmd_train(const TrainArgs& a) {
  TrainConfig cfg = load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.future_context) {
    cfg.future_context = *a.future_context;
    cfg.future_capacity = std::max(cfg.future_capacity, cfg.future_context);
  }
  if (a.multimodal) cfg.multimodal = *a.multimodal;
  cfg.validate();
  const fs::path base = fs::path(a.config).parent_path();
  if (cfg.corpus.empty()) throw ValidationError("config: field 'corpus' is required");
  if (cfg.vocab.empty()) throw ValidationError("config: field 'vocab' is required");
  if (cfg.multimodal && cfg.audio_dir.empty() && cfg.feature_cache.empty())
    throw ValidationError("config: multimodal training needs 'audio_dir' or 'feature_cache'");
  const fs::path corpus_path = resolve(base, cfg.corpus);

  Manifest m("train");
  m.seed(cfg.seed);
  m.inputs(json::parse(config_to_json(cfg)));
  const Vocab vocab = Vocab::load(resolve(base, cfg.vocab));
  const auto records = read_transcripts(corpus_path);
  m.corpus(corpus_path);
  const auto corpus = make_utterances(records, vocab);
  auto [train_set, val_set] = split_corpus(corpus, cfg.validation_fraction, cfg.seed);
  std::optional<FeatureBank> bank;
  if (cfg.multimodal)
    bank = load_audio(corpus, resolve(base, cfg.feature_cache), resolve(base, cfg.audio_dir), cfg.features,
                      cfg.sample_rate);

  std::cout << "training " << encoder_name(cfg.encoder) << " C_T=" << cfg.future_context
            << (cfg.uses_dropout() ? " dropout" : "") << (cfg.multimodal ? " multimodal" : "") << " on "
            << train_set.size() << " utterances for " << cfg.steps << " steps\n";
  const auto result = train(cfg, vocab, train_set, bank ? &*bank : nullptr, [](std::size_t step, double loss) {
    std::printf("step %zu loss %.6f\n", step, loss);
    std::fflush(stdout);
  });
  const fs::path out(a.out);
  const fs::path ckpt = out / "checkpoint.bin";
  save_checkpoint(result.checkpoint, ckpt);
  m.output(ckpt);
  const fs::path cfg_out = out / "config.json";
  write_file_atomic(cfg_out, config_to_json(cfg));
  m.output(cfg_out);
  if (!val_set.empty()) {
    const EvalReport r = evaluate(result.checkpoint, val_set, cfg.future_context, bank ? &*bank : nullptr,
                                  out.filename().string(), corpus_path.string() + "#validation");
    const fs::path val = out / "validation.json";
    write_file_atomic(val, report_to_json(r));
    m.output(val);
    std::printf("validation mean F1 %.4f at C_E=%zu\n", r.metrics.mean_f1, cfg.future_context);
  }
  m.write(out / "train.manifest.json");
  std::cout << "checkpoint -> " << ckpt.string() << "\n";
  return 0;
}

struct AudioArgs {
  std::string features;
  std::string audio_dir;
};

std::optional<FeatureBank> audio_for(std::span<const Utterance> corpus, const AudioArgs& a,
                                     const TrainConfig& cfg) {
  return load_audio(corpus, a.features, a.audio_dir, cfg.features, cfg.sample_rate);
}

struct EvalArgs {
  std::string checkpoint;
  std::string corpus;
  std::size_t future_context = 0;
  std::string name;
  AudioArgs audio;
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  Manifest m("eval");
  m.inputs({{"checkpoint", a.checkpoint},
            {"corpus", a.corpus},
            {"future_context", a.future_context},
            {"features", a.audio.features},
            {"audio_dir", a.audio.audio_dir}});
  fs::path ckpt_path;
  std::string name = model_name(a.checkpoint, ckpt_path);
  if (!a.name.empty()) name = a.name;
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  m.seed(ckpt.config.seed);
  const auto corpus = make_utterances(read_transcripts(a.corpus), ckpt.vocab);
  m.corpus(a.corpus);
  std::optional<FeatureBank> bank;
  if (ckpt.config.multimodal) {
    bank = audio_for(corpus, a.audio, ckpt.config);
    if (!bank) throw ValidationError("multimodal checkpoint needs --features or --audio-dir");
  }
  SweepResult one{{evaluate(ckpt, corpus, a.future_context, bank ? &*bank : nullptr, name, a.corpus)}};
  const fs::path out(a.out);
  const std::string stem = "eval_C" + std::to_string(a.future_context);
  write_file_atomic(out / (stem + ".json"), report_to_json(one.reports[0]));
  write_file_atomic(out / (stem + ".csv"), sweep_to_csv(one));
  m.output(out / (stem + ".json"));
  m.output(out / (stem + ".csv"));
  m.write(out / (stem + ".manifest.json"));
  const auto& r = one.reports[0].metrics;
  std::printf("%s C_E=%zu mean F1 %.4f (comma %.4f, period %.4f, question %.4f, none %.4f)\n", name.c_str(),
              a.future_context, r.mean_f1, r.at(PunctClass::Comma).f1, r.at(PunctClass::Period).f1,
              r.at(PunctClass::Question).f1, r.at(PunctClass::None).f1);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

struct SweepArgs {
  std::vector<std::string> checkpoints;
  std::string corpus;
  std::string grid = "0,2,4,8,16,32";
  AudioArgs audio;
  std::string out;
};

int cmd_sweep(const SweepArgs& a) {
  Manifest m("sweep");
  m.inputs({{"checkpoints", a.checkpoints},
            {"corpus", a.corpus},
            {"grid", a.grid},
            {"features", a.audio.features},
            {"audio_dir", a.audio.audio_dir}});
  const auto grid = parse_grid(a.grid);
  std::vector<std::string> names;
  std::vector<Checkpoint> ckpts;
  for (const auto& spec : a.checkpoints) {
    fs::path path;
    names.push_back(model_name(spec, path));
    ckpts.push_back(load_checkpoint(path));
  }
  std::vector<SweepModel> models;
  for (std::size_t i = 0; i < ckpts.size(); ++i) models.push_back({names[i], &ckpts[i]});
  if (models.empty()) throw ValidationError("sweep needs at least one --checkpoint");
  for (const auto& c : ckpts)
    if (!(c.vocab == ckpts.front().vocab)) throw ValidationError("sweep checkpoints do not share a vocabulary");
  const auto corpus = make_utterances(read_transcripts(a.corpus), ckpts.front().vocab);
  m.corpus(a.corpus);
  std::optional<FeatureBank> bank;
  for (const auto& c : ckpts)
    if (c.config.multimodal && !bank) {
      bank = audio_for(corpus, a.audio, c.config);
      if (!bank) throw ValidationError("multimodal checkpoint needs --features or --audio-dir");
    }
  for (const auto& c : ckpts)
    if (c.config.multimodal && !(c.config.features == bank->config()))
      throw ValidationError("sweep multimodal checkpoints use different audio parameters");
  const SweepResult sweep = context_sweep(models, corpus, grid, bank ? &*bank : nullptr, a.corpus);
  const fs::path out(a.out);
  write_file_atomic(out / "sweep.json", sweep_to_json(sweep));
  write_file_atomic(out / "sweep.csv", sweep_to_csv(sweep));
  m.output(out / "sweep.json");
  m.output(out / "sweep.csv");
  m.write(out / "sweep.manifest.json");
  std::cout << sweep_to_csv(sweep);
  return 0;
}

struct PredictArgs {
  std::string checkpoint;
  std::string text;
  std::string input;
  std::string wav;
  std::string alignment;
  std::optional<std::size_t> future_context;
  std::string out;
};

std::vector<Alignment> read_alignment(const fs::path& path) {
  try {
    std::vector<Alignment> out;
    for (const auto& pair : json::parse(read_file(path))) out.push_back({pair.at(0).get<double>(), pair.at(1).get<double>()});
    return out;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": alignment must be a JSON list of [start_sec, end_sec]: " + e.what());
  }
}

int cmd_predict(const PredictArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const std::size_t ce = a.future_context.value_or(ckpt.config.future_context);
  std::vector<std::string> lines;
  if (!a.text.empty()) lines.push_back(a.text);
  if (!a.input.empty()) {
    std::stringstream ss(read_file(a.input));
    for (std::string line; std::getline(ss, line);)
      if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
  }
  if (lines.empty()) throw ValidationError("predict needs --text or --input");
  const bool mm = ckpt.config.multimodal;
  if (mm && (a.wav.empty() || a.alignment.empty()))
    throw ValidationError("multimodal checkpoint needs --wav and --alignment");
  if (mm && lines.size() != 1) throw ValidationError("multimodal prediction takes a single utterance");

  std::string result;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const ParsedTranscript parsed = parse_transcript(lines[i]);
    if (parsed.words.empty()) {
      result += "\n";
      continue;
    }
    Utterance u;
    u.source_id = "input-" + std::to_string(i);
    u.tokens = ckpt.vocab.encode(parsed.words);
    u.labels.assign(u.tokens.size(), PunctClass::None);
    std::optional<FeatureBank> bank;
    if (mm) {
      u.alignments = read_alignment(a.alignment);
      u.validate();
      bank.emplace(ckpt.config.features, ckpt.config.sample_rate);
      bank->add(u, read_wav(a.wav));
    }
    const std::vector<Utterance> one{u};
    const auto labels = predict_corpus(ckpt, one, ce, bank ? &*bank : nullptr);
    result += render_transcript(parsed.words, labels) + "\n";
  }
  std::cout << result;
  if (!a.out.empty()) {
    Manifest m("predict");
    m.inputs({{"checkpoint", a.checkpoint}, {"text", a.text}, {"input", a.input}, {"future_context", ce}});
    m.seed(ckpt.config.seed);
    const fs::path out = fs::path(a.out) / "prediction.txt";
    write_file_atomic(out, result);
    m.output(out);
    m.write(fs::path(a.out) / "predict.manifest.json");
  }
  return 0;
}

void add_audio_flags(CLI::App* cmd, AudioArgs& a) {
  cmd->add_option("--features", a.features, "Feature cache written by 'prepare'");
  cmd->add_option("--audio-dir", a.audio_dir, "Directory of <utterance id>.wav files");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Punctuation prediction from text and audio"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  BuildVocabArgs bv;
  auto* c_bv = app.add_subcommand("build-vocab", "Build a vocabulary from a transcript corpus");
  c_bv->add_option("--corpus", bv.corpus, "Transcript JSONL")->required();
  c_bv->add_option("--max-size", bv.max_size, "Vocabulary size including the 4 reserved tokens");
  c_bv->add_option("--out", bv.out, "Output directory")->required();

  SynthArgs sd;
  auto* c_sd = app.add_subcommand("synth-data", "Generate a synthetic transcript corpus with paired audio");
  c_sd->add_option("--size", sd.size, "Number of utterances");
  c_sd->add_option("--seed", sd.seed, "Random seed");
  c_sd->add_option("--style", sd.style, "ted or podcast");
  c_sd->add_option("--mix", sd.mix, "Label shares comma,period,question,none");
  c_sd->add_option("--min-sentences", sd.min_sentences, "Fewest sentences per utterance");
  c_sd->add_option("--max-sentences", sd.max_sentences, "Most sentences per utterance");
  c_sd->add_option("--id-prefix", sd.id_prefix, "Utterance id prefix");
  c_sd->add_flag("--no-audio", sd.no_audio, "Write transcripts only");
  c_sd->add_option("--out", sd.out, "Output directory")->required();

  PrepareArgs pr;
  auto* c_pr = app.add_subcommand("prepare", "Validate a corpus and cache its audio features");
  c_pr->add_option("--corpus", pr.corpus, "Transcript JSONL")->required();
  c_pr->add_option("--audio-dir", pr.audio_dir, "Directory of <utterance id>.wav files");
  c_pr->add_option("--config", pr.config, "Training config supplying the feature parameters");
  c_pr->add_option("--out", pr.out, "Output directory")->required();

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train a model from a JSON config");
  c_tr->add_option("--config", tr.config, "Training config (JSON)")->required();
  c_tr->add_option("--seed", tr.seed, "Override the config seed");
  c_tr->add_option("--future-context", tr.future_context, "Override the training future context C_T");
  c_tr->add_option("--multimodal", tr.multimodal, "Override text+audio fusion (true/false)");
  c_tr->add_option("--out", tr.out, "Output directory")->required();

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Evaluate a checkpoint at one future context");
  c_ev->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  c_ev->add_option("--corpus", ev.corpus, "Transcript JSONL")->required();
  c_ev->add_option("--future-context", ev.future_context, "Evaluation future context C_E")->required();
  c_ev->add_option("--name", ev.name, "Model name in the report");
  add_audio_flags(c_ev, ev.audio);
  c_ev->add_option("--out", ev.out, "Output directory")->required();

  SweepArgs sw;
  auto* c_sw = app.add_subcommand("sweep", "Evaluate checkpoints over a grid of future contexts");
  c_sw->add_option("--checkpoint", sw.checkpoints, "[NAME=]PATH, repeatable")->required();
  c_sw->add_option("--corpus", sw.corpus, "Transcript JSONL")->required();
  c_sw->add_option("--grid", sw.grid, "Comma-separated evaluation contexts");
  add_audio_flags(c_sw, sw.audio);
  c_sw->add_option("--out", sw.out, "Output directory")->required();

  PredictArgs pd;
  auto* c_pd = app.add_subcommand("predict", "Punctuate raw text");
  c_pd->add_option("--checkpoint", pd.checkpoint, "Checkpoint file")->required();
  c_pd->add_option("--text", pd.text, "Text to punctuate");
  c_pd->add_option("--input", pd.input, "File with one utterance per line");
  c_pd->add_option("--wav", pd.wav, "Audio for a multimodal checkpoint");
  c_pd->add_option("--alignment", pd.alignment, "JSON list of [start_sec, end_sec] per word");
  c_pd->add_option("--future-context", pd.future_context, "Evaluation future context (default: C_T)");
  c_pd->add_option("--out", pd.out, "Also write prediction.txt here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    if (*c_bv) return cmd_build_vocab(bv);
    if (*c_sd) return cmd_synth_data(sd);
    if (*c_pr) return cmd_prepare(pr);
    if (*c_tr) return cmd_train(tr);
    if (*c_ev) return cmd_eval(ev);
    if (*c_sw) return cmd_sweep(sw);
    if (*c_pd) return cmd_predict(pd);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

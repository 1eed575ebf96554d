// core/src/evaluation.cpp
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

#include "punct/evaluation.hpp"

#include <cstdio>

#include "json.hpp"
#include "punct/errors.hpp"

namespace punct {

using nlohmann::json;

namespace {

void check_lengths(std::span<const PunctClass> preds, std::span<const PunctClass> golds) {
  if (preds.size() != golds.size())
    throw ValidationError("predictions (" + std::to_string(preds.size()) + ") and gold labels (" +
                          std::to_string(golds.size()) + ") differ in length");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

json report_object(const EvalReport& r) {
  json classes = json::object();
  for (PunctClass c : kAllClasses) {
    const auto& m = r.metrics.at(c);
    classes[std::string(class_name(c))] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                                           {"support", m.support},     {"tp", m.tp},         {"fp", m.fp},
                                           {"fn", m.fn}};
  }
  json counts = json::array();
  json percents = json::array();
  const auto pct = row_percentages(r.metrics.confusion);
  for (std::size_t g = 0; g < kNumClasses; ++g) {
    counts.push_back(r.metrics.confusion[g]);
    percents.push_back(pct[g]);
  }
  std::vector<std::string> order;
  for (PunctClass c : kAllClasses) order.emplace_back(class_name(c));
  return {
      {"meta",
       {{"model", r.meta.model},
        {"encoder", r.meta.encoder},
        {"C_T", r.meta.train_context},
        {"C_E", r.meta.eval_context},
        {"dropout", r.meta.dropout},
        {"multimodal", r.meta.multimodal},
        {"corpus", r.meta.corpus}}},
      {"classes", classes},
      {"mean_f1", r.metrics.mean_f1},
      {"mean_f1_with_none", r.metrics.mean_f1_with_none},
      {"total", r.metrics.total},
      {"confusion", {{"order", order}, {"counts", counts}, {"row_percent", percents}}},
      {"warnings", r.metrics.warnings},
  };
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const PunctClass> preds, std::span<const PunctClass> golds) {
  check_lengths(preds, golds);
  ConfusionMatrix m{};
  for (std::size_t i = 0; i < preds.size(); ++i) ++m[class_index(golds[i])][class_index(preds[i])];
  return m;
}

std::array<std::array<double, kNumClasses>, kNumClasses> row_percentages(const ConfusionMatrix& m) {
  std::array<std::array<double, kNumClasses>, kNumClasses> out{};
  for (std::size_t g = 0; g < kNumClasses; ++g) {
    std::size_t row = 0;
    for (auto v : m[g]) row += v;
    if (row == 0) continue;
    for (std::size_t p = 0; p < kNumClasses; ++p)
      out[g][p] = 100.0 * static_cast<double>(m[g][p]) / static_cast<double>(row);
  }
  return out;
}

Metrics f1_scores(std::span<const PunctClass> preds, std::span<const PunctClass> golds) {
  check_lengths(preds, golds);
  if (preds.empty()) throw ValidationError("cannot score an empty prediction set");
  Metrics out;
  out.confusion = confusion_matrix(preds, golds);
  out.total = preds.size();
  double sum = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    ClassMetrics& m = out.per_class[c];
    m.tp = out.confusion[c][c];
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      m.support += out.confusion[c][k];
      if (k != c) {
        m.fn += out.confusion[c][k];
        m.fp += out.confusion[k][c];
      }
    }
    m.precision = m.tp + m.fp == 0 ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    m.recall = m.tp + m.fn == 0 ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    sum += m.f1;
    const auto cls = class_from_index(c);
    if (cls != PunctClass::None) {
      out.mean_f1 += m.f1;
      if (m.support == 0)
        out.warnings.push_back("class '" + std::string(class_name(cls)) + "' has no gold support");
    }
  }
  out.mean_f1 /= 3.0;
  out.mean_f1_with_none = sum / static_cast<double>(kNumClasses);
  return out;
}

std::string report_to_json(const EvalReport& report) { return report_object(report).dump(2) + "\n"; }

std::vector<WindowExample> evaluation_windows(std::span<const Utterance> corpus, std::size_t past_context,
                                              std::size_t eval_context) {
  std::vector<WindowExample> out;
  for (const auto& u : corpus)
    for (std::size_t t = 0; t < u.size(); ++t) out.push_back(build_window(u, t, past_context, eval_context));
  return out;
}

std::vector<PunctClass> predict_corpus(const Checkpoint& ckpt, std::span<const Utterance> corpus,
                                       std::size_t eval_context, const FeatureBank* audio) {
  const TrainConfig& c = ckpt.config;
  if (eval_context > c.future_capacity)
    throw ValidationError("future context " + std::to_string(eval_context) + " exceeds the checkpoint capacity " +
                          std::to_string(c.future_capacity));
  if (c.multimodal) {
    if (!audio) throw ValidationError("multimodal checkpoint needs an audio source");
    for (const auto& u : corpus)
      if (!u.alignments) throw ValidationError("utterance '" + u.source_id + "' has no alignments");
  }
  const auto windows = evaluation_windows(corpus, c.past_context, eval_context);
  const auto logits = infer_windows(ckpt, windows, c.multimodal ? audio : nullptr);
  std::vector<PunctClass> preds;
  preds.reserve(logits.size());
  for (const auto& l : logits) preds.push_back(predict(l));
  return preds;
}

EvalReport evaluate(const Checkpoint& ckpt, std::span<const Utterance> corpus, std::size_t eval_context,
                    const FeatureBank* audio, const std::string& model_id, const std::string& corpus_id) {
  const auto preds = predict_corpus(ckpt, corpus, eval_context, audio);
  std::vector<PunctClass> golds;
  golds.reserve(preds.size());
  for (const auto& u : corpus) golds.insert(golds.end(), u.labels.begin(), u.labels.end());
  EvalReport r;
  r.meta = {model_id,
            std::string(encoder_name(ckpt.config.encoder)),
            ckpt.config.future_context,
            eval_context,
            ckpt.config.uses_dropout(),
            ckpt.config.multimodal,
            corpus_id};
  r.metrics = f1_scores(preds, golds);
  return r;
}

SweepResult context_sweep(std::span<const SweepModel> models, std::span<const Utterance> corpus,
                          std::span<const std::size_t> eval_contexts, const FeatureBank* audio,
                          const std::string& corpus_id) {
  for (const auto& m : models) {
    if (!m.checkpoint) throw ValidationError("sweep model '" + m.name + "' has no checkpoint");
    if (!(m.checkpoint->vocab == models.front().checkpoint->vocab))
      throw ValidationError("sweep model '" + m.name + "' uses a different vocabulary from '" +
                            models.front().name + "'");
  }
  SweepResult out;
  for (const auto& m : models)
    for (std::size_t ce : eval_contexts) out.reports.push_back(evaluate(*m.checkpoint, corpus, ce, audio, m.name, corpus_id));
  return out;
}

std::string sweep_to_csv(const SweepResult& sweep) {
  std::string out(kSweepCsvHeader);
  out += '\n';
  for (const auto& r : sweep.reports) {
    const auto& m = r.metrics;
    out += csv_field(r.meta.model) + ',' + r.meta.encoder + ',' + std::to_string(r.meta.train_context) + ',' +
           std::to_string(r.meta.eval_context) + ',' + (r.meta.dropout ? "true" : "false") + ',' +
           (r.meta.multimodal ? "true" : "false") + ',' + fixed(m.mean_f1) + ',' +
           fixed(m.at(PunctClass::Comma).f1) + ',' + fixed(m.at(PunctClass::Period).f1) + ',' +
           fixed(m.at(PunctClass::Question).f1) + ',' + fixed(m.at(PunctClass::None).f1) + '\n';
  }
  return out;
}

std::string sweep_to_json(const SweepResult& sweep) {
  json rows = json::array();
  for (const auto& r : sweep.reports) rows.push_back(report_object(r));
  return json{{"reports", rows}}.dump(2) + "\n";
}

}  // namespace punct

// core/include/punct/evaluation.hpp
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

// Per-class and mean F1, confusion matrices, checkpoint evaluation at a fixed
// future context, and the training-context by evaluation-context sweep.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "punct/features.hpp"
#include "punct/text.hpp"
#include "punct/training.hpp"

namespace punct {

// Rows are gold classes, columns predicted, both in class_index order.
using ConfusionMatrix = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;

struct ClassMetrics {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t support = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct Metrics {
  std::array<ClassMetrics, kNumClasses> per_class{};
  // Unweighted mean over comma, period and question.
  double mean_f1 = 0.0;
  // Unweighted mean over all four classes.
  double mean_f1_with_none = 0.0;
  ConfusionMatrix confusion{};
  std::size_t total = 0;
  std::vector<std::string> warnings;

  const ClassMetrics& at(PunctClass c) const { return per_class[class_index(c)]; }
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

// Throws ValidationError on a length mismatch.
ConfusionMatrix confusion_matrix(std::span<const PunctClass> preds, std::span<const PunctClass> golds);
// Percentages of each gold row; an empty row stays zero.
std::array<std::array<double, kNumClasses>, kNumClasses> row_percentages(const ConfusionMatrix& m);

// Throws ValidationError on a length mismatch or empty input. A punctuation
// class with no gold support adds a warning.
Metrics f1_scores(std::span<const PunctClass> preds, std::span<const PunctClass> golds);

struct EvalMetadata {
  std::string model;
  std::string encoder;
  std::size_t train_context = 0;
  std::size_t eval_context = 0;
  bool dropout = false;
  bool multimodal = false;
  std::string corpus;

  friend bool operator==(const EvalMetadata&, const EvalMetadata&) = default;
};

struct EvalReport {
  EvalMetadata meta;
  Metrics metrics;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

std::string report_to_json(const EvalReport& report);

// Windows for every token with the future cut to `eval_context` slots.
std::vector<WindowExample> evaluation_windows(std::span<const Utterance> corpus, std::size_t past_context,
                                              std::size_t eval_context);

// Predicted class for every token, in corpus order.
std::vector<PunctClass> predict_corpus(const Checkpoint& ckpt, std::span<const Utterance> corpus,
                                       std::size_t eval_context, const FeatureBank* audio = nullptr);

// Throws ValidationError when eval_context exceeds the checkpoint's future
// capacity or a multimodal checkpoint has no audio source.
EvalReport evaluate(const Checkpoint& ckpt, std::span<const Utterance> corpus, std::size_t eval_context,
                    const FeatureBank* audio = nullptr, const std::string& model_id = "",
                    const std::string& corpus_id = "");

struct SweepModel {
  std::string name;
  const Checkpoint* checkpoint = nullptr;
};

struct SweepResult {
  std::vector<EvalReport> reports;
};

// Every model at every evaluation context, models outermost. Throws
// ValidationError when the checkpoints do not share a vocabulary.
SweepResult context_sweep(std::span<const SweepModel> models, std::span<const Utterance> corpus,
                          std::span<const std::size_t> eval_contexts, const FeatureBank* audio = nullptr,
                          const std::string& corpus_id = "");

inline constexpr std::string_view kSweepCsvHeader =
    "model,encoder,C_T,C_E,dropout,multimodal,mean_f1,f1_comma,f1_period,f1_question,f1_none";

std::string sweep_to_csv(const SweepResult& sweep);
std::string sweep_to_json(const SweepResult& sweep);

}  // namespace punct

// tests/unit/evaluation_test.cpp
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

#include <cmath>

#include "punct/errors.hpp"
#include "punct/evaluation.hpp"

namespace punct {
namespace {

std::vector<PunctClass> random_labels(Rng& rng, std::size_t n) {
  std::vector<PunctClass> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(class_from_index(rng.below(4)));
  return out;
}

TEST(Metrics, PerfectPredictions) {
  std::vector<PunctClass> g{PunctClass::Comma, PunctClass::Period, PunctClass::Question, PunctClass::None,
                            PunctClass::None};
  const Metrics m = f1_scores(g, g);
  for (PunctClass c : kAllClasses) EXPECT_EQ(m.at(c).f1, 1.0);
  EXPECT_EQ(m.mean_f1, 1.0);
  EXPECT_EQ(m.mean_f1_with_none, 1.0);
  EXPECT_TRUE(m.warnings.empty());
  const auto cm = confusion_matrix(g, g);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (i != j) EXPECT_EQ(cm[i][j], 0u);
}

TEST(Metrics, AllNoneHasNoPunctuationSupport) {
  std::vector<PunctClass> g(10, PunctClass::None);
  const Metrics m = f1_scores(g, g);
  EXPECT_EQ(m.mean_f1, 0.0);
  EXPECT_EQ(m.at(PunctClass::None).f1, 1.0);
  EXPECT_EQ(m.mean_f1_with_none, 0.25);
  EXPECT_EQ(m.warnings.size(), 3u);
}

TEST(Metrics, SingleOffDiagonal) {
  std::vector<PunctClass> p{PunctClass::Comma}, g{PunctClass::Period};
  const auto cm = confusion_matrix(p, g);
  std::size_t total = 0;
  for (auto& row : cm)
    for (auto v : row) total += v;
  EXPECT_EQ(total, 1u);
  EXPECT_EQ(cm[class_index(PunctClass::Period)][class_index(PunctClass::Comma)], 1u);
}

TEST(Metrics, MatchesCountingOracle) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_labels(rng, 200), g = random_labels(rng, 200);
    const Metrics m = f1_scores(p, g);
    double mean = 0;
    for (PunctClass c : kAllClasses) {
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        tp += p[i] == c && g[i] == c;
        fp += p[i] == c && g[i] != c;
        fn += p[i] != c && g[i] == c;
      }
      const double prec = tp + fp ? double(tp) / (tp + fp) : 0.0;
      const double rec = tp + fn ? double(tp) / (tp + fn) : 0.0;
      const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
      EXPECT_EQ(m.at(c).tp, tp);
      EXPECT_EQ(m.at(c).fp, fp);
      EXPECT_EQ(m.at(c).fn, fn);
      EXPECT_EQ(m.at(c).precision, prec);
      EXPECT_EQ(m.at(c).recall, rec);
      EXPECT_EQ(m.at(c).f1, f1);
      if (c != PunctClass::None) mean += f1;
    }
    EXPECT_DOUBLE_EQ(m.mean_f1, mean / 3);
    const auto cm = confusion_matrix(p, g);
    std::size_t total = 0;
    for (PunctClass c : kAllClasses) {
      std::size_t row = 0, gold = 0;
      for (auto v : cm[class_index(c)]) row += v;
      for (auto x : g) gold += x == c;
      EXPECT_EQ(row, gold);
      total += row;
    }
    EXPECT_EQ(total, 200u);
  }
}

TEST(Metrics, RowPercentages) {
  std::vector<PunctClass> p{PunctClass::Comma, PunctClass::None, PunctClass::None, PunctClass::None};
  std::vector<PunctClass> g{PunctClass::Comma, PunctClass::Comma, PunctClass::Comma, PunctClass::None};
  const auto pct = row_percentages(confusion_matrix(p, g));
  EXPECT_DOUBLE_EQ(pct[0][0], 100.0 / 3);
  EXPECT_DOUBLE_EQ(pct[0][3], 200.0 / 3);
  EXPECT_EQ(pct[1][1], 0.0);
  EXPECT_EQ(pct[3][3], 100.0);
}

TEST(Metrics, Errors) {
  std::vector<PunctClass> a(3, PunctClass::None), b(2, PunctClass::None), empty;
  EXPECT_THROW(f1_scores(a, b), ValidationError);
  EXPECT_THROW(f1_scores(empty, empty), ValidationError);
  EXPECT_THROW(confusion_matrix(a, b), ValidationError);
}

class EvalFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    std::vector<std::string> words;
    for (int i = 0; i < 16; ++i) words.push_back("w" + std::to_string(i));
    vocab = Vocab(words);
    Rng rng(3);
    for (int k = 0; k < 3; ++k) {
      Utterance u;
      u.source_id = "e" + std::to_string(k);
      for (int i = 0; i < 10; ++i) {
        u.tokens.push_back(static_cast<TokenId>(4 + rng.below(16)));
        u.labels.push_back(class_from_index(rng.below(4)));
      }
      corpus.push_back(u);
    }
    config.past_context = 4;
    config.future_context = 4;
    config.future_capacity = 8;
    config.transformer = {16, 1, 2, 32};
    config.head_hidden = 16;
    config.batch_size = 8;
    config.steps = 3;
  }
  Vocab vocab;
  std::vector<Utterance> corpus;
  TrainConfig config;
};

TEST_F(EvalFixture, DeterministicAndNonMutating) {
  auto r = train(config, vocab, corpus);
  const std::string before = serialize_checkpoint(r.checkpoint);
  const auto a = evaluate(r.checkpoint, corpus, 4, nullptr, "m", "c");
  const auto b = evaluate(r.checkpoint, corpus, 4, nullptr, "m", "c");
  EXPECT_EQ(a, b);
  EXPECT_EQ(report_to_json(a), report_to_json(b));
  EXPECT_EQ(serialize_checkpoint(r.checkpoint), before);
  EXPECT_EQ(a.metrics.total, 30u);
  EXPECT_EQ(a.meta.train_context, 4u);
  EXPECT_EQ(a.meta.encoder, "transformer");
}

TEST_F(EvalFixture, ZeroContextSeesOnlyPadding) {
  const auto windows = evaluation_windows(corpus, 4, 0);
  ASSERT_EQ(windows.size(), 30u);
  for (const auto& w : windows) EXPECT_TRUE(w.future.empty());
  Checkpoint ckpt = initial_checkpoint(config, vocab);
  const auto r0 = evaluate(ckpt, corpus, 0);
  EXPECT_EQ(r0.meta.eval_context, 0u);
  // A window whose future is cut to zero gives the same logits as one with
  // explicit padding.
  auto w = build_window(corpus[0], 2, 4, 8);
  limit_future(w, 0);
  auto l1 = infer_windows(ckpt, std::vector<WindowExample>{w}, nullptr);
  auto l2 = infer_windows(ckpt, std::vector<WindowExample>{build_window(corpus[0], 2, 4, 0)}, nullptr);
  EXPECT_EQ(l1, l2);
}

TEST_F(EvalFixture, ReportsDifferOnlyInContext) {
  Checkpoint ckpt = initial_checkpoint(config, vocab);
  auto a = evaluate(ckpt, corpus, 0, nullptr, "m");
  auto b = evaluate(ckpt, corpus, 8, nullptr, "m");
  a.meta.eval_context = b.meta.eval_context;
  EXPECT_EQ(a.meta, b.meta);
}

TEST_F(EvalFixture, Errors) {
  Checkpoint ckpt = initial_checkpoint(config, vocab);
  EXPECT_THROW(evaluate(ckpt, corpus, 16), ValidationError);
  TrainConfig mm = config;
  mm.multimodal = true;
  mm.audio.channels = {2};
  Checkpoint mck = initial_checkpoint(mm, vocab);
  EXPECT_THROW(evaluate(mck, corpus, 4), ValidationError);
}

TEST_F(EvalFixture, OverfitModelScoresHigh) {
  config.transformer = {32, 2, 2, 64};
  config.head_hidden = 32;
  config.batch_size = 32;
  config.steps = 300;
  config.lr = 3e-3;
  auto r = train(config, vocab, corpus);
  EXPECT_GE(evaluate(r.checkpoint, corpus, 4).metrics.mean_f1, 0.95);
}

TEST_F(EvalFixture, SweepTable) {
  Checkpoint a = initial_checkpoint(config, vocab);
  TrainConfig other = config;
  other.encoder = EncoderKind::Cnn;
  other.cnn = {8, 8, 1, 3};
  other.dropout = DropoutRates{};
  Checkpoint b = initial_checkpoint(other, vocab);
  std::vector<SweepModel> models{{"A", &a}, {"B,x", &b}};
  std::vector<std::size_t> ces{0, 8};
  const auto sweep = context_sweep(models, corpus, ces);
  ASSERT_EQ(sweep.reports.size(), 4u);
  EXPECT_EQ(sweep.reports[1].meta.model, "A");
  EXPECT_EQ(sweep.reports[1].meta.eval_context, 8u);
  EXPECT_EQ(sweep.reports[0].metrics, evaluate(a, corpus, 0).metrics);
  const std::string csv = sweep_to_csv(sweep);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kSweepCsvHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_NE(csv.find("\"B,x\",cnn,4,8,true,false,"), std::string::npos) << csv;
  EXPECT_EQ(sweep_to_json(sweep), sweep_to_json(context_sweep(models, corpus, ces)));

  std::vector<SweepModel> single{{"A", &a}};
  std::vector<std::size_t> one{4};
  EXPECT_EQ(context_sweep(single, corpus, one).reports[0].metrics.mean_f1, evaluate(a, corpus, 4).metrics.mean_f1);

  std::vector<std::string> words{"x", "y"};
  Vocab v2(words);
  TrainConfig c2 = config;
  Checkpoint c = initial_checkpoint(c2, v2);
  std::vector<SweepModel> mixed{{"A", &a}, {"C", &c}};
  EXPECT_THROW(context_sweep(mixed, corpus, ces), ValidationError);
}

}  // namespace
}  // namespace punct

// tests/unit/text_test.cpp
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

#include <filesystem>
#include <fstream>
#include <random>

#include "json.hpp"
#include "punct/errors.hpp"
#include "punct/io.hpp"
#include "punct/text.hpp"

namespace punct {
namespace {

using P = PunctClass;

const std::filesystem::path kFixtures{PUNCT_FIXTURE_DIR};

TEST(ParseTranscript, MotivatingExample) {
  auto parsed = parse_transcript("text mom, and dad will be there soon.");
  EXPECT_EQ(parsed.words, (std::vector<std::string>{"text", "mom", "and", "dad", "will", "be", "there", "soon"}));
  EXPECT_EQ(parsed.labels, (std::vector<P>{P::None, P::Comma, P::None, P::None, P::None, P::None, P::None, P::Period}));
}

TEST(ParseTranscript, SingleWord) {
  auto parsed = parse_transcript("hello");
  EXPECT_EQ(parsed.words, std::vector<std::string>{"hello"});
  EXPECT_EQ(parsed.labels, std::vector<P>{P::None});
}

TEST(ParseTranscript, ConsecutivePunctuationCollapsesToFirst) {
  auto parsed = parse_transcript("really?! yes.");
  EXPECT_EQ(parsed.words, (std::vector<std::string>{"really", "yes"}));
  EXPECT_EQ(parsed.labels, (std::vector<P>{P::Question, P::Period}));
}

TEST(ParseTranscript, FoldsAndStripsOtherSymbols) {
  auto parsed = parse_transcript("Wow! \"Quoted\" words; then: (Done) , . end");
  EXPECT_EQ(parsed.words, (std::vector<std::string>{"wow", "quoted", "words", "then", "done", "end"}));
  EXPECT_EQ(parsed.labels, (std::vector<P>{P::Period, P::None, P::Comma, P::Comma, P::Comma, P::None}));
}

TEST(ParseTranscript, EmptyInput) {
  auto parsed = parse_transcript("");
  EXPECT_TRUE(parsed.words.empty());
  EXPECT_TRUE(parsed.labels.empty());
  EXPECT_TRUE(parse_transcript("  ,. ?").words.empty());
}

TEST(ParseTranscript, RenderRoundTripProperty) {
  std::mt19937_64 rng(1);
  const std::vector<std::string> pool{"a", "bb", "don't", "x9", "word", "q"};
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = rng() % 12;
    std::vector<std::string> words;
    std::vector<P> labels;
    for (std::size_t i = 0; i < n; ++i) {
      words.push_back(pool[rng() % pool.size()]);
      labels.push_back(class_from_index(rng() % 4));
    }
    auto parsed = parse_transcript(render_transcript(words, labels));
    ASSERT_EQ(parsed.words, words);
    ASSERT_EQ(parsed.labels, labels);
  }
}

std::vector<std::vector<std::string>> split_corpus(std::initializer_list<const char*> lines) {
  std::vector<std::vector<std::string>> out;
  for (const char* l : lines) out.push_back(parse_transcript(l).words);
  return out;
}

TEST(BuildVocab, FrequencyOrder) {
  Vocab v = build_vocab(split_corpus({"a a b"}), 6);
  ASSERT_EQ(v.size(), 6u);
  EXPECT_LT(v.id("a"), v.id("b"));
  EXPECT_GE(v.id("a"), static_cast<TokenId>(Vocab::kNumReserved));
  // The cap counts the reserved tokens, so 5 leaves room for one word.
  Vocab capped = build_vocab(split_corpus({"a a b"}), 5);
  EXPECT_EQ(capped.size(), 5u);
  EXPECT_EQ(capped.id("b"), Vocab::kUnk);
}

TEST(BuildVocab, ReservedOnlyCap) {
  Vocab v = build_vocab(split_corpus({"a a b", "c"}), 4);
  EXPECT_EQ(v.size(), 4u);
  for (const char* w : {"a", "b", "c"}) EXPECT_EQ(v.id(w), Vocab::kUnk);
  EXPECT_EQ(v.serialize(), "");
}

TEST(BuildVocab, TiesBrokenLexicographically) {
  Vocab v = build_vocab(split_corpus({"b a b a"}), 10);
  EXPECT_EQ(v.id("a"), 4);
  EXPECT_EQ(v.id("b"), 5);
}

TEST(BuildVocab, Errors) {
  EXPECT_THROW(build_vocab(split_corpus({""}), 10), ValidationError);
  EXPECT_THROW(build_vocab(split_corpus({"a"}), 3), ValidationError);
}

TEST(Vocab, ReservedIdsAndBijection) {
  Vocab v = build_vocab(split_corpus({"the cat sat on the mat", "pad mask unk"}), 100);
  EXPECT_EQ(v.token(Vocab::kPad), "<pad>");
  EXPECT_EQ(v.token(Vocab::kMask), "<mask>");
  EXPECT_EQ(v.token(Vocab::kDrop), "<drop>");
  EXPECT_EQ(v.token(Vocab::kUnk), "<unk>");
  for (TokenId id = Vocab::kNumReserved; id < static_cast<TokenId>(v.size()); ++id) EXPECT_EQ(v.id(v.token(id)), id);
  EXPECT_EQ(v.id("<pad>"), Vocab::kUnk);
  EXPECT_EQ(v.id("zebra"), Vocab::kUnk);
}

TEST(Vocab, FileFormatOneTokenPerLine) {
  Vocab v = build_vocab(split_corpus({"b a b c"}), 10);
  EXPECT_EQ(v.serialize(), "b\na\nc\n");
  EXPECT_EQ(Vocab::parse(v.serialize()), v);
  EXPECT_THROW(Vocab::parse("a\n\nb\n"), DataError);
  EXPECT_THROW(Vocab::parse("a\na\n"), DataError);
}

Utterance toy_utterance(std::size_t n) {
  Utterance u;
  u.source_id = "u";
  for (std::size_t i = 0; i < n; ++i) {
    u.tokens.push_back(static_cast<TokenId>(10 + i));
    u.labels.push_back(class_from_index(i % 4));
  }
  return u;
}

TEST(BuildWindow, StartPadding) {
  Utterance u = toy_utterance(3);
  auto w = build_window(u, 0, 2, 2);
  EXPECT_EQ(w.past, (std::vector<TokenId>{Vocab::kPad, Vocab::kPad}));
  EXPECT_EQ(w.target_token, 10);
  EXPECT_EQ(w.future, (std::vector<TokenId>{11, 12}));
  EXPECT_EQ(w.gold, P::Comma);
}

TEST(BuildWindow, EndPadding) {
  Utterance u = toy_utterance(3);
  auto w = build_window(u, 2, 2, 2);
  EXPECT_EQ(w.past, (std::vector<TokenId>{10, 11}));
  EXPECT_EQ(w.target_token, 12);
  EXPECT_EQ(w.future, (std::vector<TokenId>{Vocab::kPad, Vocab::kPad}));
  EXPECT_EQ(w.model_input(), (std::vector<TokenId>{10, 11, 12, Vocab::kMask, Vocab::kPad, Vocab::kPad}));
}

TEST(BuildWindow, OutOfRangeRejected) {
  EXPECT_THROW(build_window(toy_utterance(3), 3, 2, 2), ValidationError);
}

// Independent slice-and-pad oracle over the padded token sequence.
std::vector<TokenId> slice_and_pad(const std::vector<TokenId>& tokens, std::size_t t, std::size_t cp, std::size_t ct) {
  std::vector<TokenId> padded(cp, Vocab::kPad);
  padded.insert(padded.end(), tokens.begin(), tokens.end());
  padded.insert(padded.end(), ct, Vocab::kPad);
  std::vector<TokenId> out(padded.begin() + static_cast<long>(t), padded.begin() + static_cast<long>(t + cp + 1));
  out.push_back(Vocab::kMask);
  out.insert(out.end(), padded.begin() + static_cast<long>(cp + t + 1), padded.begin() + static_cast<long>(cp + t + 1 + ct));
  return out;
}

TEST(BuildWindow, ExhaustiveAgainstSliceOracle) {
  std::size_t checked = 0;
  for (std::size_t n = 1; n <= 10; ++n) {
    Utterance u = toy_utterance(n);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t cp = 0; cp <= 4; ++cp)
        for (std::size_t ct = 0; ct <= 4; ++ct) {
          auto w = build_window(u, t, cp, ct);
          ASSERT_EQ(w.model_input(), slice_and_pad(u.tokens, t, cp, ct));
          ASSERT_EQ(w.model_input().size(), cp + 2 + ct);
          ASSERT_EQ(w.model_input()[cp + 1], Vocab::kMask);
          ASSERT_EQ(w.mask_index(), cp + 1);
          ASSERT_EQ(w.gold, u.labels[t]);
          ++checked;
        }
  }
  EXPECT_EQ(checked, 55u * 25u);
}

TEST(BuildWindow, AudioRefFromAlignment) {
  Utterance u = toy_utterance(2);
  u.alignments = std::vector<Alignment>{{0.0, 1.0}, {1.0, 2.0}};
  auto w = build_window(u, 1, 2, 2);
  ASSERT_TRUE(w.audio_ref);
  EXPECT_DOUBLE_EQ(w.audio_ref->midpoint_sec, 1.5);
  EXPECT_FALSE(build_window(toy_utterance(2), 1, 2, 2).audio_ref);
}

TEST(BuildWindow, LimitAndExtendFuture) {
  auto w = build_window(toy_utterance(8), 1, 2, 4);
  limit_future(w, 2);
  EXPECT_EQ(w.future, (std::vector<TokenId>{12, 13, Vocab::kPad, Vocab::kPad}));
  extend_future(w, 6);
  EXPECT_EQ(w.future.size(), 6u);
  EXPECT_THROW(extend_future(w, 3), ValidationError);
}

TEST(CorpusStats, EmptyCorpus) {
  CorpusStats s = corpus_stats({});
  EXPECT_EQ(s.total, 0u);
  for (auto c : s.counts) EXPECT_EQ(c, 0u);
}

TEST(CorpusStats, HandCount) {
  Vocab v;
  std::vector<TranscriptRecord> recs{{"x", "a, b.", std::nullopt}};
  auto utts = make_utterances(recs, v);
  CorpusStats s = corpus_stats(utts);
  EXPECT_EQ(s.count(P::Comma), 1u);
  EXPECT_EQ(s.count(P::Period), 1u);
  EXPECT_EQ(s.count(P::Question), 0u);
  EXPECT_EQ(s.count(P::None), 0u);
  EXPECT_EQ(s.total, 2u);
}

TEST(CorpusStats, GoldenExcerptFixture) {
  auto records = read_transcripts(kFixtures / "ted_excerpt.jsonl");
  ASSERT_EQ(records.size(), 50u);
  Vocab v = build_vocab(corpus_words(records), 1000);
  CorpusStats s = corpus_stats(make_utterances(records, v));
  auto golden = nlohmann::json::parse(read_file(kFixtures / "ted_excerpt_stats.json"));
  EXPECT_EQ(s.count(P::Comma), golden["comma"].get<std::size_t>());
  EXPECT_EQ(s.count(P::Period), golden["period"].get<std::size_t>());
  EXPECT_EQ(s.count(P::Question), golden["question"].get<std::size_t>());
  EXPECT_EQ(s.count(P::None), golden["none"].get<std::size_t>());
  EXPECT_EQ(s.total, golden["total"].get<std::size_t>());
}

TEST(CorpusStats, MatchesParsedLabelMultisetOnRandomCorpora) {
  std::mt19937_64 rng(3);
  const char* symbols[] = {",", ".", "?", "", "!", ";", ":", "?!", ", ."};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TranscriptRecord> recs;
    std::array<std::size_t, 4> expected{};
    for (int u = 0; u < 5; ++u) {
      std::string text;
      const std::size_t n = 1 + rng() % 15;
      for (std::size_t i = 0; i < n; ++i) {
        text += "w" + std::to_string(rng() % 7);
        text += symbols[rng() % 9];
        text += ' ';
      }
      for (auto l : parse_transcript(text).labels) ++expected[class_index(l)];
      recs.push_back({"r" + std::to_string(u), text, std::nullopt});
    }
    Vocab v = build_vocab(corpus_words(recs), 50);
    CorpusStats s = corpus_stats(make_utterances(recs, v));
    EXPECT_EQ(s.counts, expected);
    EXPECT_EQ(s.total, expected[0] + expected[1] + expected[2] + expected[3]);
  }
}

TEST(Transcripts, JsonlParsingAndValidation) {
  auto recs = read_transcripts(kFixtures / "tiny.jsonl");
  ASSERT_EQ(recs.size(), 2u);
  ASSERT_TRUE(recs[0].alignment);
  EXPECT_EQ(recs[0].alignment->size(), 6u);
  EXPECT_FALSE(recs[1].alignment);
  EXPECT_EQ(parse_transcripts(serialize_transcript(recs[0]) + "\n")[0].alignment, recs[0].alignment);

  Vocab v = build_vocab(corpus_words(recs), 100);
  EXPECT_NO_THROW(make_utterances(recs, v));

  EXPECT_THROW(parse_transcripts("{\"id\": 3}\n"), DataError);
  EXPECT_THROW(parse_transcripts("not json\n"), DataError);
  // Alignment count must match the word count.
  EXPECT_THROW(make_utterance({"bad", "one two", std::vector<Alignment>{{0, 1}}}, v), DataError);
  // Overlapping alignments are rejected.
  EXPECT_THROW(make_utterance({"bad", "one two", std::vector<Alignment>{{0, 1}, {0.5, 2}}}, v), DataError);
}

}  // namespace
}  // namespace punct

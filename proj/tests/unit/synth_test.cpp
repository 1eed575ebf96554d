// tests/unit/synth_test.cpp
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

#include <set>

#include "punct/errors.hpp"
#include "punct/features.hpp"
#include "punct/synth.hpp"

namespace punct {
namespace {

std::array<std::size_t, 4> count_labels(const std::vector<TranscriptRecord>& records, std::size_t& total) {
  std::array<std::size_t, 4> counts{};
  total = 0;
  for (const auto& r : records)
    for (auto l : parse_transcript(r.text).labels) {
      ++counts[class_index(l)];
      ++total;
    }
  return counts;
}

TEST(SynthCorpus, RealizesRequestedMix) {
  for (SynthStyle style : {SynthStyle::Ted, SynthStyle::Podcast}) {
    CorpusSpec spec;
    spec.mix = {0.2, 0.2, 0.1, 0.5};
    spec.style = style;
    spec.seed = 17;
    spec.utterances = 0;
    std::size_t total = 0;
    std::vector<TranscriptRecord> records;
    // Grow until at least 10000 tokens.
    while (total < 10000) {
      spec.utterances += 50;
      records = synth_corpus(spec);
      count_labels(records, total);
    }
    const auto counts = count_labels(records, total);
    for (PunctClass c : kAllClasses)
      EXPECT_NEAR(double(counts[class_index(c)]) / total, spec.mix.probability(c), 0.05)
          << class_name(c) << " " << style_name(style);
  }
}

TEST(SynthCorpus, DefaultMixWithinTolerance) {
  CorpusSpec spec;
  spec.utterances = 400;
  std::size_t total = 0;
  const auto counts = count_labels(synth_corpus(spec), total);
  ASSERT_GT(total, 10000u);
  for (PunctClass c : kAllClasses)
    EXPECT_NEAR(double(counts[class_index(c)]) / total, spec.mix.probability(c), 0.02) << class_name(c);
}

TEST(SynthCorpus, DeterministicAndWellFormed) {
  CorpusSpec spec;
  spec.utterances = 10;
  spec.seed = 3;
  const auto a = synth_corpus(spec);
  const auto b = synth_corpus(spec);
  ASSERT_EQ(a.size(), 10u);
  EXPECT_EQ(a[0].id, "synth-000000");
  EXPECT_EQ(a[9].id, "synth-000009");
  std::set<std::string> lexicon;
  for (const auto& w : synth_lexicon().all_words()) lexicon.insert(w);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].text, b[i].text);
    const auto parsed = parse_transcript(a[i].text);
    EXPECT_EQ(render_transcript(parsed.words, parsed.labels), a[i].text);
    const auto last = parsed.labels.back();
    EXPECT_TRUE(last == PunctClass::Period || last == PunctClass::Question);
    for (const auto& w : parsed.words) EXPECT_TRUE(lexicon.count(w)) << w;
  }
  spec.seed = 4;
  EXPECT_NE(synth_corpus(spec)[0].text, a[0].text);
}

TEST(SynthCorpus, LexiconWordsAreDistinct) {
  const auto words = synth_lexicon().all_words();
  EXPECT_EQ(std::set<std::string>(words.begin(), words.end()).size(), words.size());
}

TEST(SynthCorpus, SentenceLengthCap) {
  CorpusSpec spec;
  spec.mix = {0.0, 0.001, 0.0, 0.999};
  spec.max_sentence_words = 5;
  spec.min_sentences = spec.max_sentences = 2;
  spec.utterances = 5;
  for (const auto& r : synth_corpus(spec)) EXPECT_EQ(parse_transcript(r.text).words.size(), 10u);
}

TEST(SynthCorpus, TedCommasAreFollowedByConjunctions) {
  CorpusSpec spec;
  spec.utterances = 300;
  const auto& conj = synth_lexicon().conjunctions;
  const std::set<std::string> cs(conj.begin(), conj.end());
  std::size_t commas = 0, comma_conj = 0, plain_conj = 0;
  for (const auto& r : synth_corpus(spec)) {
    const auto p = parse_transcript(r.text);
    for (std::size_t i = 0; i + 1 < p.words.size(); ++i) {
      if (p.labels[i] == PunctClass::Comma) {
        ++commas;
        comma_conj += cs.count(p.words[i + 1]);
      } else if (p.labels[i] == PunctClass::None) {
        plain_conj += cs.count(p.words[i + 1]);
      }
    }
  }
  EXPECT_NEAR(double(comma_conj) / commas, 0.8, 0.05);
  EXPECT_EQ(plain_conj, 0u);
}

TEST(SynthCorpus, InvalidSpecs) {
  CorpusSpec spec;
  spec.mix = {0.5, 0.5, 0.5, 0.0};
  EXPECT_THROW(synth_corpus(spec), ValidationError);
  spec.mix = {0.5, 0.0, 0.0, 0.5};
  EXPECT_THROW(synth_corpus(spec), ValidationError);
  spec = {};
  spec.min_sentences = 4;
  spec.max_sentences = 2;
  EXPECT_THROW(synth_corpus(spec), ValidationError);
  EXPECT_THROW(parse_style("radio"), ValidationError);
  EXPECT_EQ(parse_style("podcast"), SynthStyle::Podcast);
}

TEST(SynthAudio, WavRoundTripsThroughFeatures) {
  CorpusSpec spec;
  spec.utterances = 3;
  spec.style = SynthStyle::Podcast;
  const auto records = synth_corpus(spec);
  std::vector<std::string> words = synth_lexicon().all_words();
  const Vocab vocab(words);
  FeatureBank bank;
  for (std::size_t i = 0; i < records.size(); ++i) {
    Rng rng = Rng::stream(1, i);
    auto s = synth_record_audio(records[i], SynthProfile{}, rng);
    TranscriptRecord rec = records[i];
    rec.alignment = s.alignments;
    const AudioBuffer back = parse_wav(encode_wav(s.audio));
    Utterance u = make_utterance(parse_transcripts(serialize_transcript(rec))[0], vocab);
    ASSERT_EQ(u.alignments->size(), u.size());
    bank.add(u, back);
    for (std::size_t t = 0; t < u.size(); ++t) {
      const auto spec_t = bank.token({u.source_id, token_midpoint(u, t)});
      EXPECT_TRUE(spec_t.all_finite());
      EXPECT_EQ(spec_t.frames, 198u);
    }
  }
  Rng a = Rng::stream(1, 0), b = Rng::stream(1, 0);
  EXPECT_EQ(synth_record_audio(records[0], SynthProfile{}, a).audio.samples,
            synth_record_audio(records[0], SynthProfile{}, b).audio.samples);
}

}  // namespace
}  // namespace punct

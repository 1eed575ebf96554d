// core/include/punct/synth.hpp
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

// Synthetic transcripts with controlled punctuation frequencies, and paired
// speech-like audio for them.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "punct/audio.hpp"
#include "punct/text.hpp"

namespace punct {

struct ClassMix {
  double comma = 0.10;
  double period = 0.08;
  double question = 0.04;
  double none = 0.78;

  double probability(PunctClass c) const;
  // Throws ValidationError unless every share is non-negative, the shares sum
  // to 1 within 1e-6, and period + question is positive.
  void validate() const;
  friend bool operator==(const ClassMix&, const ClassMix&) = default;
};

// Ted: a comma is usually followed by a conjunction, which never follows an
// unpunctuated word. Podcast: conjunctions follow commas less often and also
// follow plain words, so commas are ambiguous in text alone.
enum class SynthStyle { Ted, Podcast };

std::string_view style_name(SynthStyle s);
SynthStyle parse_style(std::string_view name);

struct CorpusSpec {
  std::size_t utterances = 100;
  std::size_t min_sentences = 3;
  std::size_t max_sentences = 8;
  // A sentence reaching this length ends with a forced terminal label.
  std::size_t max_sentence_words = 40;
  ClassMix mix;
  SynthStyle style = SynthStyle::Ted;
  std::uint64_t seed = 0;
  std::string id_prefix = "synth";

  void validate() const;
};

struct SynthLexicon {
  std::vector<std::string> question_starters;
  std::vector<std::string> statement_starters;
  std::vector<std::string> conjunctions;
  std::vector<std::string> function_words;
  std::vector<std::string> terminal_words;
  std::vector<std::string> content_words;

  // Every word once, in the order above.
  std::vector<std::string> all_words() const;
};

const SynthLexicon& synth_lexicon();

// Records carry no alignment; utterance i is "<prefix>-<i>" with i zero-padded
// to six digits. Deterministic in the spec.
std::vector<TranscriptRecord> synth_corpus(const CorpusSpec& spec);

// Audio for a record, with token pitch keyed on the word's lexicon position.
// Returns the alignment the rendering produced.
SynthResult synth_record_audio(const TranscriptRecord& record, const SynthProfile& profile, Rng& rng);

}  // namespace punct

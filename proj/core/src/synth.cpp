// core/src/synth.cpp
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

#include "punct/synth.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "punct/errors.hpp"
#include "punct/io.hpp"

namespace punct {

namespace {

constexpr double kWhStart = 0.9;
constexpr double kStatementStart = 0.7;
constexpr double kTerminalWord = 0.7;
constexpr double kFunctionWord = 0.4;

struct StyleRates {
  double conj_after_comma;
  double conj_after_none;
};

StyleRates style_rates(SynthStyle s) {
  return s == SynthStyle::Ted ? StyleRates{0.8, 0.0} : StyleRates{0.35, 0.08};
}

const std::string& pick(const std::vector<std::string>& words, Rng& rng) { return words[rng.below(words.size())]; }

PunctClass draw_label(const ClassMix& mix, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (PunctClass c : kAllClasses) {
    acc += mix.probability(c);
    if (u < acc) return c;
  }
  return PunctClass::None;
}

bool is_terminal(PunctClass c) { return c == PunctClass::Period || c == PunctClass::Question; }

std::vector<PunctClass> sentence_labels(const CorpusSpec& spec, Rng& rng) {
  std::vector<PunctClass> labels;
  while (true) {
    PunctClass c = draw_label(spec.mix, rng);
    if (!is_terminal(c) && labels.size() + 1 == spec.max_sentence_words) {
      const double q = spec.mix.question / (spec.mix.period + spec.mix.question);
      c = rng.bernoulli(q) ? PunctClass::Question : PunctClass::Period;
    }
    labels.push_back(c);
    if (is_terminal(c)) return labels;
  }
}

void sentence_words(std::span<const PunctClass> labels, PunctClass before, const StyleRates& rates, Rng& rng,
                    std::vector<std::string>& out) {
  const SynthLexicon& lex = synth_lexicon();
  const bool question = labels.back() == PunctClass::Question;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const PunctClass prev = i == 0 ? before : labels[i - 1];
    if (i == 0) {
      if (question && rng.bernoulli(kWhStart)) {
        out.push_back(pick(lex.question_starters, rng));
        continue;
      }
      if (!question && rng.bernoulli(kStatementStart)) {
        out.push_back(pick(lex.statement_starters, rng));
        continue;
      }
    } else {
      const double conj = prev == PunctClass::Comma ? rates.conj_after_comma
                          : prev == PunctClass::None ? rates.conj_after_none
                                                     : 0.0;
      if (rng.bernoulli(conj)) {
        out.push_back(pick(lex.conjunctions, rng));
        continue;
      }
    }
    const PunctClass c = labels[i];
    if (is_terminal(c) && rng.bernoulli(kTerminalWord))
      out.push_back(pick(lex.terminal_words, rng));
    else if (c == PunctClass::None && rng.bernoulli(kFunctionWord))
      out.push_back(pick(lex.function_words, rng));
    else
      out.push_back(pick(lex.content_words, rng));
  }
}

}  // namespace

double ClassMix::probability(PunctClass c) const {
  switch (c) {
    case PunctClass::Comma: return comma;
    case PunctClass::Period: return period;
    case PunctClass::Question: return question;
    case PunctClass::None: return none;
  }
  return 0.0;
}

void ClassMix::validate() const {
  for (PunctClass c : kAllClasses)
    if (!(probability(c) >= 0.0))
      throw ValidationError("class mix: share of '" + std::string(class_name(c)) + "' must be non-negative");
  if (std::abs(comma + period + question + none - 1.0) > 1e-6)
    throw ValidationError("class mix: shares must sum to 1");
  if (!(period + question > 0.0)) throw ValidationError("class mix: period and question shares cannot both be 0");
}

std::string_view style_name(SynthStyle s) { return s == SynthStyle::Ted ? "ted" : "podcast"; }

SynthStyle parse_style(std::string_view name) {
  if (name == "ted") return SynthStyle::Ted;
  if (name == "podcast") return SynthStyle::Podcast;
  throw ValidationError("synthetic style must be 'ted' or 'podcast', got '" + std::string(name) + "'");
}

void CorpusSpec::validate() const {
  mix.validate();
  if (min_sentences == 0 || min_sentences > max_sentences)
    throw ValidationError("sentences per utterance: need 1 <= min <= max");
  if (max_sentence_words == 0) throw ValidationError("max_sentence_words must be positive");
}

std::vector<std::string> SynthLexicon::all_words() const {
  std::vector<std::string> out;
  for (const auto* list :
       {&question_starters, &statement_starters, &conjunctions, &function_words, &terminal_words, &content_words})
    out.insert(out.end(), list->begin(), list->end());
  return out;
}

const SynthLexicon& synth_lexicon() {
  static const SynthLexicon lex{
      {"what", "why", "how", "where", "when", "who", "do", "can", "does"},
      {"i", "we", "you", "they", "she", "he", "it", "this", "that", "people"},
      {"and", "but", "so", "because", "which", "or", "then"},
      {"the", "a", "an", "of", "to", "in", "for", "with", "on", "at", "my", "your", "is", "are", "was"},
      {"today", "now", "again", "too", "here", "tonight", "anyway", "recently", "together", "lately"},
      {"water",   "city",    "music",   "story",  "money",   "house",   "school",  "friend",  "family",
       "world",   "idea",    "problem", "answer", "child",   "river",   "mountain", "road",   "garden",
       "window",  "market",  "doctor",  "teacher", "night",  "morning", "summer",  "winter",  "paper",
       "phone",   "picture", "language", "science", "energy", "planet", "ocean",   "forest",  "machine",
       "computer", "data",   "brain",   "heart",  "voice",   "question", "number", "reason",  "system",
       "company", "country", "village", "office", "street",  "car",     "train",   "book",    "letter",
       "song",    "game",    "team",    "class",  "change",  "history", "future",  "power",   "light",
       "color",   "sound",   "food",    "coffee", "bread",   "table",   "chair",   "door",    "wall",
       "build",   "make",    "find",    "think",  "know",    "see",     "want",    "give",    "take",
       "work",    "learn",   "try",     "call",   "move",    "play",    "live",    "believe", "bring",
       "start",   "show",    "hear",    "write",  "read",    "grow",    "open",    "carry",   "remember",
       "big",     "small",   "new",     "old",    "good",    "great",   "strange", "simple",  "hard",
       "early",   "late",    "young",   "happy",  "quiet",   "bright",  "dark",    "fresh",   "real"}};
  return lex;
}

std::vector<TranscriptRecord> synth_corpus(const CorpusSpec& spec) {
  spec.validate();
  const StyleRates rates = style_rates(spec.style);
  std::vector<TranscriptRecord> out;
  out.reserve(spec.utterances);
  for (std::size_t u = 0; u < spec.utterances; ++u) {
    Rng rng = Rng::stream(spec.seed, u);
    const std::size_t k = spec.min_sentences + rng.below(spec.max_sentences - spec.min_sentences + 1);
    std::vector<std::string> words;
    std::vector<PunctClass> labels;
    for (std::size_t s = 0; s < k; ++s) {
      const auto sl = sentence_labels(spec, rng);
      sentence_words(sl, labels.empty() ? PunctClass::Period : labels.back(), rates, rng, words);
      labels.insert(labels.end(), sl.begin(), sl.end());
    }
    char id[32];
    std::snprintf(id, sizeof id, "-%06zu", u);
    out.push_back({spec.id_prefix + id, render_transcript(words, labels), std::nullopt});
  }
  return out;
}

SynthResult synth_record_audio(const TranscriptRecord& record, const SynthProfile& profile, Rng& rng) {
  static const std::unordered_map<std::string, TokenId> index = [] {
    std::unordered_map<std::string, TokenId> m;
    for (const auto& w : synth_lexicon().all_words()) m.emplace(w, static_cast<TokenId>(m.size()));
    return m;
  }();
  const ParsedTranscript parsed = parse_transcript(record.text);
  Utterance utt;
  utt.source_id = record.id;
  utt.labels = parsed.labels;
  for (const auto& w : parsed.words) {
    const auto it = index.find(w);
    utt.tokens.push_back(it == index.end() ? static_cast<TokenId>(fnv1a64(w) & 0xffff) : it->second);
  }
  return synth_speechlike(utt, profile, rng);
}

}  // namespace punct

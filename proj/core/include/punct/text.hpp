// core/include/punct/text.hpp
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

// Transcript parsing, the word vocabulary, and per-token masked context windows.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace punct {

enum class PunctClass : std::uint8_t { Comma = 0, Period = 1, Question = 2, None = 3 };

inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::array<PunctClass, kNumClasses> kAllClasses{PunctClass::Comma, PunctClass::Period,
                                                                 PunctClass::Question, PunctClass::None};

constexpr std::size_t class_index(PunctClass c) { return static_cast<std::size_t>(c); }
PunctClass class_from_index(std::size_t index);
// "," "." "?" or "" for None.
std::string_view class_symbol(PunctClass c);
// "comma", "period", "question", "none".
std::string_view class_name(PunctClass c);

using TokenId = std::int64_t;

struct ParsedTranscript {
  std::vector<std::string> words;
  std::vector<PunctClass> labels;

  friend bool operator==(const ParsedTranscript&, const ParsedTranscript&) = default;
};

// Lowercases, splits on whitespace, and labels each word with the first
// punctuation symbol that follows it. '!' folds to a period; ';' and ':' fold
// to a comma; any other non-word character is dropped.
ParsedTranscript parse_transcript(std::string_view text);

// Inverse of parse_transcript for words made of word characters.
std::string render_transcript(std::span<const std::string> words, std::span<const PunctClass> labels);

class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kMask = 1;
  static constexpr TokenId kDrop = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr std::size_t kNumReserved = 4;

  Vocab();
  // Corpus tokens in id order, starting at kNumReserved.
  explicit Vocab(std::vector<std::string> corpus_tokens);

  TokenId id(std::string_view word) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  std::span<const std::string> corpus_tokens() const;
  static bool is_reserved(TokenId id) { return id >= 0 && id < static_cast<TokenId>(kNumReserved); }
  std::vector<TokenId> encode(std::span<const std::string> words) const;

  // One corpus token per line; line i holds id i + kNumReserved.
  std::string serialize() const;
  static Vocab parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);
  // FNV-1a of serialize().
  std::uint64_t hash() const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// Keeps the max_size - 4 most frequent words (ties broken lexicographically).
Vocab build_vocab(std::span<const std::vector<std::string>> corpus, std::size_t max_size);

struct Alignment {
  double start_sec = 0.0;
  double end_sec = 0.0;

  friend bool operator==(const Alignment&, const Alignment&) = default;
};

struct Utterance {
  std::string source_id;
  std::vector<TokenId> tokens;
  std::vector<PunctClass> labels;
  std::optional<std::vector<Alignment>> alignments;

  // Throws DataError naming the violated invariant.
  void validate() const;
  std::size_t size() const noexcept { return tokens.size(); }
};

// One line of the transcript JSONL: {"id", "text", "alignment"?}.
struct TranscriptRecord {
  std::string id;
  std::string text;
  std::optional<std::vector<Alignment>> alignment;
};

std::vector<TranscriptRecord> read_transcripts(const std::filesystem::path& path);
std::vector<TranscriptRecord> parse_transcripts(std::string_view jsonl);
std::string serialize_transcript(const TranscriptRecord& record);
void write_transcripts(const std::filesystem::path& path, std::span<const TranscriptRecord> records);

Utterance make_utterance(const TranscriptRecord& record, const Vocab& vocab);
std::vector<Utterance> make_utterances(std::span<const TranscriptRecord> records, const Vocab& vocab);
std::vector<std::vector<std::string>> corpus_words(std::span<const TranscriptRecord> records);

struct AudioRef {
  std::string source_id;
  double midpoint_sec = 0.0;

  friend bool operator==(const AudioRef&, const AudioRef&) = default;
};

struct WindowExample {
  std::vector<TokenId> past;
  TokenId target_token = Vocab::kPad;
  std::vector<TokenId> future;
  PunctClass gold = PunctClass::None;
  std::string utterance_id;
  std::size_t position = 0;
  std::optional<AudioRef> audio_ref;

  // [past..., target, <MASK>, future...]
  std::vector<TokenId> model_input() const;
  std::size_t mask_index() const noexcept { return past.size() + 1; }

  friend bool operator==(const WindowExample&, const WindowExample&) = default;
};

WindowExample build_window(const Utterance& utt, std::size_t t, std::size_t past_context,
                           std::size_t future_context);

// Replaces future slots at index >= visible with <PAD>.
void limit_future(WindowExample& example, std::size_t visible);
// Right-pads the future with <PAD> up to `capacity` slots.
void extend_future(WindowExample& example, std::size_t capacity);

struct CorpusStats {
  std::array<std::size_t, kNumClasses> counts{};
  std::size_t total = 0;

  std::size_t count(PunctClass c) const { return counts[class_index(c)]; }
  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

CorpusStats corpus_stats(std::span<const Utterance> utterances);
CorpusStats label_stats(std::span<const PunctClass> labels);

}  // namespace punct

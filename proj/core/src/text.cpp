// core/src/text.cpp
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

#include "punct/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "json.hpp"
#include "punct/errors.hpp"
#include "punct/io.hpp"

namespace punct {

namespace {

const std::array<std::string, Vocab::kNumReserved> kReservedTokens{"<pad>", "<mask>", "<drop>", "<unk>"};

bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '\'' || c >= 0x80; }

std::optional<PunctClass> punct_of(char c) {
  switch (c) {
    case ',':
    case ';':
    case ':':
      return PunctClass::Comma;
    case '.':
    case '!':
      return PunctClass::Period;
    case '?':
      return PunctClass::Question;
    default:
      return std::nullopt;
  }
}

}  // namespace

PunctClass class_from_index(std::size_t index) {
  if (index >= kNumClasses) throw ValidationError("punctuation class index " + std::to_string(index) + " out of range");
  return static_cast<PunctClass>(index);
}

std::string_view class_symbol(PunctClass c) {
  switch (c) {
    case PunctClass::Comma: return ",";
    case PunctClass::Period: return ".";
    case PunctClass::Question: return "?";
    case PunctClass::None: return "";
  }
  return "";
}

std::string_view class_name(PunctClass c) {
  switch (c) {
    case PunctClass::Comma: return "comma";
    case PunctClass::Period: return "period";
    case PunctClass::Question: return "question";
    case PunctClass::None: return "none";
  }
  return "none";
}

ParsedTranscript parse_transcript(std::string_view text) {
  ParsedTranscript out;
  std::string current;
  // True once the most recent word has received its label.
  bool labelled = true;
  auto flush = [&]() {
    if (current.empty()) return;
    out.words.push_back(std::move(current));
    out.labels.push_back(PunctClass::None);
    current.clear();
    labelled = false;
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (auto p = punct_of(ch)) {
      flush();
      if (!labelled && !out.labels.empty()) {
        out.labels.back() = *p;
        labelled = true;
      }
    } else if (is_word_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
    // Anything else is stripped in place.
  }
  flush();
  return out;
}

std::string render_transcript(std::span<const std::string> words, std::span<const PunctClass> labels) {
  if (words.size() != labels.size())
    throw ValidationError("render_transcript: " + std::to_string(words.size()) + " words but " +
                          std::to_string(labels.size()) + " labels");
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
    out += class_symbol(labels[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() : tokens_(kReservedTokens.begin(), kReservedTokens.end()) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], static_cast<TokenId>(i));
}

Vocab::Vocab(std::vector<std::string> corpus_tokens) : Vocab() {
  for (auto& tok : corpus_tokens) {
    if (tok.empty()) throw ValidationError("vocabulary token must be non-empty");
    auto [it, inserted] = ids_.emplace(tok, static_cast<TokenId>(tokens_.size()));
    if (!inserted) throw ValidationError("duplicate or reserved vocabulary token '" + tok + "'");
    tokens_.push_back(std::move(tok));
  }
}

TokenId Vocab::id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  if (it == ids_.end() || is_reserved(it->second)) return kUnk;
  return it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw ValidationError("token id " + std::to_string(id) + " outside vocabulary of " +
                          std::to_string(tokens_.size()));
  return tokens_[static_cast<std::size_t>(id)];
}

std::span<const std::string> Vocab::corpus_tokens() const {
  return std::span<const std::string>(tokens_).subspan(kNumReserved);
}

std::vector<TokenId> Vocab::encode(std::span<const std::string> words) const {
  std::vector<TokenId> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(id(w));
  return ids;
}

std::string Vocab::serialize() const {
  std::string out;
  for (const auto& tok : corpus_tokens()) {
    out += tok;
    out.push_back('\n');
  }
  return out;
}

Vocab Vocab::parse(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) throw DataError("vocabulary file has an empty line at id " + std::to_string(tokens.size() + kNumReserved));
    tokens.emplace_back(line);
    start = end + 1;
  }
  try {
    return Vocab(std::move(tokens));
  } catch (const ValidationError& e) {
    throw DataError(std::string("malformed vocabulary: ") + e.what());
  }
}

void Vocab::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

Vocab Vocab::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::uint64_t Vocab::hash() const { return fnv1a64(serialize()); }

Vocab build_vocab(std::span<const std::vector<std::string>> corpus, std::size_t max_size) {
  if (max_size < Vocab::kNumReserved)
    throw ValidationError("build_vocab: max_size " + std::to_string(max_size) + " is below the " +
                          std::to_string(Vocab::kNumReserved) + " reserved tokens");
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& utt : corpus)
    for (const auto& w : utt) {
      ++counts[w];
      ++total;
    }
  if (total == 0) throw ValidationError("build_vocab: empty corpus");
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is already lexicographic, so a stable sort by count keeps ties ordered.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_size - Vocab::kNumReserved);
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
  return Vocab(std::move(tokens));
}

// ---------------------------------------------------------------------------
// Utterances and transcripts

void Utterance::validate() const {
  if (tokens.size() != labels.size())
    throw DataError("utterance '" + source_id + "': " + std::to_string(tokens.size()) + " tokens but " +
                    std::to_string(labels.size()) + " labels");
  if (!alignments) return;
  if (alignments->size() != tokens.size())
    throw DataError("utterance '" + source_id + "': " + std::to_string(alignments->size()) +
                    " alignments for " + std::to_string(tokens.size()) + " tokens");
  double prev_end = 0.0;
  for (std::size_t i = 0; i < alignments->size(); ++i) {
    const auto& a = (*alignments)[i];
    if (!std::isfinite(a.start_sec) || !std::isfinite(a.end_sec) || a.start_sec < 0.0 || a.end_sec < a.start_sec)
      throw DataError("utterance '" + source_id + "': invalid alignment at token " + std::to_string(i));
    if (i > 0 && a.start_sec < prev_end)
      throw DataError("utterance '" + source_id + "': alignment of token " + std::to_string(i) +
                      " overlaps the previous token");
    prev_end = a.end_sec;
  }
}

std::vector<TranscriptRecord> parse_transcripts(std::string_view jsonl) {
  std::vector<TranscriptRecord> records;
  std::size_t start = 0, line_no = 0;
  while (start < jsonl.size()) {
    std::size_t end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("transcript line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("text") || !j["text"].is_string())
      throw DataError("transcript line " + std::to_string(line_no) + ": expected string fields \"id\" and \"text\"");
    TranscriptRecord rec;
    rec.id = j["id"].get<std::string>();
    rec.text = j["text"].get<std::string>();
    if (j.contains("alignment") && !j["alignment"].is_null()) {
      const auto& arr = j["alignment"];
      if (!arr.is_array()) throw DataError("transcript line " + std::to_string(line_no) + ": alignment must be a list");
      std::vector<Alignment> al;
      for (const auto& pair : arr) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
          throw DataError("transcript line " + std::to_string(line_no) + ": alignment entries must be [start, end]");
        al.push_back({pair[0].get<double>(), pair[1].get<double>()});
      }
      rec.alignment = std::move(al);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<TranscriptRecord> read_transcripts(const std::filesystem::path& path) {
  return parse_transcripts(read_file(path));
}

std::string serialize_transcript(const TranscriptRecord& record) {
  nlohmann::json j;
  j["id"] = record.id;
  j["text"] = record.text;
  if (record.alignment) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& a : *record.alignment) arr.push_back({a.start_sec, a.end_sec});
    j["alignment"] = std::move(arr);
  }
  return j.dump();
}

void write_transcripts(const std::filesystem::path& path, std::span<const TranscriptRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += serialize_transcript(r);
    out.push_back('\n');
  }
  write_file_atomic(path, out);
}

Utterance make_utterance(const TranscriptRecord& record, const Vocab& vocab) {
  ParsedTranscript parsed = parse_transcript(record.text);
  Utterance utt;
  utt.source_id = record.id;
  utt.tokens = vocab.encode(parsed.words);
  utt.labels = std::move(parsed.labels);
  utt.alignments = record.alignment;
  utt.validate();
  return utt;
}

std::vector<Utterance> make_utterances(std::span<const TranscriptRecord> records, const Vocab& vocab) {
  std::vector<Utterance> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(make_utterance(r, vocab));
  return out;
}

std::vector<std::vector<std::string>> corpus_words(std::span<const TranscriptRecord> records) {
  std::vector<std::vector<std::string>> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(parse_transcript(r.text).words);
  return out;
}

// ---------------------------------------------------------------------------
// Windows

std::vector<TokenId> WindowExample::model_input() const {
  std::vector<TokenId> ids;
  ids.reserve(past.size() + 2 + future.size());
  ids.insert(ids.end(), past.begin(), past.end());
  ids.push_back(target_token);
  ids.push_back(Vocab::kMask);
  ids.insert(ids.end(), future.begin(), future.end());
  return ids;
}

WindowExample build_window(const Utterance& utt, std::size_t t, std::size_t past_context,
                           std::size_t future_context) {
  if (t >= utt.tokens.size())
    throw ValidationError("build_window: position " + std::to_string(t) + " outside utterance '" +
                          utt.source_id + "' of " + std::to_string(utt.tokens.size()) + " tokens");
  WindowExample ex;
  ex.past.assign(past_context, Vocab::kPad);
  for (std::size_t k = 0; k < past_context; ++k) {
    // Slot k holds token t - past_context + k.
    if (t + k >= past_context) ex.past[k] = utt.tokens[t + k - past_context];
  }
  ex.target_token = utt.tokens[t];
  ex.future.assign(future_context, Vocab::kPad);
  for (std::size_t k = 0; k < future_context && t + 1 + k < utt.tokens.size(); ++k)
    ex.future[k] = utt.tokens[t + 1 + k];
  ex.gold = utt.labels.at(t);
  ex.utterance_id = utt.source_id;
  ex.position = t;
  if (utt.alignments) {
    const auto& a = (*utt.alignments)[t];
    ex.audio_ref = AudioRef{utt.source_id, 0.5 * (a.start_sec + a.end_sec)};
  }
  return ex;
}

void limit_future(WindowExample& example, std::size_t visible) {
  for (std::size_t k = visible; k < example.future.size(); ++k) example.future[k] = Vocab::kPad;
}

void extend_future(WindowExample& example, std::size_t capacity) {
  if (example.future.size() > capacity)
    throw ValidationError("extend_future: window already has " + std::to_string(example.future.size()) +
                          " future slots, capacity is " + std::to_string(capacity));
  example.future.resize(capacity, Vocab::kPad);
}

CorpusStats label_stats(std::span<const PunctClass> labels) {
  CorpusStats s;
  for (auto l : labels) ++s.counts[class_index(l)];
  s.total = labels.size();
  return s;
}

CorpusStats corpus_stats(std::span<const Utterance> utterances) {
  CorpusStats s;
  for (const auto& u : utterances) {
    for (auto l : u.labels) ++s.counts[class_index(l)];
    s.total += u.labels.size();
  }
  return s;
}

}  // namespace punct

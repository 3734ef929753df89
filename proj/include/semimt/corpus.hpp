// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace semimt {

using TokenSeq = std::vector<std::string>;

enum class TokenizerMode { kWhitespace, kCharacter };

struct TokenizerConfig {
  TokenizerMode mode = TokenizerMode::kWhitespace;
  bool lowercase = false;
};

/// Deterministic tokenization. Whitespace mode splits on runs of Unicode
/// whitespace (ASCII whitespace plus the common UTF-8 space code points);
/// character mode yields one token per non-whitespace UTF-8 code point.
TokenSeq tokenize(std::string_view text, const TokenizerConfig& cfg);

/// One aligned source/target pair; the unit of retrieval.
struct SentencePair {
  std::uint64_t id = 0;
  TokenSeq source;
  TokenSeq target;
  std::string domain;
};

enum class Split { kTrain, kDev, kTest };

/// Token string -> dense integer id. Indices 0-3 are reserved.
class Vocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kBos = 1;
  static constexpr std::int32_t kEos = 2;
  static constexpr std::int32_t kUnk = 3;

  Vocab();

  /// Returns the id of `token`, inserting it if absent.
  std::int32_t add(const std::string& token);
  /// Returns the id of `token`, or kUnk if absent.
  std::int32_t lookup(const std::string& token) const;
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::int32_t size() const { return static_cast<std::int32_t>(tokens_.size()); }

  std::vector<std::int32_t> encode(const TokenSeq& toks) const;

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct Corpus {
  std::vector<SentencePair> pairs;
  Split split = Split::kTrain;
  Vocab vocab;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

enum class CorpusFormat { kTsv, kJsonl };

struct LoadOptions {
  CorpusFormat format = CorpusFormat::kTsv;
  TokenizerConfig tokenizer;
  std::string domain = "default";
  Split split = Split::kTrain;
  /// When set, malformed rows are skipped (counted) instead of aborting.
  bool skip_bad = false;
};

struct LoadStats {
  std::size_t rows_read = 0;
  std::size_t rows_skipped_bad = 0;
  /// Rows whose source or target tokenized to nothing.
  std::size_t rows_skipped_empty = 0;
};

/// Loads a parallel corpus from a TSV ("source<TAB>target") or JSONL
/// ({"source": ..., "target": ...}) file. Pairs appear in file order with
/// ids 0..n-1; the vocab covers both sides. A malformed row raises an error
/// naming the line number unless opts.skip_bad is set.
Corpus load_corpus(const std::string& path, const LoadOptions& opts, LoadStats* stats = nullptr);

/// Appends the rows of `path` to `c`, continuing the id sequence and
/// extending the vocab. Used to assemble multi-domain corpora.
void append_corpus(Corpus& c, const std::string& path, const LoadOptions& opts, LoadStats* stats = nullptr);

/// Keeps the first occurrence of each (source, target) pair and reassigns
/// ids densely in retained order. Idempotent.
Corpus dedupe(const Corpus& c);

/// Versioned binary snapshot.
void save_corpus(const Corpus& c, const std::string& path);
Corpus load_corpus_snapshot(const std::string& path);

void save_vocab_text(const Vocab& v, const std::string& path);
Vocab load_vocab_text(const std::string& path);

const char* split_name(Split s);
Split split_from_name(const std::string& name);

}  // namespace semimt

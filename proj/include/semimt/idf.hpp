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
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "semimt/corpus.hpp"
#include "semimt/neighbor.hpp"

namespace semimt {

/// Per-token IDF weights over the source side of a training corpus.
/// weight(t) = ln(corpus_size / n_t) with n_t the number of source
/// sentences containing t (set semantics). Tokens never seen in training
/// score as if n_t = 1, i.e. maximally rare.
class IdfTable {
 public:
  IdfTable() = default;
  IdfTable(std::unordered_map<std::string, double> weights, std::uint64_t corpus_size)
      : weights_(std::move(weights)), corpus_size_(corpus_size) {}

  double weight(const std::string& token) const;
  bool known(const std::string& token) const { return weights_.count(token) > 0; }
  std::uint64_t corpus_size() const { return corpus_size_; }
  const std::unordered_map<std::string, double>& weights() const { return weights_; }

 private:
  std::unordered_map<std::string, double> weights_;
  std::uint64_t corpus_size_ = 0;
};

/// Token -> strictly increasing list of pair ids whose source contains it.
/// Also carries, per pair, the sum of distinct-token IDF weights; this lets
/// retrieval score non-overlapping candidates without touching their tokens.
struct InvertedIndex {
  std::unordered_map<std::string, std::vector<std::uint64_t>> postings;
  /// pair id -> sum of weights over the pair's distinct source tokens.
  std::vector<double> pair_weight_sums;
  /// Pair ids ordered by (weight sum asc, id asc); best-first order for
  /// candidates that share no token with the query.
  std::vector<std::uint64_t> pairs_by_weight;
};

/// Builds the IDF table over the source side. Errors on an empty corpus.
IdfTable build_idf(const Corpus& c);

InvertedIndex build_inverted_index(const Corpus& c, const IdfTable& idf);

/// Similarity over distinct-token sets:
///   2 * sum_{t in a AND b} w(t)  -  sum_{t in a OR b} w(t),
/// accumulated over the sorted union (the canonical evaluation order).
/// Symmetric; self-similarity collapses to the sum of a's distinct weights.
double idf_set_similarity(const std::set<std::string>& a, const std::set<std::string>& b,
                          const IdfTable& idf);
double sentence_similarity(const TokenSeq& a, const TokenSeq& b, const IdfTable& idf);

/// Top-n most similar training pairs for a query, ties broken by ascending
/// pair id. `exclude_id` is never returned. Exactly equivalent to a brute
/// force scan of every pair.
NeighborSet retrieve_sentences(const TokenSeq& query, const Corpus& c, const IdfTable& idf,
                               const InvertedIndex& index, std::size_t n,
                               std::optional<std::uint64_t> exclude_id = std::nullopt,
                               std::optional<std::uint64_t> query_id = std::nullopt);

void save_idf_index(const IdfTable& idf, const InvertedIndex& index, const std::string& path);
void load_idf_index(const std::string& path, IdfTable& idf, InvertedIndex& index);

}  // namespace semimt

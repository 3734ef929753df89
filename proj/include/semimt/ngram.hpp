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
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "semimt/corpus.hpp"
#include "semimt/idf.hpp"
#include "semimt/neighbor.hpp"

namespace semimt {

/// The padding surface form used when an n-gram extends past the sentence.
inline const std::string kPadToken = "<pad>";

/// A fixed-width n-gram. `tokens` has exactly `width` entries; padding
/// appears only as a contiguous suffix. For indexed n-grams, (pair_id,
/// start) records the origin; start is 1-based.
struct NGram {
  std::vector<std::string> tokens;
  std::uint32_t width = 0;
  std::uint64_t pair_id = 0;
  std::uint32_t start = 0;

  std::uint32_t pad_count() const;
  /// Stable identity key over the full token sequence.
  std::string key() const;
};

/// N-grams of x at stride width/2: start positions 1, 1+n/2, 1+n, ... up to
/// T, tails padded. Covers every token; cardinality is ceil(T / (n/2)).
std::vector<NGram> reduced_ngrams(const TokenSeq& x, std::uint32_t width);

struct NGramRetrievalConfig {
  std::vector<std::uint32_t> widths;
  std::size_t train_cap = 10;
  std::uint64_t seed = 0;

  /// Errors unless widths is non-empty with every width even and >= 2.
  void validate() const;
};

/// Per width: distinct n-gram key -> entry with tokens, precomputed
/// distinct-token weight sum, and (pair_id, start) origins in ascending
/// order. Indexed n-grams come from reduced sets only.
struct NGramIndex {
  struct Entry {
    std::vector<std::string> tokens;
    double weight_sum = 0.0;  // sum of distinct non-pad token weights
    std::vector<std::pair<std::uint64_t, std::uint32_t>> origins;
  };
  struct WidthTable {
    std::unordered_map<std::string, std::size_t> by_key;
    std::vector<Entry> entries;
  };
  std::map<std::uint32_t, WidthTable> widths;
  IdfTable idf;
};

NGramIndex build_ngram_index(const Corpus& c, const NGramRetrievalConfig& cfg, const IdfTable& idf);

struct NGramCandidate {
  std::uint64_t pair_id = 0;
  std::uint32_t start = 0;
  double score = 0.0;
  std::size_t entry = 0;  // index into the width table
};

/// All indexed origins of q.width scored against q with the set similarity
/// (padding excluded), ordered by (score desc, pair_id asc, start asc).
/// Empty if the index has no entries for q.width.
std::vector<NGramCandidate> best_matching_ngram(const NGram& q, const NGramIndex& idx);

enum class RetrievalMode { kTrain, kDecode };

/// Neighbor retrieval via reduced n-gram sets. For every query n-gram, the
/// best-matching indexed n-gram is mapped to a containing sentence; when
/// several sentences contain it, one is chosen by a hash of (query n-gram,
/// seed). A sentence already retrieved advances to the next-most-similar
/// candidate. Train mode keeps the top train_cap by score; decode mode keeps
/// everything. exclude_id never appears.
NeighborSet retrieve_by_ngrams(const TokenSeq& x, const NGramIndex& idx,
                               const NGramRetrievalConfig& cfg, RetrievalMode mode,
                               std::optional<std::uint64_t> exclude_id = std::nullopt,
                               std::optional<std::uint64_t> query_id = std::nullopt);

void save_ngram_index(const NGramIndex& idx, const std::string& path);
NGramIndex load_ngram_index(const std::string& path);

}  // namespace semimt

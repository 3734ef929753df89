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
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semimt/corpus.hpp"
#include "semimt/neighbor.hpp"
#include "semimt/ngram.hpp"

namespace semimt {

/// Per-token dense vectors for a sentence. Implementations must be
/// deterministic (same sequence -> same matrix) and safe to call from
/// multiple threads.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  /// Returns one row per input token; all rows finite, fixed column count.
  virtual Eigen::MatrixXd embed(const TokenSeq& tokens) const = 0;
  virtual Eigen::Index dimension() const = 0;
};

/// Hash-seeded embeddings: each token's vector is a pure function of its
/// surface form and the seed. Components are uniform in [-1, 1).
class HashEmbeddingProvider : public EmbeddingProvider {
 public:
  HashEmbeddingProvider(Eigen::Index dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}
  Eigen::MatrixXd embed(const TokenSeq& tokens) const override;
  Eigen::Index dimension() const override { return dim_; }

 private:
  Eigen::Index dim_;
  std::uint64_t seed_;
};

/// Mean of the real-token rows of a span; rows [start, start+width-pad_count)
/// with start 1-based. Errors when the span is entirely padding.
Eigen::VectorXd ngram_embedding(const Eigen::MatrixXd& token_vectors, std::uint32_t start,
                                std::uint32_t width, std::uint32_t pad_count);

struct DenseNGramEntry {
  Eigen::VectorXd vector;
  std::uint64_t pair_id = 0;
  std::uint32_t start = 0;  // 1-based
  std::uint32_t width = 0;
};

struct DenseIndex {
  std::map<std::uint32_t, std::vector<DenseNGramEntry>> widths;
  Eigen::Index dimension = 0;
};

/// Mean-pooled vectors for every reduced n-gram of every training sentence.
/// A provider failure aborts the build naming the offending pair id.
DenseIndex build_dense_index(const Corpus& c, const EmbeddingProvider& provider,
                             const NGramRetrievalConfig& cfg);

/// Exact L2 nearest-neighbor retrieval over the dense index, with the same
/// sentence mapping, dedup-and-advance and train/decode capping as the
/// sparse n-gram strategy. Neighbor score = negated L2 distance.
NeighborSet retrieve_dense(const TokenSeq& x, const DenseIndex& idx,
                           const EmbeddingProvider& provider, const NGramRetrievalConfig& cfg,
                           RetrievalMode mode,
                           std::optional<std::uint64_t> exclude_id = std::nullopt,
                           std::optional<std::uint64_t> query_id = std::nullopt);

/// Versioned binary snapshot; vectors are stored as little-endian f32.
void save_dense_index(const DenseIndex& idx, const std::string& path);
DenseIndex load_dense_index(const std::string& path);

}  // namespace semimt

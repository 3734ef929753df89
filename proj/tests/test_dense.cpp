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

#include <cmath>
#include <cstdio>

#include <doctest.h>

#include "oracles.hpp"
#include "semimt/dense.hpp"

using namespace semimt;

namespace {

/// Test provider with hand-set vectors per token; position-blind.
class TableProvider : public EmbeddingProvider {
 public:
  TableProvider(std::map<std::string, Eigen::VectorXd> table, Eigen::Index dim)
      : table_(std::move(table)), dim_(dim) {}
  Eigen::MatrixXd embed(const TokenSeq& tokens) const override {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(tokens.size()), dim_);
    for (std::size_t i = 0; i < tokens.size(); ++i)
      m.row(static_cast<Eigen::Index>(i)) = table_.at(tokens[i]).transpose();
    return m;
  }
  Eigen::Index dimension() const override { return dim_; }

 private:
  std::map<std::string, Eigen::VectorXd> table_;
  Eigen::Index dim_;
};

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("ngram_embedding: worked means") {
  Eigen::MatrixXd rows(3, 2);
  rows << 1, 0, 0, 1, -1, 0;

  Eigen::VectorXd two = ngram_embedding(rows.topRows(2), 1, 2, 0);
  CHECK(two(0) == doctest::Approx(0.5));
  CHECK(two(1) == doctest::Approx(0.5));

  Eigen::VectorXd three = ngram_embedding(rows, 1, 4, 1);  // 3 real tokens + 1 pad
  CHECK(three(0) == doctest::Approx(0.0));
  CHECK(three(1) == doctest::Approx(1.0 / 3.0));

  Eigen::MatrixXd one(1, 2);
  one << 2, 2;
  Eigen::VectorXd single = ngram_embedding(one, 1, 4, 3);
  CHECK(single(0) == doctest::Approx(2.0));
  CHECK(single(1) == doctest::Approx(2.0));
}

TEST_CASE("ngram_embedding: fully padded span errors") {
  Eigen::MatrixXd rows(2, 2);
  rows.setZero();
  CHECK_THROWS_AS(ngram_embedding(rows, 1, 4, 4), std::runtime_error);
}

TEST_CASE("build_dense_index: reduced-set cardinality and validation") {
  Corpus c;
  c.pairs.push_back({0, {"a", "b", "c", "d", "e"}, {"T"}, "d"});
  HashEmbeddingProvider provider(8, 11);
  NGramRetrievalConfig cfg;
  cfg.widths = {4};
  DenseIndex idx = build_dense_index(c, provider, cfg);
  CHECK(idx.widths.at(4).size() == 3);  // starts 1, 3, 5
  CHECK(idx.dimension == 8);

  Corpus empty;
  CHECK_THROWS_AS(build_dense_index(empty, provider, cfg), std::runtime_error);
}

TEST_CASE("retrieve_dense: worked distance example") {
  // One-token sentences so each sentence contributes exactly one width-2
  // n-gram whose mean equals its token vector.
  std::map<std::string, Eigen::VectorXd> table;
  table["p"] = vec2(0.5, 0.5);
  table["r"] = vec2(1.0, 1.0);
  table["q"] = vec2(0.0, 0.0);
  TableProvider provider(std::move(table), 2);

  Corpus c;
  c.pairs.push_back({0, {"p"}, {"T0"}, "d"});
  c.pairs.push_back({1, {"r"}, {"T1"}, "d"});

  NGramRetrievalConfig cfg;
  cfg.widths = {2};
  DenseIndex idx = build_dense_index(c, provider, cfg);

  NeighborSet ns = retrieve_dense({"q"}, idx, provider, cfg, RetrievalMode::kDecode);
  REQUIRE(ns.neighbors.size() == 1);
  CHECK(ns.neighbors[0].pair_id == 0);
  CHECK(-ns.neighbors[0].score == doctest::Approx(0.707107).epsilon(1e-6));

  // exact match wins with distance 0
  NeighborSet self = retrieve_dense({"r"}, idx, provider, cfg, RetrievalMode::kDecode);
  REQUIRE(!self.neighbors.empty());
  CHECK(self.neighbors[0].pair_id == 1);
  CHECK(self.neighbors[0].score == doctest::Approx(0.0));
}

TEST_CASE("retrieve_dense: ties broken by (pair_id, start)") {
  std::map<std::string, Eigen::VectorXd> table;
  table["a"] = vec2(1.0, 0.0);
  table["b"] = vec2(1.0, 0.0);  // same vector: induced entries tie exactly
  table["q"] = vec2(0.0, 0.0);
  TableProvider provider(std::move(table), 2);
  Corpus c;
  c.pairs.push_back({0, {"b"}, {"T0"}, "d"});
  c.pairs.push_back({1, {"a"}, {"T1"}, "d"});
  NGramRetrievalConfig cfg;
  cfg.widths = {2};
  DenseIndex idx = build_dense_index(c, provider, cfg);
  NeighborSet ns = retrieve_dense({"q"}, idx, provider, cfg, RetrievalMode::kDecode);
  REQUIRE(!ns.neighbors.empty());
  CHECK(ns.neighbors[0].pair_id == 0);
}

TEST_CASE("retrieve_dense equals brute force on random corpora") {
  Rng rng(31);
  for (int iter = 0; iter < 10; ++iter) {
    Corpus c = oracle::random_corpus(rng, 60, 12, 8);
    HashEmbeddingProvider provider(16, rng.next_u64());
    NGramRetrievalConfig cfg;
    cfg.widths = {2, 4};
    cfg.seed = 1;
    DenseIndex idx = build_dense_index(c, provider, cfg);
    for (int q = 0; q < 3; ++q) {
      TokenSeq query = oracle::random_query(rng, 12, 8);
      std::optional<std::uint64_t> exclude;
      if (q == 2) exclude = rng.next_below(c.size());
      NeighborSet got = retrieve_dense(query, idx, provider, cfg, RetrievalMode::kDecode, exclude);
      NeighborSet want =
          oracle::retrieve_dense_brute(query, c, provider, cfg.widths, false, 0, exclude);
      REQUIRE(got.neighbors.size() == want.neighbors.size());
      for (std::size_t i = 0; i < got.neighbors.size(); ++i) {
        CHECK(got.neighbors[i].pair_id == want.neighbors[i].pair_id);
        CHECK(got.neighbors[i].score == want.neighbors[i].score);  // bit-exact
      }
    }
  }
}

TEST_CASE("retrieve_dense: translation invariance of returned identities") {
  Rng rng(77);
  Corpus c = oracle::random_corpus(rng, 40, 10, 6);
  NGramRetrievalConfig cfg;
  cfg.widths = {2};

  class ShiftedProvider : public EmbeddingProvider {
   public:
    ShiftedProvider(const EmbeddingProvider& base, double shift) : base_(base), shift_(shift) {}
    Eigen::MatrixXd embed(const TokenSeq& tokens) const override {
      return base_.embed(tokens).array() + shift_;
    }
    Eigen::Index dimension() const override { return base_.dimension(); }

   private:
    const EmbeddingProvider& base_;
    double shift_;
  };

  HashEmbeddingProvider base(8, 5);
  ShiftedProvider shifted(base, 3.75);
  DenseIndex idx0 = build_dense_index(c, base, cfg);
  DenseIndex idx1 = build_dense_index(c, shifted, cfg);
  TokenSeq query = oracle::random_query(rng, 10, 6);
  NeighborSet a = retrieve_dense(query, idx0, base, cfg, RetrievalMode::kDecode);
  NeighborSet b = retrieve_dense(query, idx1, shifted, cfg, RetrievalMode::kDecode);
  REQUIRE(a.neighbors.size() == b.neighbors.size());
  for (std::size_t i = 0; i < a.neighbors.size(); ++i)
    CHECK(a.neighbors[i].pair_id == b.neighbors[i].pair_id);
}

TEST_CASE("mean embedding is order-blind under a position-blind provider") {
  HashEmbeddingProvider provider(8, 9);
  TokenSeq a = {"x", "y", "z", "w"};
  TokenSeq b = {"w", "z", "y", "x"};
  Eigen::MatrixXd ma = provider.embed(a);
  Eigen::MatrixXd mb = provider.embed(b);
  Eigen::VectorXd ea = ngram_embedding(ma, 1, 4, 0);
  Eigen::VectorXd eb = ngram_embedding(mb, 1, 4, 0);
  CHECK((ea - eb).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dense index snapshot round trip (f32 storage)") {
  Rng rng(8);
  Corpus c = oracle::random_corpus(rng, 20, 8, 6);
  HashEmbeddingProvider provider(4, 2);
  NGramRetrievalConfig cfg;
  cfg.widths = {2, 4};
  DenseIndex idx = build_dense_index(c, provider, cfg);
  save_dense_index(idx, "test_tmp_dense.bin");
  DenseIndex idx2 = load_dense_index("test_tmp_dense.bin");
  CHECK(idx2.dimension == idx.dimension);
  for (const auto& [w, entries] : idx.widths) {
    const auto& entries2 = idx2.widths.at(w);
    REQUIRE(entries2.size() == entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      CHECK(entries2[i].pair_id == entries[i].pair_id);
      CHECK(entries2[i].start == entries[i].start);
      // f32 round trip
      CHECK((entries2[i].vector - entries[i].vector).lpNorm<Eigen::Infinity>() < 1e-6);
    }
  }
  std::remove("test_tmp_dense.bin");
}

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
#include <sstream>

#include <doctest.h>

#include "oracles.hpp"
#include "semimt/idf.hpp"

using namespace semimt;

namespace {

// sources: "a b c", "a b d", "a e", "f"
Corpus c4() {
  Corpus c;
  c.pairs.push_back({0, {"a", "b", "c"}, {"T0"}, "d"});
  c.pairs.push_back({1, {"a", "b", "d"}, {"T1"}, "d"});
  c.pairs.push_back({2, {"a", "e"}, {"T2"}, "d"});
  c.pairs.push_back({3, {"f"}, {"T3"}, "d"});
  for (auto& p : c.pairs) {
    for (auto& t : p.source) c.vocab.add(t);
    for (auto& t : p.target) c.vocab.add(t);
  }
  return c;
}

}  // namespace

TEST_CASE("build_idf: document frequencies over C4") {
  Corpus c = c4();
  IdfTable idf = build_idf(c);
  CHECK(idf.weight("a") == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-12));
  CHECK(idf.weight("a") == doctest::Approx(0.287682).epsilon(1e-5));
  CHECK(idf.weight("b") == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(idf.weight("c") == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("build_idf: token in every sentence has weight zero") {
  Corpus c;
  c.pairs.push_back({0, {"x", "p"}, {"T"}, "d"});
  c.pairs.push_back({1, {"x", "q"}, {"T"}, "d"});
  IdfTable idf = build_idf(c);
  CHECK(idf.weight("x") == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("build_idf: empty corpus errors") {
  Corpus c;
  CHECK_THROWS_AS(build_idf(c), std::runtime_error);
}

TEST_CASE("sentence_similarity: worked C4 values") {
  Corpus c = c4();
  IdfTable idf = build_idf(c);
  CHECK(sentence_similarity({"a", "b", "c"}, {"a", "b", "c"}, idf) ==
        doctest::Approx(2.367124).epsilon(1e-5));
  CHECK(sentence_similarity({"a", "b", "c"}, {"a", "b", "d"}, idf) ==
        doctest::Approx(-1.791759).epsilon(1e-5));
  CHECK(sentence_similarity({"a", "e"}, {"f"}, idf) == doctest::Approx(-3.060270).epsilon(1e-5));
}

TEST_CASE("sentence_similarity: symmetry and multiplicity blindness") {
  Corpus c = c4();
  IdfTable idf = build_idf(c);
  Rng rng(7);
  for (int iter = 0; iter < 50; ++iter) {
    TokenSeq a = oracle::random_query(rng, 8, 6);
    TokenSeq b = oracle::random_query(rng, 8, 6);
    CHECK(sentence_similarity(a, b, idf) == doctest::Approx(sentence_similarity(b, a, idf)).epsilon(1e-12));
    // duplicating a token changes nothing (set semantics)
    TokenSeq a2 = a;
    a2.push_back(a[0]);
    CHECK(sentence_similarity(a2, b, idf) == doctest::Approx(sentence_similarity(a, b, idf)).epsilon(1e-12));
  }
}

TEST_CASE("sentence_similarity: self-maximality over distinct-set variations") {
  Corpus c = c4();
  IdfTable idf = build_idf(c);
  Rng rng(11);
  for (int iter = 0; iter < 100; ++iter) {
    TokenSeq a = oracle::random_query(rng, 10, 6);
    TokenSeq b = oracle::random_query(rng, 10, 6);
    std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    if (sa == sb) continue;
    CHECK(sentence_similarity(a, a, idf) >= sentence_similarity(a, b, idf) - 1e-12);
  }
}

TEST_CASE("retrieve_sentences: worked C4 examples") {
  Corpus c = c4();
  IdfTable idf = build_idf(c);
  InvertedIndex index = build_inverted_index(c, idf);

  NeighborSet top2 = retrieve_sentences({"a", "b"}, c, idf, index, 2);
  REQUIRE(top2.neighbors.size() == 2);
  CHECK(top2.neighbors[0].pair_id == 0);  // tie broken by id
  CHECK(top2.neighbors[1].pair_id == 1);
  CHECK(top2.neighbors[0].score == doctest::Approx(-0.405465).epsilon(1e-5));
  CHECK(top2.neighbors[1].score == doctest::Approx(-0.405465).epsilon(1e-5));

  NeighborSet excl = retrieve_sentences({"a", "b"}, c, idf, index, 2, 0);
  REQUIRE(excl.neighbors.size() == 2);
  CHECK(excl.neighbors[0].pair_id == 1);
  CHECK(excl.neighbors[1].pair_id == 2);
  CHECK(excl.neighbors[1].score == doctest::Approx(-1.791759).epsilon(1e-5));

  CHECK(retrieve_sentences({"a", "b"}, c, idf, index, 0).neighbors.empty());
}

TEST_CASE("retrieve_sentences: fewer candidates than n returns all") {
  Corpus c = c4();
  IdfTable idf = build_idf(c);
  InvertedIndex index = build_inverted_index(c, idf);
  CHECK(retrieve_sentences({"a"}, c, idf, index, 100).neighbors.size() == 4);
  CHECK(retrieve_sentences({"a"}, c, idf, index, 100, 2).neighbors.size() == 3);
}

TEST_CASE("inverted index: every (token, id) occurrence appears exactly once") {
  Rng rng(23);
  for (int iter = 0; iter < 20; ++iter) {
    Corpus c = oracle::random_corpus(rng, 60, 15);
    IdfTable idf = build_idf(c);
    InvertedIndex index = build_inverted_index(c, idf);
    for (const auto& p : c.pairs) {
      std::set<std::string> distinct(p.source.begin(), p.source.end());
      for (const auto& t : distinct) {
        const auto& ids = index.postings.at(t);
        CHECK(std::count(ids.begin(), ids.end(), p.id) == 1);
      }
    }
    for (const auto& [tok, ids] : index.postings) {
      CHECK(std::is_sorted(ids.begin(), ids.end()));
      CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
    }
  }
}

TEST_CASE("retrieve_sentences equals brute force on random corpora") {
  Rng rng(42);
  for (int iter = 0; iter < 30; ++iter) {
    Corpus c = oracle::random_corpus(rng, 200, 50);
    IdfTable idf = build_idf(c);
    InvertedIndex index = build_inverted_index(c, idf);
    for (int q = 0; q < 5; ++q) {
      TokenSeq query = oracle::random_query(rng, 60, 8);  // may contain unseen tokens
      std::optional<std::uint64_t> exclude;
      if (q % 2 == 1) exclude = rng.next_below(c.size());
      NeighborSet got = retrieve_sentences(query, c, idf, index, 10, exclude);
      NeighborSet want = oracle::retrieve_sentences_brute(query, c, 10, exclude);
      REQUIRE(got.neighbors.size() == want.neighbors.size());
      for (std::size_t i = 0; i < got.neighbors.size(); ++i) {
        CHECK(got.neighbors[i].pair_id == want.neighbors[i].pair_id);
        CHECK(got.neighbors[i].score == doctest::Approx(want.neighbors[i].score).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("idf index snapshot round trip") {
  Corpus c = c4();
  IdfTable idf = build_idf(c);
  InvertedIndex index = build_inverted_index(c, idf);
  save_idf_index(idf, index, "test_tmp_idf.bin");
  IdfTable idf2;
  InvertedIndex index2;
  load_idf_index("test_tmp_idf.bin", idf2, index2);
  CHECK(idf2.corpus_size() == idf.corpus_size());
  CHECK(idf2.weight("a") == doctest::Approx(idf.weight("a")).epsilon(1e-15));
  CHECK(index2.postings.at("a") == index.postings.at("a"));
  NeighborSet a = retrieve_sentences({"a", "b"}, c, idf, index, 3);
  NeighborSet b = retrieve_sentences({"a", "b"}, c, idf2, index2, 3);
  REQUIRE(a.neighbors.size() == b.neighbors.size());
  for (std::size_t i = 0; i < a.neighbors.size(); ++i)
    CHECK(a.neighbors[i].pair_id == b.neighbors[i].pair_id);
  std::remove("test_tmp_idf.bin");
}

TEST_CASE("neighbor dump round trip with 12 significant digits") {
  NeighborSet s;
  s.query_id = 7;
  s.neighbors = {{3, -0.405465108108}, {1, 0.5}};
  std::ostringstream os;
  dump_neighbor_sets({s}, os);
  std::string line = os.str();
  CHECK(line.find("-0.405465108108") != std::string::npos);
  std::istringstream is(line);
  auto sets = load_neighbor_sets(is);
  REQUIRE(sets.size() == 1);
  REQUIRE(sets[0].neighbors.size() == 2);
  CHECK(*sets[0].query_id == 7);
  CHECK(sets[0].neighbors[0].pair_id == 3);
  CHECK(sets[0].neighbors[0].score == doctest::Approx(-0.405465108108).epsilon(1e-11));
}

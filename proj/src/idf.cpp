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

#include "semimt/idf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "semimt/common.hpp"

namespace semimt {

double IdfTable::weight(const std::string& token) const {
  auto it = weights_.find(token);
  if (it != weights_.end()) return it->second;
  // Unseen token: the n_t -> 1 limit.
  return std::log(static_cast<double>(corpus_size_));
}

IdfTable build_idf(const Corpus& c) {
  if (c.empty()) throw std::runtime_error("build_idf: empty corpus");
  std::unordered_map<std::string, std::uint64_t> doc_counts;
  for (const auto& p : c.pairs) {
    std::unordered_set<std::string_view> seen;
    for (const auto& t : p.source)
      if (seen.insert(t).second) ++doc_counts[t];
  }
  const double size = static_cast<double>(c.size());
  std::unordered_map<std::string, double> weights;
  weights.reserve(doc_counts.size());
  for (const auto& [tok, n_t] : doc_counts)
    weights.emplace(tok, std::log(size / static_cast<double>(n_t)));
  return IdfTable(std::move(weights), c.size());
}

InvertedIndex build_inverted_index(const Corpus& c, const IdfTable& idf) {
  InvertedIndex index;
  index.pair_weight_sums.resize(c.size(), 0.0);
  for (const auto& p : c.pairs) {
    // Sorted distinct iteration keeps the weight sums of equal token sets
    // bitwise identical, so tie handling is stable.
    std::set<std::string> distinct(p.source.begin(), p.source.end());
    for (const auto& t : distinct) {
      index.postings[t].push_back(p.id);
      index.pair_weight_sums[p.id] += idf.weight(t);
    }
  }
  // Pairs are visited in ascending id order, so posting lists come out
  // strictly increasing without a sort.
  index.pairs_by_weight.resize(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) index.pairs_by_weight[i] = c.pairs[i].id;
  std::stable_sort(index.pairs_by_weight.begin(), index.pairs_by_weight.end(),
                   [&](std::uint64_t a, std::uint64_t b) {
                     if (index.pair_weight_sums[a] != index.pair_weight_sums[b])
                       return index.pair_weight_sums[a] < index.pair_weight_sums[b];
                     return a < b;
                   });
  return index;
}

double idf_set_similarity(const std::set<std::string>& a, const std::set<std::string>& b,
                          const IdfTable& idf) {
  // Accumulate over the sorted union so equal set pairs produce bitwise
  // equal scores regardless of how the sets were assembled.
  std::set<std::string> uni_set(a);
  uni_set.insert(b.begin(), b.end());
  double inter = 0.0, uni = 0.0;
  for (const auto& t : uni_set) {
    double w = idf.weight(t);
    uni += w;
    if (a.count(t) && b.count(t)) inter += w;
  }
  return 2.0 * inter - uni;
}

double sentence_similarity(const TokenSeq& a, const TokenSeq& b, const IdfTable& idf) {
  std::set<std::string> sa(a.begin(), a.end());
  std::set<std::string> sb(b.begin(), b.end());
  return idf_set_similarity(sa, sb, idf);
}

NeighborSet retrieve_sentences(const TokenSeq& query, const Corpus& c, const IdfTable& idf,
                               const InvertedIndex& index, std::size_t n,
                               std::optional<std::uint64_t> exclude_id,
                               std::optional<std::uint64_t> query_id) {
  NeighborSet out;
  out.query_id = query_id;
  if (n == 0 || c.empty()) return out;

  std::set<std::string> qset(query.begin(), query.end());

  // The index narrows the candidate set; every candidate is then rescored
  // through sentence_similarity so the returned scores are bitwise the
  // ones a full scan would produce, tie-breaks included.
  std::unordered_set<std::uint64_t> overlapped;
  for (const auto& t : qset) {
    auto it = index.postings.find(t);
    if (it == index.postings.end()) continue;
    for (std::uint64_t id : it->second) overlapped.insert(id);
  }

  std::vector<std::uint64_t> candidates(overlapped.begin(), overlapped.end());
  // A pair sharing no token scores -(Q + L) with L its weight sum, so the
  // best disjoint candidates are the smallest-L ones; take a margin beyond
  // n. Within an equal-L block the list ascends by id, which is exactly
  // the final tie order.
  std::size_t wanted = 2 * n + 16;
  for (std::uint64_t id : index.pairs_by_weight) {
    if (wanted == 0) break;
    if (overlapped.count(id)) continue;
    candidates.push_back(id);
    --wanted;
  }

  struct Scored {
    std::uint64_t id;
    double score;
  };
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  for (std::uint64_t id : candidates) {
    if (exclude_id && id == *exclude_id) continue;
    scored.push_back({id, sentence_similarity(query, c.pairs[id].source, idf)});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (scored.size() > n) scored.resize(n);

  out.neighbors.reserve(scored.size());
  for (const auto& s : scored) out.neighbors.push_back({s.id, s.score});
  return out;
}

namespace {
constexpr char kIdfMagic[] = "SMTIDFX1";
}

void save_idf_index(const IdfTable& idf, const InvertedIndex& index, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write idf index: " + path);
  os.write(kIdfMagic, 8);
  put_le<std::uint32_t>(os, 1);
  put_le<std::uint64_t>(os, idf.corpus_size());
  // Sorted dumps keep the snapshot byte-stable across hash-map orderings.
  std::map<std::string, double> sorted_weights(idf.weights().begin(), idf.weights().end());
  put_le<std::uint64_t>(os, sorted_weights.size());
  for (const auto& [tok, w] : sorted_weights) {
    put_str(os, tok);
    put_f64(os, w);
  }
  std::map<std::string, const std::vector<std::uint64_t>*> sorted_postings;
  for (const auto& [tok, ids] : index.postings) sorted_postings.emplace(tok, &ids);
  put_le<std::uint64_t>(os, sorted_postings.size());
  for (const auto& [tok, ids] : sorted_postings) {
    put_str(os, tok);
    put_le<std::uint64_t>(os, ids->size());
    for (std::uint64_t id : *ids) put_le<std::uint64_t>(os, id);
  }
  put_le<std::uint64_t>(os, index.pair_weight_sums.size());
  for (double s : index.pair_weight_sums) put_f64(os, s);
  for (std::uint64_t id : index.pairs_by_weight) put_le<std::uint64_t>(os, id);
  if (!os) throw std::runtime_error("write failed: " + path);
}

void load_idf_index(const std::string& path, IdfTable& idf, InvertedIndex& index) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open idf index: " + path);
  expect_magic(is, std::string_view(kIdfMagic, 8));
  std::uint32_t version = get_le<std::uint32_t>(is);
  if (version != 1) throw std::runtime_error("unsupported idf index version");
  std::uint64_t corpus_size = get_le<std::uint64_t>(is);
  std::uint64_t nw = get_le<std::uint64_t>(is);
  std::unordered_map<std::string, double> weights;
  weights.reserve(nw);
  for (std::uint64_t i = 0; i < nw; ++i) {
    std::string tok = get_str(is);
    weights.emplace(std::move(tok), get_f64(is));
  }
  idf = IdfTable(std::move(weights), corpus_size);
  index = InvertedIndex{};
  std::uint64_t np = get_le<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < np; ++i) {
    std::string tok = get_str(is);
    std::uint64_t nid = get_le<std::uint64_t>(is);
    auto& ids = index.postings[tok];
    ids.reserve(nid);
    for (std::uint64_t k = 0; k < nid; ++k) ids.push_back(get_le<std::uint64_t>(is));
  }
  std::uint64_t ns = get_le<std::uint64_t>(is);
  index.pair_weight_sums.reserve(ns);
  for (std::uint64_t i = 0; i < ns; ++i) index.pair_weight_sums.push_back(get_f64(is));
  index.pairs_by_weight.reserve(ns);
  for (std::uint64_t i = 0; i < ns; ++i) index.pairs_by_weight.push_back(get_le<std::uint64_t>(is));
}

}  // namespace semimt

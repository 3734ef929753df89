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

// Brute-force reference implementations used only by tests. These rescore
// everything from first principles (full scans, independent IDF counting)
// so the indexed retrieval paths have something honest to be checked
// against.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semimt/common.hpp"
#include "semimt/corpus.hpp"
#include "semimt/dense.hpp"
#include "semimt/neighbor.hpp"

namespace semimt::oracle {

// -- Eq. 1 sentence retrieval ------------------------------------------------

inline std::map<std::string, double> idf_weights(const Corpus& c) {
  std::map<std::string, int> df;
  for (const auto& p : c.pairs) {
    std::set<std::string> seen(p.source.begin(), p.source.end());
    for (const auto& t : seen) ++df[t];
  }
  std::map<std::string, double> w;
  for (const auto& [tok, n] : df)
    w[tok] = std::log(static_cast<double>(c.size()) / static_cast<double>(n));
  return w;
}

inline double token_weight(const std::map<std::string, double>& w, std::uint64_t corpus_size,
                           const std::string& t) {
  auto it = w.find(t);
  return it != w.end() ? it->second : std::log(static_cast<double>(corpus_size));
}

// Scores accumulate over the sorted union, the documented canonical
// evaluation order.
inline double similarity(const TokenSeq& a, const TokenSeq& b,
                         const std::map<std::string, double>& w, std::uint64_t corpus_size) {
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  double inter = 0.0, uni = 0.0;
  std::set<std::string> all(sa);
  all.insert(sb.begin(), sb.end());
  for (const auto& t : all) {
    double tw = token_weight(w, corpus_size, t);
    uni += tw;
    if (sa.count(t) && sb.count(t)) inter += tw;
  }
  return 2.0 * inter - uni;
}

inline NeighborSet retrieve_sentences_brute(const TokenSeq& query, const Corpus& c, std::size_t n,
                                            std::optional<std::uint64_t> exclude = std::nullopt) {
  auto w = idf_weights(c);
  std::vector<Neighbor> all;
  for (const auto& p : c.pairs) {
    if (exclude && p.id == *exclude) continue;
    all.push_back({p.id, similarity(query, p.source, w, c.size())});
  }
  std::stable_sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.pair_id < b.pair_id;
  });
  if (all.size() > n) all.resize(n);
  NeighborSet out;
  out.neighbors = std::move(all);
  return out;
}

// -- n-gram retrieval ---------------------------------------------------------

struct BruteNGram {
  std::vector<std::string> tokens;  // padded to width with "<pad>"
  std::uint64_t pair_id = 0;
  std::uint32_t start = 0;
};

inline std::vector<BruteNGram> strided_ngrams(const TokenSeq& x, std::uint32_t width,
                                              std::uint64_t pair_id = 0) {
  std::vector<BruteNGram> out;
  for (std::uint32_t start = 1; start <= x.size(); start += width / 2) {
    BruteNGram g;
    g.pair_id = pair_id;
    g.start = start;
    for (std::uint32_t k = 0; k < width; ++k)
      g.tokens.push_back(start + k <= x.size() ? x[start + k - 1] : std::string("<pad>"));
    out.push_back(std::move(g));
  }
  return out;
}

inline std::set<std::string> content(const std::vector<std::string>& toks) {
  std::set<std::string> s;
  for (const auto& t : toks)
    if (t != "<pad>") s.insert(t);
  return s;
}

inline double set_similarity(const std::set<std::string>& a, const std::set<std::string>& b,
                             const std::map<std::string, double>& w, std::uint64_t corpus_size) {
  double inter = 0.0, uni = 0.0;
  std::set<std::string> all(a);
  all.insert(b.begin(), b.end());
  for (const auto& t : all) {
    double tw = token_weight(w, corpus_size, t);
    uni += tw;
    if (a.count(t) && b.count(t)) inter += tw;
  }
  return 2.0 * inter - uni;
}

// Replays the documented retrieval rule with full scans: best entry by
// (score desc, pair, start), sentence choice by fnv1a(query key, seed),
// advance past sentences already retrieved, cap in train mode.
inline NeighborSet retrieve_by_ngrams_brute(const TokenSeq& x, const Corpus& c,
                                            const std::vector<std::uint32_t>& widths,
                                            std::uint64_t seed, bool train_mode, std::size_t cap,
                                            std::optional<std::uint64_t> exclude = std::nullopt) {
  auto w = idf_weights(c);
  NeighborSet out;
  auto in_set = [&](std::uint64_t id) {
    return std::any_of(out.neighbors.begin(), out.neighbors.end(),
                       [&](const Neighbor& n) { return n.pair_id == id; });
  };
  for (std::uint32_t width : widths) {
    // every indexed n-gram of this width
    std::vector<BruteNGram> indexed;
    for (const auto& p : c.pairs)
      for (auto& g : strided_ngrams(p.source, width, p.id)) indexed.push_back(std::move(g));

    for (const auto& q : strided_ngrams(x, width)) {
      auto qset = content(q.tokens);
      struct Cand {
        double score;
        std::uint64_t pair_id;
        std::uint32_t start;
        std::string key;
      };
      std::vector<Cand> cands;
      for (const auto& e : indexed) {
        if (exclude && e.pair_id == *exclude) continue;
        std::string key;
        for (const auto& t : e.tokens) key += t + '\x01';
        cands.push_back({set_similarity(qset, content(e.tokens), w, c.size()), e.pair_id, e.start,
                         std::move(key)});
      }
      std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.pair_id != b.pair_id) return a.pair_id < b.pair_id;
        return a.start < b.start;
      });
      if (cands.empty()) continue;
      std::vector<std::uint64_t> sentences;
      for (const auto& cand : cands) {
        if (cand.key != cands[0].key || cand.score != cands[0].score) continue;
        if (std::find(sentences.begin(), sentences.end(), cand.pair_id) == sentences.end())
          sentences.push_back(cand.pair_id);
      }
      std::string qkey;
      for (const auto& t : q.tokens) qkey += t + '\x01';
      std::uint64_t h = fnv1a_u64(seed, fnv1a(qkey));
      std::uint64_t chosen = sentences[static_cast<std::size_t>(h % sentences.size())];
      double score = cands[0].score;
      if (in_set(chosen)) {
        bool found = false;
        for (const auto& cand : cands) {
          if (!in_set(cand.pair_id)) {
            chosen = cand.pair_id;
            score = cand.score;
            found = true;
            break;
          }
        }
        if (!found) continue;
      }
      out.neighbors.push_back({chosen, score});
    }
  }
  out.canonicalize();
  if (train_mode) out.truncate(cap);
  return out;
}

// -- dense retrieval ----------------------------------------------------------

inline NeighborSet retrieve_dense_brute(const TokenSeq& x, const Corpus& c,
                                        const EmbeddingProvider& provider,
                                        const std::vector<std::uint32_t>& widths, bool train_mode,
                                        std::size_t cap,
                                        std::optional<std::uint64_t> exclude = std::nullopt) {
  struct Entry {
    Eigen::VectorXd v;
    std::uint64_t pair_id;
    std::uint32_t start;
  };
  NeighborSet out;
  auto in_set = [&](std::uint64_t id) {
    return std::any_of(out.neighbors.begin(), out.neighbors.end(),
                       [&](const Neighbor& n) { return n.pair_id == id; });
  };
  auto mean_vec = [&](const Eigen::MatrixXd& m, const BruteNGram& g) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(m.cols());
    int real = 0;
    for (std::uint32_t k = 0; k < g.tokens.size(); ++k) {
      if (g.tokens[k] == "<pad>") continue;
      sum += m.row(g.start - 1 + k).transpose();
      ++real;
    }
    return Eigen::VectorXd(sum / real);
  };
  for (std::uint32_t width : widths) {
    std::vector<Entry> entries;
    for (const auto& p : c.pairs) {
      Eigen::MatrixXd m = provider.embed(p.source);
      for (const auto& g : strided_ngrams(p.source, width, p.id))
        entries.push_back({mean_vec(m, g), p.id, g.start});
    }
    Eigen::MatrixXd qm = provider.embed(x);
    for (const auto& q : strided_ngrams(x, width)) {
      Eigen::VectorXd qv = mean_vec(qm, q);
      struct Cand {
        double dist;
        std::uint64_t pair_id;
        std::uint32_t start;
      };
      std::vector<Cand> cands;
      for (const auto& e : entries) {
        if (exclude && e.pair_id == *exclude) continue;
        cands.push_back({(qv - e.v).norm(), e.pair_id, e.start});
      }
      if (cands.empty()) continue;
      std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.pair_id != b.pair_id) return a.pair_id < b.pair_id;
        return a.start < b.start;
      });
      for (const auto& cand : cands) {
        if (in_set(cand.pair_id)) continue;
        out.neighbors.push_back({cand.pair_id, -cand.dist});
        break;
      }
    }
  }
  out.canonicalize();
  if (train_mode) out.truncate(cap);
  return out;
}

// -- finite differences -------------------------------------------------------

/// Central-difference gradient of f at x0, elementwise, h = 1e-5.
inline Eigen::MatrixXd finite_diff(const std::function<double(const Eigen::MatrixXd&)>& f,
                                   const Eigen::MatrixXd& x0, double h = 1e-5) {
  Eigen::MatrixXd g(x0.rows(), x0.cols());
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    Eigen::MatrixXd xp = x0, xm = x0;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(1, |a_i|, |b_i|)
inline double max_rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double denom = std::max({1.0, std::abs(a(i)), std::abs(b(i))});
    worst = std::max(worst, std::abs(a(i) - b(i)) / denom);
  }
  return worst;
}

// Random corpus generator shared by the oracle-equivalence suites.
inline Corpus random_corpus(Rng& rng, std::size_t max_pairs, std::size_t vocab_size,
                            std::size_t max_len = 8) {
  Corpus c;
  std::size_t n = 1 + rng.next_below(max_pairs);
  for (std::size_t i = 0; i < n; ++i) {
    SentencePair p;
    p.id = i;
    std::size_t len = 1 + rng.next_below(max_len);
    for (std::size_t k = 0; k < len; ++k)
      p.source.push_back("v" + std::to_string(rng.next_below(vocab_size)));
    p.target.push_back("y" + std::to_string(i));
    p.domain = "synthetic";
    for (const auto& t : p.source) c.vocab.add(t);
    for (const auto& t : p.target) c.vocab.add(t);
    c.pairs.push_back(std::move(p));
  }
  return c;
}

inline TokenSeq random_query(Rng& rng, std::size_t vocab_size, std::size_t max_len = 8) {
  TokenSeq q;
  std::size_t len = 1 + rng.next_below(max_len);
  for (std::size_t k = 0; k < len; ++k) q.push_back("v" + std::to_string(rng.next_below(vocab_size)));
  return q;
}

}  // namespace semimt::oracle

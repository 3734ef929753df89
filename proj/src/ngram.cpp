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

#include "semimt/ngram.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include "semimt/common.hpp"

namespace semimt {

std::uint32_t NGram::pad_count() const {
  std::uint32_t n = 0;
  for (auto it = tokens.rbegin(); it != tokens.rend() && *it == kPadToken; ++it) ++n;
  return n;
}

std::string NGram::key() const {
  std::string k;
  for (const auto& t : tokens) {
    k += t;
    k += '\x01';
  }
  return k;
}

std::vector<NGram> reduced_ngrams(const TokenSeq& x, std::uint32_t width) {
  if (width < 2 || width % 2 != 0)
    throw std::runtime_error("reduced_ngrams: width must be even and >= 2, got " + std::to_string(width));
  if (x.empty()) throw std::runtime_error("reduced_ngrams: empty sentence");
  const std::uint32_t stride = width / 2;
  const std::uint32_t t_len = static_cast<std::uint32_t>(x.size());
  std::vector<NGram> out;
  out.reserve((t_len + stride - 1) / stride);
  for (std::uint32_t start = 1; start <= t_len; start += stride) {
    NGram g;
    g.width = width;
    g.start = start;
    g.tokens.reserve(width);
    for (std::uint32_t k = 0; k < width; ++k) {
      std::uint32_t pos = start + k;  // 1-based
      g.tokens.push_back(pos <= t_len ? x[pos - 1] : kPadToken);
    }
    out.push_back(std::move(g));
  }
  return out;
}

void NGramRetrievalConfig::validate() const {
  if (widths.empty()) throw std::runtime_error("n-gram retrieval: widths list is empty");
  for (std::uint32_t w : widths)
    if (w < 2 || w % 2 != 0)
      throw std::runtime_error("n-gram retrieval: width must be even and >= 2, got " + std::to_string(w));
  if (train_cap == 0) throw std::runtime_error("n-gram retrieval: train_cap must be positive");
}

namespace {

// Distinct non-pad tokens of an n-gram.
std::set<std::string> content_set(const std::vector<std::string>& tokens) {
  std::set<std::string> s;
  for (const auto& t : tokens)
    if (t != kPadToken) s.insert(t);
  return s;
}

}  // namespace

NGramIndex build_ngram_index(const Corpus& c, const NGramRetrievalConfig& cfg, const IdfTable& idf) {
  cfg.validate();
  NGramIndex idx;
  idx.idf = idf;
  for (std::uint32_t w : cfg.widths) {
    auto& table = idx.widths[w];  // touch every configured width, even if unused
    for (const auto& p : c.pairs) {
      for (const auto& g : reduced_ngrams(p.source, w)) {
        std::string key = g.key();
        auto it = table.by_key.find(key);
        std::size_t ei;
        if (it == table.by_key.end()) {
          ei = table.entries.size();
          table.by_key.emplace(std::move(key), ei);
          NGramIndex::Entry e;
          e.tokens = g.tokens;
          for (const auto& t : content_set(g.tokens)) e.weight_sum += idf.weight(t);
          table.entries.push_back(std::move(e));
        } else {
          ei = it->second;
        }
        table.entries[ei].origins.emplace_back(p.id, g.start);
      }
    }
    // Pairs are scanned in ascending id order and starts ascend within a
    // sentence, so origin lists are already sorted.
  }
  return idx;
}

std::vector<NGramCandidate> best_matching_ngram(const NGram& q, const NGramIndex& idx) {
  std::vector<NGramCandidate> out;
  auto wit = idx.widths.find(q.width);
  if (wit == idx.widths.end()) return out;
  const auto& table = wit->second;

  const std::set<std::string> qset = content_set(q.tokens);

  for (std::size_t ei = 0; ei < table.entries.size(); ++ei) {
    const auto& e = table.entries[ei];
    double score = idf_set_similarity(qset, content_set(e.tokens), idx.idf);
    for (const auto& [pair_id, start] : e.origins) out.push_back({pair_id, start, score, ei});
  }
  std::sort(out.begin(), out.end(), [](const NGramCandidate& a, const NGramCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.pair_id != b.pair_id) return a.pair_id < b.pair_id;
    return a.start < b.start;
  });
  return out;
}

NeighborSet retrieve_by_ngrams(const TokenSeq& x, const NGramIndex& idx,
                               const NGramRetrievalConfig& cfg, RetrievalMode mode,
                               std::optional<std::uint64_t> exclude_id,
                               std::optional<std::uint64_t> query_id) {
  cfg.validate();
  NeighborSet out;
  out.query_id = query_id;

  for (std::uint32_t w : cfg.widths) {
    for (const auto& q : reduced_ngrams(x, w)) {
      std::vector<NGramCandidate> cands = best_matching_ngram(q, idx);
      if (exclude_id)
        std::erase_if(cands, [&](const NGramCandidate& c) { return c.pair_id == *exclude_id; });
      if (cands.empty()) continue;

      // The best-matching n-gram is the entry owning the top candidate.
      // Collect the distinct sentences containing it, in candidate order,
      // and pick one by a hash of (query n-gram, seed).
      const std::size_t best_entry = cands[0].entry;
      std::vector<std::size_t> same_entry;  // candidate indices
      std::vector<std::uint64_t> sentences;
      for (std::size_t i = 0; i < cands.size(); ++i) {
        if (cands[i].entry != best_entry || cands[i].score != cands[0].score) continue;
        if (std::find(sentences.begin(), sentences.end(), cands[i].pair_id) == sentences.end()) {
          sentences.push_back(cands[i].pair_id);
          same_entry.push_back(i);
        }
      }
      std::uint64_t h = fnv1a_u64(cfg.seed, fnv1a(q.key()));
      const std::size_t pick = static_cast<std::size_t>(h % sentences.size());

      std::size_t chosen_idx = same_entry[pick];
      if (out.contains(cands[chosen_idx].pair_id)) {
        // Already retrieved: advance to the next most similar candidate.
        chosen_idx = cands.size();
        for (std::size_t i = 0; i < cands.size(); ++i) {
          if (!out.contains(cands[i].pair_id)) {
            chosen_idx = i;
            break;
          }
        }
        if (chosen_idx == cands.size()) continue;  // every sentence already present
      }
      const auto& c = cands[chosen_idx];
      out.neighbors.push_back({c.pair_id, c.score});
      out.matches.push_back({q.width, q.start, c.pair_id, c.start});
    }
  }

  out.canonicalize();
  if (mode == RetrievalMode::kTrain) out.truncate(cfg.train_cap);
  return out;
}

namespace {
constexpr char kNgMagic[] = "SMTNGIX1";
}

void save_ngram_index(const NGramIndex& idx, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write ngram index: " + path);
  os.write(kNgMagic, 8);
  put_le<std::uint32_t>(os, 1);
  put_le<std::uint64_t>(os, idx.idf.corpus_size());
  std::map<std::string, double> sorted_weights(idx.idf.weights().begin(), idx.idf.weights().end());
  put_le<std::uint64_t>(os, sorted_weights.size());
  for (const auto& [tok, wgt] : sorted_weights) {
    put_str(os, tok);
    put_f64(os, wgt);
  }
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(idx.widths.size()));
  for (const auto& [w, table] : idx.widths) {
    put_le<std::uint32_t>(os, w);
    put_le<std::uint64_t>(os, table.entries.size());
    for (const auto& e : table.entries) {
      put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.tokens.size()));
      for (const auto& t : e.tokens) put_str(os, t);
      put_f64(os, e.weight_sum);
      put_le<std::uint64_t>(os, e.origins.size());
      for (const auto& [pair_id, start] : e.origins) {
        put_le<std::uint64_t>(os, pair_id);
        put_le<std::uint32_t>(os, start);
      }
    }
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

NGramIndex load_ngram_index(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open ngram index: " + path);
  expect_magic(is, std::string_view(kNgMagic, 8));
  std::uint32_t version = get_le<std::uint32_t>(is);
  if (version != 1) throw std::runtime_error("unsupported ngram index version");
  NGramIndex idx;
  std::uint64_t corpus_size = get_le<std::uint64_t>(is);
  std::uint64_t nw = get_le<std::uint64_t>(is);
  std::unordered_map<std::string, double> weights;
  weights.reserve(nw);
  for (std::uint64_t i = 0; i < nw; ++i) {
    std::string tok = get_str(is);
    weights.emplace(std::move(tok), get_f64(is));
  }
  idx.idf = IdfTable(std::move(weights), corpus_size);
  std::uint32_t nwidths = get_le<std::uint32_t>(is);
  for (std::uint32_t k = 0; k < nwidths; ++k) {
    std::uint32_t w = get_le<std::uint32_t>(is);
    auto& table = idx.widths[w];
    std::uint64_t ne = get_le<std::uint64_t>(is);
    table.entries.reserve(ne);
    for (std::uint64_t i = 0; i < ne; ++i) {
      NGramIndex::Entry e;
      std::uint32_t nt = get_le<std::uint32_t>(is);
      e.tokens.reserve(nt);
      for (std::uint32_t j = 0; j < nt; ++j) e.tokens.push_back(get_str(is));
      e.weight_sum = get_f64(is);
      std::uint64_t no = get_le<std::uint64_t>(is);
      e.origins.reserve(no);
      for (std::uint64_t j = 0; j < no; ++j) {
        std::uint64_t pair_id = get_le<std::uint64_t>(is);
        std::uint32_t start = get_le<std::uint32_t>(is);
        e.origins.emplace_back(pair_id, start);
      }
      NGram tmp;
      tmp.tokens = e.tokens;
      table.by_key.emplace(tmp.key(), table.entries.size());
      table.entries.push_back(std::move(e));
    }
  }
  return idx;
}

}  // namespace semimt

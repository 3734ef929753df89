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

#include "semimt/dense.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "semimt/common.hpp"

namespace semimt {

Eigen::MatrixXd HashEmbeddingProvider::embed(const TokenSeq& tokens) const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(tokens.size()), dim_);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::uint64_t state = fnv1a_u64(seed_, fnv1a(tokens[i]));
    for (Eigen::Index j = 0; j < dim_; ++j) {
      double u = static_cast<double>(splitmix64(state) >> 11) * (1.0 / 9007199254740992.0);
      m(static_cast<Eigen::Index>(i), j) = 2.0 * u - 1.0;
    }
  }
  return m;
}

Eigen::VectorXd ngram_embedding(const Eigen::MatrixXd& token_vectors, std::uint32_t start,
                                std::uint32_t width, std::uint32_t pad_count) {
  if (width <= pad_count) throw std::runtime_error("ngram_embedding: span is entirely padding");
  const std::uint32_t real = width - pad_count;
  if (start < 1 || static_cast<Eigen::Index>(start - 1 + real) > token_vectors.rows())
    throw std::runtime_error("ngram_embedding: span exceeds token matrix");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(token_vectors.cols());
  for (std::uint32_t k = 0; k < real; ++k) sum += token_vectors.row(static_cast<Eigen::Index>(start - 1 + k)).transpose();
  return sum / static_cast<double>(real);
}

DenseIndex build_dense_index(const Corpus& c, const EmbeddingProvider& provider,
                             const NGramRetrievalConfig& cfg) {
  cfg.validate();
  if (c.empty()) throw std::runtime_error("build_dense_index: empty corpus");
  DenseIndex idx;
  idx.dimension = provider.dimension();
  for (std::uint32_t w : cfg.widths) idx.widths[w];
  for (const auto& p : c.pairs) {
    Eigen::MatrixXd vecs;
    try {
      vecs = provider.embed(p.source);
    } catch (const std::exception& e) {
      throw std::runtime_error("build_dense_index: provider failed on pair " +
                               std::to_string(p.id) + ": " + e.what());
    }
    if (vecs.rows() != static_cast<Eigen::Index>(p.source.size()) || vecs.cols() != idx.dimension ||
        !vecs.allFinite())
      throw std::runtime_error("build_dense_index: provider output invalid on pair " +
                               std::to_string(p.id));
    for (std::uint32_t w : cfg.widths) {
      for (const auto& g : reduced_ngrams(p.source, w)) {
        DenseNGramEntry e;
        e.vector = ngram_embedding(vecs, g.start, g.width, g.pad_count());
        e.pair_id = p.id;
        e.start = g.start;
        e.width = w;
        idx.widths[w].push_back(std::move(e));
      }
    }
  }
  return idx;
}

NeighborSet retrieve_dense(const TokenSeq& x, const DenseIndex& idx,
                           const EmbeddingProvider& provider, const NGramRetrievalConfig& cfg,
                           RetrievalMode mode, std::optional<std::uint64_t> exclude_id,
                           std::optional<std::uint64_t> query_id) {
  cfg.validate();
  if (provider.dimension() != idx.dimension)
    throw std::runtime_error("retrieve_dense: provider dimension does not match index");
  NeighborSet out;
  out.query_id = query_id;

  Eigen::MatrixXd vecs = provider.embed(x);
  if (vecs.rows() != static_cast<Eigen::Index>(x.size()) || !vecs.allFinite())
    throw std::runtime_error("retrieve_dense: provider output invalid for query");

  struct Cand {
    std::uint64_t pair_id;
    std::uint32_t start;
    double dist;
  };

  for (std::uint32_t w : cfg.widths) {
    auto wit = idx.widths.find(w);
    if (wit == idx.widths.end() || wit->second.empty()) continue;
    const auto& entries = wit->second;
    for (const auto& g : reduced_ngrams(x, w)) {
      Eigen::VectorXd qv = ngram_embedding(vecs, g.start, g.width, g.pad_count());
      std::vector<Cand> cands;
      cands.reserve(entries.size());
      for (const auto& e : entries) {
        if (exclude_id && e.pair_id == *exclude_id) continue;
        cands.push_back({e.pair_id, e.start, (qv - e.vector).norm()});
      }
      if (cands.empty()) continue;
      std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.pair_id != b.pair_id) return a.pair_id < b.pair_id;
        return a.start < b.start;
      });
      // Closest first; a sentence already retrieved advances to the next
      // closest entry.
      for (const auto& c : cands) {
        if (out.contains(c.pair_id)) continue;
        out.neighbors.push_back({c.pair_id, -c.dist});
        out.matches.push_back({w, g.start, c.pair_id, c.start});
        break;
      }
    }
  }

  out.canonicalize();
  if (mode == RetrievalMode::kTrain) out.truncate(cfg.train_cap);
  return out;
}

namespace {
constexpr char kDenseMagic[] = "SMTDNSX1";
}

void save_dense_index(const DenseIndex& idx, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write dense index: " + path);
  os.write(kDenseMagic, 8);
  put_le<std::uint32_t>(os, 1);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(idx.dimension));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(idx.widths.size()));
  std::uint64_t total = 0;
  for (const auto& [w, entries] : idx.widths) {
    put_le<std::uint32_t>(os, w);
    total += entries.size();
  }
  put_le<std::uint64_t>(os, total);
  for (const auto& [w, entries] : idx.widths) {
    for (const auto& e : entries) {
      put_le<std::uint64_t>(os, e.pair_id);
      put_le<std::uint32_t>(os, e.start);
      put_le<std::uint32_t>(os, e.width);
      for (Eigen::Index i = 0; i < e.vector.size(); ++i)
        put_f32(os, static_cast<float>(e.vector(i)));
    }
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

DenseIndex load_dense_index(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open dense index: " + path);
  expect_magic(is, std::string_view(kDenseMagic, 8));
  std::uint32_t version = get_le<std::uint32_t>(is);
  if (version != 1) throw std::runtime_error("unsupported dense index version");
  DenseIndex idx;
  idx.dimension = static_cast<Eigen::Index>(get_le<std::uint32_t>(is));
  std::uint32_t nwidths = get_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nwidths; ++i) idx.widths[get_le<std::uint32_t>(is)];
  std::uint64_t total = get_le<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < total; ++i) {
    DenseNGramEntry e;
    e.pair_id = get_le<std::uint64_t>(is);
    e.start = get_le<std::uint32_t>(is);
    e.width = get_le<std::uint32_t>(is);
    e.vector.resize(idx.dimension);
    for (Eigen::Index k = 0; k < idx.dimension; ++k) e.vector(k) = static_cast<double>(get_f32(is));
    auto wit = idx.widths.find(e.width);
    if (wit == idx.widths.end()) throw std::runtime_error("dense index: entry width missing from header");
    wit->second.push_back(std::move(e));
  }
  return idx;
}

}  // namespace semimt

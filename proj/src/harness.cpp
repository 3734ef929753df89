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

#include "semimt/synthetic.hpp"

#include <algorithm>
#include <unordered_map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "semimt/common.hpp"

namespace semimt {

namespace {

// Domain-specific permutation of the ambiguous type indices.
std::vector<int> domain_permutation(std::uint64_t seed, int domain, int n) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(fnv1a_u64(static_cast<std::uint64_t>(domain), fnv1a_u64(seed, fnv1a("domain-perm"))));
  rng.shuffle(perm);
  return perm;
}

std::string regular_token(int i) { return "w" + std::to_string(i); }
std::string regular_image(int i) { return "t" + std::to_string(i); }
std::string ambiguous_token(int i) { return "q" + std::to_string(i); }
std::string ambiguous_image(int i) { return "c" + std::to_string(i); }

}  // namespace

SyntheticTask make_copy_substitution_task(const SyntheticTaskConfig& cfg) {
  if (cfg.regular_types < 1 || cfg.ambiguous_types < 1 || cfg.groups_per_domain < 1 ||
      cfg.siblings_per_group < 2 || cfg.len_min < 1 || cfg.len_max < cfg.len_min ||
      cfg.domains.empty())
    throw std::runtime_error("synthetic task: invalid configuration");

  SyntheticTask task;
  task.train.split = Split::kTrain;
  task.dev.split = Split::kDev;
  Rng rng(fnv1a_u64(cfg.seed, fnv1a("copy-substitution")));

  // A group is built from one template sentence; siblings keep its layout
  // and ambiguous tokens but resample some regular positions, giving the
  // group the high lexical overlap a translation memory would have.
  struct Template {
    std::vector<bool> is_amb;
    std::vector<int> type;  // ambiguous type or regular type per position
  };

  auto make_template = [&]() {
    int len = cfg.len_min + static_cast<int>(rng.next_below(
                                static_cast<std::uint64_t>(cfg.len_max - cfg.len_min + 1)));
    // the group draws a small set of ambiguous types first
    int span = cfg.amb_types_max - cfg.amb_types_min + 1;
    int amb_count = cfg.amb_types_min + static_cast<int>(rng.next_below(
                                            static_cast<std::uint64_t>(std::max(1, span))));
    amb_count = std::min(amb_count, cfg.ambiguous_types);
    std::vector<int> amb_set;
    while (static_cast<int>(amb_set.size()) < amb_count) {
      int q = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(cfg.ambiguous_types)));
      if (std::find(amb_set.begin(), amb_set.end(), q) == amb_set.end()) amb_set.push_back(q);
    }
    len = std::max(len, amb_count + 1);
    Template t;
    t.is_amb.resize(static_cast<std::size_t>(len));
    t.type.resize(static_cast<std::size_t>(len));
    // each type of the set appears at least once, in template order
    for (int k = 0; k < amb_count; ++k) {
      t.is_amb[static_cast<std::size_t>(k)] = true;
      t.type[static_cast<std::size_t>(k)] = amb_set[static_cast<std::size_t>(k)];
    }
    for (int pos = amb_count; pos < len; ++pos) {
      bool amb = rng.next_double() < cfg.ambiguous_fraction;
      t.is_amb[static_cast<std::size_t>(pos)] = amb;
      if (amb)
        t.type[static_cast<std::size_t>(pos)] = amb_set[rng.next_below(amb_set.size())];
      else
        t.type[static_cast<std::size_t>(pos)] =
            static_cast<int>(rng.next_below(static_cast<std::uint64_t>(cfg.regular_types)));
    }
    return t;
  };

  auto emit_sentence = [&](int domain, const Template& tmpl, Corpus& corpus,
                           const std::vector<int>& perm) -> std::uint64_t {
    SentencePair p;
    p.domain = "d" + std::to_string(domain);
    for (std::size_t pos = 0; pos < tmpl.type.size(); ++pos) {
      if (tmpl.is_amb[pos]) {
        int q = tmpl.type[pos];
        p.source.push_back(ambiguous_token(q));
        p.target.push_back(ambiguous_image(perm[static_cast<std::size_t>(q)]));
      } else {
        int w = tmpl.type[pos];
        if (rng.next_double() < cfg.regular_resample)
          w = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(cfg.regular_types)));
        p.source.push_back(regular_token(w));
        p.target.push_back(regular_image(w));
      }
    }
    // Each sentence carries the group's content in its own order, so
    // positions never align across group members; alignment has to come
    // from the tokens themselves.
    std::vector<std::size_t> order(p.source.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    TokenSeq src(p.source.size()), tgt(p.target.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      src[i] = p.source[order[i]];
      tgt[i] = p.target[order[i]];
    }
    p.source = std::move(src);
    p.target = std::move(tgt);
    p.id = corpus.pairs.size();
    for (const auto& t : p.source) corpus.vocab.add(t);
    for (const auto& t : p.target) corpus.vocab.add(t);
    corpus.pairs.push_back(std::move(p));
    return corpus.pairs.back().id;
  };

  for (int domain : cfg.domains) {
    std::vector<int> perm = domain_permutation(cfg.seed, domain, cfg.ambiguous_types);
    int total_groups = cfg.groups_per_domain + cfg.dev_groups_per_domain;
    for (int grp = 0; grp < total_groups; ++grp) {
      Template tmpl = make_template();
      std::vector<std::uint64_t> members;
      for (int s = 0; s < cfg.siblings_per_group; ++s)
        members.push_back(emit_sentence(domain, tmpl, task.train, perm));
      for (std::uint64_t id : members) {
        std::vector<std::uint64_t> others;
        for (std::uint64_t other : members)
          if (other != id) others.push_back(other);
        task.train_oracle.resize(
            std::max<std::size_t>(task.train_oracle.size(), static_cast<std::size_t>(id) + 1));
        task.train_oracle[static_cast<std::size_t>(id)] = std::move(others);
      }
      if (grp >= cfg.groups_per_domain) {
        // this group also contributes one dev sentence
        std::uint64_t dev_id = emit_sentence(domain, tmpl, task.dev, perm);
        task.dev_oracle.resize(
            std::max<std::size_t>(task.dev_oracle.size(), static_cast<std::size_t>(dev_id) + 1));
        task.dev_oracle[static_cast<std::size_t>(dev_id)] = members;
      }
    }
  }
  // the dev side must be encodable with the train vocabulary
  task.dev.vocab = task.train.vocab;
  return task;
}

std::vector<NeighborSet> oracle_neighbor_sets(
    const std::vector<std::vector<std::uint64_t>>& oracle) {
  std::vector<NeighborSet> sets;
  sets.reserve(oracle.size());
  for (std::size_t q = 0; q < oracle.size(); ++q) {
    NeighborSet s;
    s.query_id = q;
    double rank = static_cast<double>(oracle[q].size());
    for (std::uint64_t id : oracle[q]) s.neighbors.push_back({id, rank--});
    sets.push_back(std::move(s));
  }
  return sets;
}

std::vector<std::vector<std::uint64_t>> rotate_neighbors(
    const std::vector<std::vector<std::uint64_t>>& oracle) {
  std::vector<std::vector<std::uint64_t>> out(oracle.size());
  if (oracle.empty()) return out;
  std::size_t shift = oracle.size() / 2;
  if (shift == 0) shift = 1;
  for (std::size_t q = 0; q < oracle.size(); ++q) out[q] = oracle[(q + shift) % oracle.size()];
  return out;
}

std::vector<std::vector<std::uint64_t>> corrupt_neighbors(
    const std::vector<std::vector<std::uint64_t>>& oracle, std::size_t corpus_size, double noise,
    std::uint64_t seed) {
  std::vector<std::vector<std::uint64_t>> out = oracle;
  Rng rng(fnv1a_u64(seed, fnv1a("neighbor-noise")));
  for (auto& ids : out)
    for (auto& id : ids)
      if (rng.next_double() < noise) id = rng.next_below(corpus_size);
  return out;
}

std::vector<std::vector<std::uint64_t>> corrupt_neighbors_same_domain(
    const std::vector<std::vector<std::uint64_t>>& oracle, const Corpus& train,
    const std::vector<std::string>& query_domains, double noise, std::uint64_t seed) {
  if (query_domains.size() != oracle.size())
    throw std::runtime_error("corrupt_neighbors_same_domain: domain list size mismatch");
  std::unordered_map<std::string, std::vector<std::uint64_t>> by_domain;
  for (const auto& p : train.pairs) by_domain[p.domain].push_back(p.id);
  std::vector<std::vector<std::uint64_t>> out = oracle;
  Rng rng(fnv1a_u64(seed, fnv1a("neighbor-noise-domain")));
  for (std::size_t q = 0; q < out.size(); ++q) {
    const auto& pool = by_domain.at(query_domains[q]);
    for (auto& id : out[q])
      if (rng.next_double() < noise) id = pool[rng.next_below(pool.size())];
  }
  return out;
}

}  // namespace semimt

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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "semimt/bleu.hpp"
#include "semimt/corpus.hpp"
#include "semimt/dense.hpp"
#include "semimt/idf.hpp"
#include "semimt/memory_model.hpp"
#include "semimt/ngram.hpp"
#include "semimt/transformer.hpp"

namespace semimt {

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

/// Linear warmup to lr_base, then inverse-square-root decay.
inline double lr_schedule(std::int64_t step, double lr_base, std::int64_t warmup) {
  if (warmup < 1) throw std::runtime_error("lr_schedule: warmup must be >= 1");
  if (step < 1) throw std::runtime_error("lr_schedule: step must be >= 1");
  double s = static_cast<double>(step), w = static_cast<double>(warmup);
  return lr_base * std::min(s / w, std::sqrt(w / s));
}

struct TrainConfig {
  std::int64_t steps = 200;
  int batch_tokens = 256;  // target-token budget per step
  double lr_base = 2e-3;
  std::int64_t warmup_steps = 100;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double adam_eps = 1e-9;
  std::uint64_t seed = 1;
  std::int64_t checkpoint_every = 100;
  int keep_last = 5;
  /// Neighbors fed to the memory per example during training.
  std::size_t train_neighbor_cap = 10;

  void validate() const {
    if (steps < 0 || batch_tokens < 1 || warmup_steps < 1 || checkpoint_every < 1)
      throw std::runtime_error("train config: invalid schedule values");
    if (keep_last < 1) throw std::runtime_error("train config: keep_last must be >= 1");
  }
};

TrainConfig train_config_from_file(const std::string& path);
void save_train_config(const TrainConfig& cfg, const std::string& path);

inline TrainConfig train_config_from_file(const std::string& path) {
  auto kv = read_kv_file(path);
  TrainConfig tc;
  auto get64 = [&](const char* k, std::int64_t& out) {
    if (kv.count(k)) out = std::stoll(kv.at(k));
  };
  auto geti = [&](const char* k, int& out) {
    if (kv.count(k)) out = std::stoi(kv.at(k));
  };
  auto getd = [&](const char* k, double& out) {
    if (kv.count(k)) out = std::stod(kv.at(k));
  };
  get64("steps", tc.steps);
  geti("batch_tokens", tc.batch_tokens);
  getd("lr_base", tc.lr_base);
  get64("warmup_steps", tc.warmup_steps);
  getd("beta1", tc.beta1);
  getd("beta2", tc.beta2);
  getd("adam_eps", tc.adam_eps);
  if (kv.count("seed")) tc.seed = std::stoull(kv.at("seed"));
  get64("checkpoint_every", tc.checkpoint_every);
  geti("keep_last", tc.keep_last);
  if (kv.count("train_neighbor_cap")) tc.train_neighbor_cap = std::stoull(kv.at("train_neighbor_cap"));
  return tc;
}

inline void save_train_config(const TrainConfig& tc, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write config: " + path);
  os << "steps = " << tc.steps << "\nbatch_tokens = " << tc.batch_tokens
     << "\nlr_base = " << tc.lr_base << "\nwarmup_steps = " << tc.warmup_steps
     << "\nbeta1 = " << tc.beta1 << "\nbeta2 = " << tc.beta2 << "\nadam_eps = " << tc.adam_eps
     << "\nseed = " << tc.seed << "\ncheckpoint_every = " << tc.checkpoint_every
     << "\nkeep_last = " << tc.keep_last << "\ntrain_neighbor_cap = " << tc.train_neighbor_cap
     << "\n";
}

template <class Scalar>
struct AdamState {
  std::map<std::string, Mat<Scalar>> first;
  std::map<std::string, Mat<Scalar>> second;
  std::int64_t t = 0;
};

/// Bias-corrected Adam update over the named gradients. Parameters without
/// a gradient entry are left untouched.
template <class Scalar>
void adam_step(ParamStore<Scalar>& params, const std::map<std::string, Mat<Scalar>>& grads,
               AdamState<Scalar>& state, double lr, double beta1 = 0.9, double beta2 = 0.98,
               double eps = 1e-9) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (const auto& [name, g] : grads) {
    Mat<Scalar>& p = params.at(name);
    if (p.rows() != g.rows() || p.cols() != g.cols())
      throw std::runtime_error("adam_step: gradient shape mismatch for " + name);
    if (!g.allFinite()) throw std::runtime_error("adam_step: non-finite gradient for " + name);
    auto [mit, fresh_m] = state.first.try_emplace(name, Mat<Scalar>::Zero(p.rows(), p.cols()));
    auto [vit, fresh_v] = state.second.try_emplace(name, Mat<Scalar>::Zero(p.rows(), p.cols()));
    Mat<Scalar>& m = mit->second;
    Mat<Scalar>& v = vit->second;
    m = static_cast<Scalar>(beta1) * m + static_cast<Scalar>(1.0 - beta1) * g;
    v = (static_cast<Scalar>(beta2) * v.array() +
         static_cast<Scalar>(1.0 - beta2) * g.array().square())
            .matrix();
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      double mhat = static_cast<double>(m(i)) / bc1;
      double vhat = static_cast<double>(v(i)) / bc2;
      p(i) -= static_cast<Scalar>(lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

// ---------------------------------------------------------------------------
// Retrieval plumbing shared by training, decoding and adaptation
// ---------------------------------------------------------------------------

enum class Strategy { kNone, kIdfSentence, kIdfNgram, kDenseNgram };

inline Strategy strategy_from_name(const std::string& name) {
  if (name == "none") return Strategy::kNone;
  if (name == "idf_sentence") return Strategy::kIdfSentence;
  if (name == "idf_ngram") return Strategy::kIdfNgram;
  if (name == "dense_ngram") return Strategy::kDenseNgram;
  throw std::runtime_error("unknown retrieval strategy: " + name);
}

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kNone: return "none";
    case Strategy::kIdfSentence: return "idf_sentence";
    case Strategy::kIdfNgram: return "idf_ngram";
    case Strategy::kDenseNgram: return "dense_ngram";
  }
  return "none";
}

enum class AdaptMode { kNone, kNonparametric, kFinetune, kNonparametricFinetune };

struct ExperimentSpec {
  MemoryMode memory_mode = MemoryMode::kNone;
  Strategy strategy = Strategy::kNone;
  std::string retrieval_scope_domain;  // empty: whole corpus
  AdaptMode adaptation = AdaptMode::kNone;
};

/// One retrieval corpus with whichever index the strategy needs. Swapping
/// the engine (not the parameters) is what non-parametric adaptation does.
class RetrievalEngine {
 public:
  static RetrievalEngine build(const Corpus& corpus, Strategy strategy,
                               const NGramRetrievalConfig& ngram_cfg,
                               std::shared_ptr<const EmbeddingProvider> provider = nullptr) {
    RetrievalEngine e;
    e.strategy_ = strategy;
    e.corpus_ = &corpus;
    e.ngram_cfg_ = ngram_cfg;
    switch (strategy) {
      case Strategy::kNone:
        break;
      case Strategy::kIdfSentence:
        e.idf_ = build_idf(corpus);
        e.inverted_ = build_inverted_index(corpus, e.idf_);
        break;
      case Strategy::kIdfNgram:
        e.idf_ = build_idf(corpus);
        e.ngram_index_ = build_ngram_index(corpus, ngram_cfg, e.idf_);
        break;
      case Strategy::kDenseNgram:
        if (!provider) throw std::runtime_error("dense strategy requires an embedding provider");
        e.provider_ = std::move(provider);
        e.dense_index_ = build_dense_index(corpus, *e.provider_, ngram_cfg);
        break;
    }
    return e;
  }

  NeighborSet retrieve(const TokenSeq& query, RetrievalMode mode, std::size_t n,
                       std::optional<std::uint64_t> exclude_id = std::nullopt,
                       std::optional<std::uint64_t> query_id = std::nullopt) const {
    switch (strategy_) {
      case Strategy::kNone:
        return NeighborSet{query_id, {}, {}};
      case Strategy::kIdfSentence:
        return retrieve_sentences(query, *corpus_, idf_, inverted_, n, exclude_id, query_id);
      case Strategy::kIdfNgram: {
        NGramRetrievalConfig cfg = ngram_cfg_;
        cfg.train_cap = n;
        return retrieve_by_ngrams(query, ngram_index_, cfg, mode, exclude_id, query_id);
      }
      case Strategy::kDenseNgram: {
        NGramRetrievalConfig cfg = ngram_cfg_;
        cfg.train_cap = n;
        return retrieve_dense(query, dense_index_, *provider_, cfg, mode, exclude_id, query_id);
      }
    }
    return NeighborSet{query_id, {}, {}};
  }

  const Corpus& corpus() const { return *corpus_; }
  Strategy strategy() const { return strategy_; }

 private:
  Strategy strategy_ = Strategy::kNone;
  const Corpus* corpus_ = nullptr;
  NGramRetrievalConfig ngram_cfg_;
  IdfTable idf_;
  InvertedIndex inverted_;
  NGramIndex ngram_index_;
  DenseIndex dense_index_;
  std::shared_ptr<const EmbeddingProvider> provider_;
};

/// Precomputed neighbor ids per query pair id (the offline retrieval dump).
struct NeighborMap {
  std::unordered_map<std::uint64_t, std::vector<std::uint64_t>> by_query;

  static NeighborMap from_sets(const std::vector<NeighborSet>& sets) {
    NeighborMap m;
    for (const auto& s : sets) {
      if (!s.query_id) continue;
      auto& ids = m.by_query[*s.query_id];
      for (const auto& n : s.neighbors) ids.push_back(n.pair_id);
    }
    return m;
  }
  static NeighborMap from_file(const std::string& path) {
    return from_sets(load_neighbor_sets(path));
  }

  const std::vector<std::uint64_t>* find(std::uint64_t query_id) const {
    auto it = by_query.find(query_id);
    return it == by_query.end() ? nullptr : &it->second;
  }
};

/// Assembles the decoder-facing batch for one query from neighbor pair ids.
inline RetrievedBatch make_retrieved_batch(const std::vector<std::uint64_t>& neighbor_ids,
                                           const Corpus& retrieval_corpus, const Vocab& vocab,
                                           std::size_t cap) {
  RetrievedBatch batch;
  for (std::uint64_t id : neighbor_ids) {
    if (batch.items.size() >= cap) break;
    if (id >= retrieval_corpus.size()) throw std::runtime_error("neighbor id out of range");
    const SentencePair& p = retrieval_corpus.pairs[id];
    RetrievedBatch::Item item;
    item.source_ids = vocab.encode(p.source);
    item.target_ids = vocab.encode(p.target);
    item.pair_id = id;
    batch.items.push_back(std::move(item));
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Training and evaluation
// ---------------------------------------------------------------------------

/// Everything a training or evaluation pass needs to turn pair ids into
/// model inputs.
struct TaskData {
  const Corpus* corpus = nullptr;            // queries (train or dev)
  const Corpus* retrieval_corpus = nullptr;  // neighbor pair lookup
  const NeighborMap* neighbors = nullptr;    // may be null for strategy none
  const Vocab* vocab = nullptr;              // the model vocabulary
};

struct EvalResult {
  double loss = 0.0;
  double token_accuracy = 0.0;
  std::size_t tokens = 0;
};

/// Teacher-forced loss and per-token argmax accuracy over a corpus.
template <class Scalar>
EvalResult evaluate_teacher_forced(const ModelConfig& cfg, ParamStore<Scalar>& params,
                                   const TaskData& data, std::size_t neighbor_cap) {
  EvalResult r;
  double loss_sum = 0.0;
  std::size_t correct = 0, total = 0;
  for (const auto& p : data.corpus->pairs) {
    Graph<Scalar> g;
    BoundParams<Scalar> bp(g, params, false);
    TrainContext ctx;  // eval: no dropout
    RetrievedBatch batch;
    if (cfg.memory_mode != MemoryMode::kNone && data.neighbors) {
      if (const auto* ids = data.neighbors->find(p.id))
        batch = make_retrieved_batch(*ids, *data.retrieval_corpus, *data.vocab, neighbor_cap);
    }
    std::vector<std::int32_t> src = data.vocab->encode(p.source);
    std::vector<std::int32_t> tgt = data.vocab->encode(p.target);
    Var<Scalar> logits = semiparametric_forward(bp, cfg, src, tgt, batch, ctx);
    std::vector<std::int32_t> labels = shifted_labels(tgt);
    Var<Scalar> loss = cross_entropy_label_smoothed(logits, labels, cfg.label_smoothing);
    loss_sum += static_cast<double>(loss.value()(0, 0)) * static_cast<double>(labels.size());
    for (std::size_t t = 0; t < labels.size(); ++t) {
      Eigen::Index best;
      logits.value().row(static_cast<Eigen::Index>(t)).maxCoeff(&best);
      if (static_cast<std::int32_t>(best) == labels[t]) ++correct;
      ++total;
    }
  }
  if (total == 0) throw std::runtime_error("evaluate: empty corpus");
  r.loss = loss_sum / static_cast<double>(total);
  r.token_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  r.tokens = total;
  return r;
}

struct TrainResult {
  std::string best_checkpoint;
  std::int64_t best_step = 0;
  double best_dev_loss = 0.0;
  double final_train_loss = 0.0;
  std::vector<std::int64_t> kept_steps;
};

/// Teacher-forced training with offline neighbors, JSONL metrics, periodic
/// checkpoints, and best-of-last-K selection by dev loss.
template <class Scalar>
TrainResult train_model(const ModelConfig& cfg, ParamStore<Scalar>& params, const TaskData& train,
                        const TaskData* dev, const TrainConfig& tc, const std::string& outdir) {
  cfg.validate();
  tc.validate();
  if (train.corpus == nullptr || train.corpus->empty())
    throw std::runtime_error("train: empty corpus");
  if (cfg.memory_mode != MemoryMode::kNone) {
    if (train.neighbors == nullptr)
      throw std::runtime_error("train: memory mode needs a neighbor file");
    if (train.retrieval_corpus == nullptr)
      throw std::runtime_error("train: memory mode needs a retrieval corpus");
  }
  std::filesystem::create_directories(outdir);
  std::ofstream metrics(outdir + "/metrics.jsonl", std::ios::binary);
  if (!metrics) throw std::runtime_error("cannot write metrics log");

  AdamState<Scalar> adam;
  Rng shuffle_rng(fnv1a_u64(tc.seed, fnv1a("batch-order")));
  std::vector<std::size_t> order(train.corpus->size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle_rng.shuffle(order);
  std::size_t cursor = 0;

  auto next_pair = [&]() -> const SentencePair& {
    if (cursor >= order.size()) {
      shuffle_rng.shuffle(order);
      cursor = 0;
    }
    return train.corpus->pairs[order[cursor++]];
  };

  std::vector<std::int64_t> kept;
  auto checkpoint_path = [&](std::int64_t step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ckpt_%08lld.bin", static_cast<long long>(step));
    return outdir + "/" + buf;
  };
  auto write_checkpoint = [&](std::int64_t step) {
    save_checkpoint(params, checkpoint_path(step));
    kept.push_back(step);
    while (static_cast<int>(kept.size()) > tc.keep_last) {
      std::filesystem::remove(checkpoint_path(kept.front()));
      kept.erase(kept.begin());
    }
  };

  double last_loss = 0.0;
  for (std::int64_t step = 1; step <= tc.steps; ++step) {
    Graph<Scalar> g;
    BoundParams<Scalar> bp(g, params, true);

    // pack sentences up to the token budget
    struct Example {
      const SentencePair* pair;
      std::size_t label_tokens;
    };
    std::vector<Example> batch;
    std::size_t budget = 0;
    while (budget < static_cast<std::size_t>(tc.batch_tokens)) {
      const SentencePair& p = next_pair();
      std::size_t cost = p.target.size() + 1;  // labels include EOS
      if (!batch.empty() && budget + cost > static_cast<std::size_t>(tc.batch_tokens)) break;
      batch.push_back({&p, cost});
      budget += cost;
    }

    std::size_t total_tokens = 0;
    for (const auto& ex : batch) total_tokens += ex.label_tokens;

    Var<Scalar> loss;
    bool first = true;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const SentencePair& p = *batch[k].pair;
      TrainContext ctx;
      ctx.training = true;
      ctx.seed = tc.seed;
      ctx.step = step;
      ctx.dropout_rate = cfg.dropout_rate;
      ctx.scope = "s" + std::to_string(k) + ".";
      RetrievedBatch nb;
      if (cfg.memory_mode != MemoryMode::kNone) {
        if (const auto* ids = train.neighbors->find(p.id))
          nb = make_retrieved_batch(*ids, *train.retrieval_corpus, *train.vocab,
                                    tc.train_neighbor_cap);
      }
      std::vector<std::int32_t> src = train.vocab->encode(p.source);
      std::vector<std::int32_t> tgt = train.vocab->encode(p.target);
      Var<Scalar> logits = semiparametric_forward(bp, cfg, src, tgt, nb, ctx);
      Var<Scalar> ce =
          cross_entropy_label_smoothed(logits, shifted_labels(tgt), cfg.label_smoothing);
      Scalar weight = static_cast<Scalar>(static_cast<double>(batch[k].label_tokens) /
                                          static_cast<double>(total_tokens));
      Var<Scalar> weighted = scale(ce, weight);
      loss = first ? weighted : add(loss, weighted);
      first = false;
    }

    g.backward(loss);
    std::map<std::string, Mat<Scalar>> grads;
    for (const auto& [name, leaf] : bp.leaves()) grads.emplace(name, leaf.grad());
    double lr = lr_schedule(step, tc.lr_base, tc.warmup_steps);
    adam_step(params, grads, adam, lr, tc.beta1, tc.beta2, tc.adam_eps);

    last_loss = static_cast<double>(loss.value()(0, 0));
    char row[160];
    std::snprintf(row, sizeof(row), "{\"step\": %lld, \"loss\": %.12g, \"lr\": %.12g}\n",
                  static_cast<long long>(step), last_loss, lr);
    metrics << row;

    if (step % tc.checkpoint_every == 0) write_checkpoint(step);
  }
  if (kept.empty() || kept.back() != tc.steps) write_checkpoint(tc.steps);
  metrics.flush();

  // pick the best of the kept checkpoints by dev loss (tie: earliest step)
  TrainResult result;
  result.kept_steps = kept;
  result.final_train_loss = last_loss;
  result.best_step = kept.back();
  if (dev != nullptr && dev->corpus != nullptr && !dev->corpus->empty()) {
    double best = std::numeric_limits<double>::infinity();
    std::ofstream sel(outdir + "/checkpoint_selection.jsonl", std::ios::binary);
    for (std::int64_t step : kept) {
      ParamStore<Scalar> candidate = load_checkpoint<Scalar>(checkpoint_path(step));
      EvalResult ev = evaluate_teacher_forced(cfg, candidate, *dev, tc.train_neighbor_cap);
      char row[160];
      std::snprintf(row, sizeof(row), "{\"step\": %lld, \"dev_loss\": %.12g, \"dev_acc\": %.12g}\n",
                    static_cast<long long>(step), ev.loss, ev.token_accuracy);
      sel << row;
      if (ev.loss < best) {
        best = ev.loss;
        result.best_step = step;
        result.best_dev_loss = ev.loss;
      }
    }
  }
  std::filesystem::copy_file(checkpoint_path(result.best_step), outdir + "/best.bin",
                             std::filesystem::copy_options::overwrite_existing);
  result.best_checkpoint = outdir + "/best.bin";
  // the selected parameters become the live ones
  params = load_checkpoint<Scalar>(result.best_checkpoint);
  return result;
}

// ---------------------------------------------------------------------------
// Adaptation
// ---------------------------------------------------------------------------

/// Retrieves decode-time neighbors for every pair of a query corpus from an
/// engine. Self-exclusion applies when the engine indexes the query corpus
/// itself.
inline std::vector<NeighborSet> retrieve_corpus_neighbors(const RetrievalEngine& engine,
                                                          const Corpus& queries, RetrievalMode mode,
                                                          std::size_t n, bool self_exclude) {
  std::vector<NeighborSet> sets;
  sets.reserve(queries.size());
  for (const auto& p : queries.pairs) {
    std::optional<std::uint64_t> exclude;
    if (self_exclude) exclude = p.id;
    sets.push_back(engine.retrieve(p.source, mode, n, exclude, p.id));
  }
  return sets;
}

/// Non-parametric adaptation: identical parameters, neighbors drawn from
/// the in-domain corpus. Returns the dev evaluation under the new engine;
/// the caller can verify the checksum never moved.
template <class Scalar>
EvalResult adapt_nonparametric(const ModelConfig& cfg, ParamStore<Scalar>& params,
                               const Corpus& queries, const RetrievalEngine& in_domain_engine,
                               const Vocab& vocab, std::size_t neighbor_cap) {
  if (in_domain_engine.corpus().empty())
    throw std::runtime_error("adapt: empty adaptation corpus");
  std::uint64_t before = param_checksum(params);
  auto sets = retrieve_corpus_neighbors(in_domain_engine, queries, RetrievalMode::kDecode,
                                        neighbor_cap, false);
  NeighborMap map = NeighborMap::from_sets(sets);
  TaskData data;
  data.corpus = &queries;
  data.retrieval_corpus = &in_domain_engine.corpus();
  data.neighbors = &map;
  data.vocab = &vocab;
  EvalResult r = evaluate_teacher_forced(cfg, params, data, neighbor_cap);
  if (param_checksum(params) != before)
    throw std::runtime_error("adapt: parameters changed during non-parametric adaptation");
  return r;
}

/// Fine-tuning based adaptation: continued training on in-domain data,
/// producing a separate checkpoint under `outdir`.
template <class Scalar>
TrainResult finetune(const ModelConfig& cfg, ParamStore<Scalar>& params, const TaskData& in_domain,
                     const TaskData* dev, const TrainConfig& tc, const std::string& outdir) {
  return train_model(cfg, params, in_domain, dev, tc, outdir);
}

// ---------------------------------------------------------------------------
// Encoder-backed embedding provider for dense retrieval
// ---------------------------------------------------------------------------

/// Dense n-gram vectors from the workbench's own trained encoder. Tokens
/// are mapped through the model vocabulary (unknowns to UNK); the encoder
/// output row of each token position is its vector (the appended EOS row
/// is dropped).
template <class Scalar>
class EncoderEmbeddingProvider : public EmbeddingProvider {
 public:
  EncoderEmbeddingProvider(ModelConfig cfg, ParamStore<Scalar> params, Vocab vocab)
      : cfg_(std::move(cfg)), params_(std::move(params)), vocab_(std::move(vocab)) {}

  Eigen::MatrixXd embed(const TokenSeq& tokens) const override {
    Graph<Scalar> g;
    // const_cast is confined here: evaluation binds parameters read-only.
    BoundParams<Scalar> bp(g, const_cast<ParamStore<Scalar>&>(params_), false);
    TrainContext ctx;
    EncoderOutput<Scalar> enc = encode(bp, cfg_, vocab_.encode(tokens), ctx);
    Eigen::MatrixXd all = enc.states.value().template cast<double>();
    return all.topRows(all.rows() - 1);  // drop the EOS row
  }
  Eigen::Index dimension() const override { return cfg_.d_model; }

 private:
  ModelConfig cfg_;
  ParamStore<Scalar> params_;
  Vocab vocab_;
};

}  // namespace semimt

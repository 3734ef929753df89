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

// Batch workbench CLI: corpus ingestion, index building, neighbor
// retrieval, training, translation, evaluation, and the two adaptation
// paths.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semimt/harness.hpp"
#include "semimt/synthetic.hpp"

using namespace semimt;

namespace {

struct GlobalFlags {
  std::uint64_t seed = 1;
  std::string precision = "double";
};

std::vector<std::uint32_t> parse_widths(const std::string& spec) {
  std::vector<std::uint32_t> widths;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) widths.push_back(static_cast<std::uint32_t>(std::stoul(item)));
  return widths;
}

TokenizerConfig tokenizer_from(const std::string& mode, bool lowercase) {
  TokenizerConfig cfg;
  if (mode == "whitespace")
    cfg.mode = TokenizerMode::kWhitespace;
  else if (mode == "character")
    cfg.mode = TokenizerMode::kCharacter;
  else
    throw std::runtime_error("unknown tokenizer mode: " + mode);
  cfg.lowercase = lowercase;
  return cfg;
}

std::vector<TokenSeq> read_token_lines(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::vector<TokenSeq> lines;
  std::string line;
  TokenizerConfig ws;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(tokenize(line, ws));
  }
  return lines;
}

void write_token_lines(const std::vector<TokenSeq>& lines, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  for (const auto& toks : lines) {
    for (std::size_t i = 0; i < toks.size(); ++i) os << (i ? " " : "") << toks[i];
    os << '\n';
  }
}

std::shared_ptr<const EmbeddingProvider> make_provider(const std::string& kind, int dim,
                                                       std::uint64_t seed,
                                                       const std::string& checkpoint,
                                                       const std::string& model_config,
                                                       const std::string& vocab_path,
                                                       const std::string& precision) {
  if (kind == "hash") return std::make_shared<HashEmbeddingProvider>(dim, seed);
  if (kind == "encoder") {
    if (checkpoint.empty() || model_config.empty() || vocab_path.empty())
      throw std::runtime_error("encoder provider needs --checkpoint, --model-config and --vocab");
    ModelConfig cfg = model_config_from_file(model_config);
    Vocab vocab = load_vocab_text(vocab_path);
    if (cfg.vocab_size == 0) cfg.vocab_size = vocab.size();
    if (precision == "single")
      return std::make_shared<EncoderEmbeddingProvider<float>>(cfg, load_checkpoint<float>(checkpoint),
                                                               vocab);
    return std::make_shared<EncoderEmbeddingProvider<double>>(
        cfg, load_checkpoint<double>(checkpoint), vocab);
  }
  throw std::runtime_error("unknown provider: " + kind);
}

// -- train / finetune ---------------------------------------------------------

struct TrainArgs {
  std::string train_path, dev_path, model_config, train_config, neighbors, dev_neighbors,
      retrieval_corpus, outdir, init_checkpoint, vocab;
};

template <class Scalar>
void run_train(const TrainArgs& a, const GlobalFlags& g) {
  Corpus train = load_corpus_snapshot(a.train_path);
  Corpus dev;
  bool have_dev = !a.dev_path.empty();
  if (have_dev) dev = load_corpus_snapshot(a.dev_path);

  // Continued training must keep the checkpoint's token ids, so the model
  // vocabulary can be pinned explicitly instead of derived from the corpus.
  Vocab vocab = a.vocab.empty() ? train.vocab : load_vocab_text(a.vocab);

  ModelConfig cfg = a.model_config.empty() ? ModelConfig{} : model_config_from_file(a.model_config);
  if (cfg.vocab_size == 0) cfg.vocab_size = vocab.size();
  TrainConfig tc = a.train_config.empty() ? TrainConfig{} : train_config_from_file(a.train_config);
  if (tc.seed == 1 && g.seed != 1) tc.seed = g.seed;

  Corpus retrieval;
  NeighborMap train_nb, dev_nb;
  TaskData train_data{&train, nullptr, nullptr, &vocab};
  TaskData dev_data{have_dev ? &dev : nullptr, nullptr, nullptr, &vocab};
  if (cfg.memory_mode != MemoryMode::kNone) {
    if (a.neighbors.empty()) throw std::runtime_error("memory mode needs --neighbors");
    retrieval = a.retrieval_corpus.empty() ? train : load_corpus_snapshot(a.retrieval_corpus);
    train_nb = NeighborMap::from_file(a.neighbors);
    train_data.retrieval_corpus = &retrieval;
    train_data.neighbors = &train_nb;
    if (have_dev) {
      if (a.dev_neighbors.empty()) throw std::runtime_error("memory mode needs --dev-neighbors");
      dev_nb = NeighborMap::from_file(a.dev_neighbors);
      dev_data.retrieval_corpus = &retrieval;
      dev_data.neighbors = &dev_nb;
    }
  }

  ParamStore<Scalar> params = a.init_checkpoint.empty()
                                  ? init_params<Scalar>(cfg, tc.seed)
                                  : load_checkpoint<Scalar>(a.init_checkpoint);
  std::filesystem::create_directories(a.outdir);
  save_vocab_text(vocab, a.outdir + "/vocab.txt");
  save_model_config(cfg, a.outdir + "/model.cfg");
  TrainResult r =
      train_model(cfg, params, train_data, have_dev ? &dev_data : nullptr, tc, a.outdir);
  std::cout << "best checkpoint: " << r.best_checkpoint << " (step " << r.best_step << ")\n";
  if (have_dev) std::cout << "best dev loss: " << r.best_dev_loss << "\n";
  std::cout << "final train loss: " << r.final_train_loss << "\n";
}

// -- translate ----------------------------------------------------------------

struct TranslateArgs {
  std::string model_config, checkpoint, vocab, input, neighbors, retrieval_corpus, output;
  int beam = 1;
  int max_len = 64;
};

template <class Scalar>
void run_translate(const TranslateArgs& a) {
  ModelConfig cfg = model_config_from_file(a.model_config);
  Vocab vocab = load_vocab_text(a.vocab);
  if (cfg.vocab_size == 0) cfg.vocab_size = vocab.size();
  ParamStore<Scalar> params = load_checkpoint<Scalar>(a.checkpoint);
  Corpus queries = load_corpus_snapshot(a.input);

  Corpus retrieval;
  NeighborMap nb;
  bool with_memory = cfg.memory_mode != MemoryMode::kNone && !a.neighbors.empty();
  if (with_memory) {
    if (a.retrieval_corpus.empty())
      throw std::runtime_error("--neighbors needs --retrieval-corpus");
    retrieval = load_corpus_snapshot(a.retrieval_corpus);
    nb = NeighborMap::from_file(a.neighbors);
  }

  std::vector<TokenSeq> outputs;
  outputs.reserve(queries.size());
  DecodeOptions opts;
  opts.beam = a.beam;
  opts.max_out_len = a.max_len;
  for (const auto& p : queries.pairs) {
    RetrievedBatch batch;
    if (with_memory) {
      if (const auto* ids = nb.find(p.id))
        batch = make_retrieved_batch(*ids, retrieval, vocab, 64);
    }
    std::function<MemoryContext<Scalar>(BoundParams<Scalar>&, const EncoderOutput<Scalar>&)>
        builder;
    if (with_memory && !batch.items.empty()) {
      builder = [&cfg, batch](BoundParams<Scalar>& bp, const EncoderOutput<Scalar>& enc) {
        TrainContext ctx;
        return build_memory(bp, cfg, batch, enc, ctx);
      };
    }
    std::vector<std::int32_t> out =
        beam_decode<Scalar>(params, cfg, vocab.encode(p.source), opts, builder);
    TokenSeq toks;
    toks.reserve(out.size());
    for (std::int32_t id : out) toks.push_back(vocab.token(id));
    outputs.push_back(std::move(toks));
  }
  write_token_lines(outputs, a.output);
  std::cout << "translated " << outputs.size() << " sentences -> " << a.output << "\n";
}

// -- adapt ----------------------------------------------------------------------

struct AdaptArgs {
  std::string model_config, checkpoint, vocab, adapt_corpus, queries, strategy = "idf_sentence";
  std::string widths = "6,10,18";
  std::string provider = "hash";
  int dim = 64;
  std::string output_neighbors, hyp;
  int neighbors_n = 10;
  int beam = 1;
  int max_len = 64;
};

template <class Scalar>
void run_adapt(const AdaptArgs& a, const GlobalFlags& g) {
  ModelConfig cfg = model_config_from_file(a.model_config);
  Vocab vocab = load_vocab_text(a.vocab);
  if (cfg.vocab_size == 0) cfg.vocab_size = vocab.size();
  if (cfg.memory_mode == MemoryMode::kNone)
    throw std::runtime_error("adapt: the model must be retrieval-aware (memory_mode != none)");
  ParamStore<Scalar> params = load_checkpoint<Scalar>(a.checkpoint);
  Corpus adapt_corpus = load_corpus_snapshot(a.adapt_corpus);
  if (adapt_corpus.empty()) throw std::runtime_error("adapt: empty adaptation corpus");
  Corpus queries = load_corpus_snapshot(a.queries);

  std::uint64_t before = param_checksum(params);
  NGramRetrievalConfig ng;
  ng.widths = parse_widths(a.widths);
  ng.seed = g.seed;
  Strategy strategy = strategy_from_name(a.strategy);
  std::shared_ptr<const EmbeddingProvider> provider;
  if (strategy == Strategy::kDenseNgram)
    provider = make_provider(a.provider, a.dim, g.seed, a.checkpoint, a.model_config, a.vocab,
                             g.precision);
  RetrievalEngine engine = RetrievalEngine::build(adapt_corpus, strategy, ng, provider);

  auto sets = retrieve_corpus_neighbors(engine, queries, RetrievalMode::kDecode,
                                        static_cast<std::size_t>(a.neighbors_n), false);
  if (!a.output_neighbors.empty()) dump_neighbor_sets(sets, a.output_neighbors);
  NeighborMap nb = NeighborMap::from_sets(sets);

  if (!a.hyp.empty()) {
    std::vector<TokenSeq> outputs;
    DecodeOptions opts;
    opts.beam = a.beam;
    opts.max_out_len = a.max_len;
    for (const auto& p : queries.pairs) {
      RetrievedBatch batch;
      if (const auto* ids = nb.find(p.id))
        batch = make_retrieved_batch(*ids, adapt_corpus, vocab, 64);
      std::function<MemoryContext<Scalar>(BoundParams<Scalar>&, const EncoderOutput<Scalar>&)>
          builder;
      if (!batch.items.empty()) {
        builder = [&cfg, batch](BoundParams<Scalar>& bp, const EncoderOutput<Scalar>& enc) {
          TrainContext ctx;
          return build_memory(bp, cfg, batch, enc, ctx);
        };
      }
      std::vector<std::int32_t> out =
          beam_decode<Scalar>(params, cfg, vocab.encode(p.source), opts, builder);
      TokenSeq toks;
      for (std::int32_t id : out) toks.push_back(vocab.token(id));
      outputs.push_back(std::move(toks));
    }
    write_token_lines(outputs, a.hyp);
  }

  std::uint64_t after = param_checksum(params);
  std::cout << "parameter checksum before: " << before << "\n";
  std::cout << "parameter checksum after:  " << after << (after == before ? " (unchanged)" : " (CHANGED)")
            << "\n";
  if (after != before) throw std::runtime_error("adapt: parameters changed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semi-parametric machine translation workbench"};
  app.set_config("--config", "", "flat key=value defaults file");
  GlobalFlags g;
  app.add_option("--seed", g.seed, "global rng seed");
  app.add_option("--precision", g.precision, "single|double")
      ->check(CLI::IsMember({"single", "double"}));
  app.require_subcommand(1);

  // ingest ------------------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "load, tokenize and snapshot a parallel corpus");
  std::vector<std::string> in_files, in_domains;
  std::string in_format = "tsv", in_tok = "whitespace", in_split = "train", in_out;
  bool in_lower = false, in_skip_bad = false, in_dedupe = false;
  ingest->add_option("--input", in_files, "input file(s)")->required();
  ingest->add_option("--domain", in_domains, "domain tag per input (default: 'default')");
  ingest->add_option("--format", in_format, "tsv|jsonl")->check(CLI::IsMember({"tsv", "jsonl"}));
  ingest->add_option("--tokenizer", in_tok, "whitespace|character")
      ->check(CLI::IsMember({"whitespace", "character"}));
  ingest->add_flag("--lowercase", in_lower, "lowercase tokens");
  ingest->add_flag("--skip-bad", in_skip_bad, "skip malformed rows instead of aborting");
  ingest->add_flag("--dedupe", in_dedupe, "drop exact (source, target) duplicates");
  ingest->add_option("--split", in_split, "train|dev|test")
      ->check(CLI::IsMember({"train", "dev", "test"}));
  ingest->add_option("--output", in_out, "corpus snapshot path")->required();

  // build-idf-index -----------------------------------------------------------
  auto* bidf = app.add_subcommand("build-idf-index", "IDF table + inverted index over a corpus");
  std::string bidf_corpus, bidf_out;
  bidf->add_option("--corpus", bidf_corpus)->required();
  bidf->add_option("--output", bidf_out)->required();

  // build-ngram-index ----------------------------------------------------------
  auto* bng = app.add_subcommand("build-ngram-index", "reduced n-gram index over a corpus");
  std::string bng_corpus, bng_out, bng_widths = "6,10,18";
  bng->add_option("--corpus", bng_corpus)->required();
  bng->add_option("--widths", bng_widths, "comma-separated even widths");
  bng->add_option("--output", bng_out)->required();

  // build-dense-index -----------------------------------------------------------
  auto* bdn = app.add_subcommand("build-dense-index", "dense n-gram vectors over a corpus");
  std::string bdn_corpus, bdn_out, bdn_widths = "6,10,18", bdn_provider = "hash";
  std::string bdn_ckpt, bdn_mcfg, bdn_vocab;
  int bdn_dim = 64;
  bdn->add_option("--corpus", bdn_corpus)->required();
  bdn->add_option("--widths", bdn_widths);
  bdn->add_option("--provider", bdn_provider, "hash|encoder")
      ->check(CLI::IsMember({"hash", "encoder"}));
  bdn->add_option("--dim", bdn_dim, "hash provider dimension");
  bdn->add_option("--checkpoint", bdn_ckpt, "encoder provider checkpoint");
  bdn->add_option("--model-config", bdn_mcfg, "encoder provider model config");
  bdn->add_option("--vocab", bdn_vocab, "encoder provider vocab");
  bdn->add_option("--output", bdn_out)->required();

  // retrieve --------------------------------------------------------------------
  auto* ret = app.add_subcommand("retrieve", "dump neighbor sets for a query corpus");
  std::string ret_strategy = "idf_sentence", ret_corpus, ret_index, ret_queries, ret_mode = "decode",
              ret_out;
  std::string ret_provider = "hash", ret_ckpt, ret_mcfg, ret_vocab;
  int ret_n = 10, ret_dim = 64;
  bool ret_self_exclude = false;
  ret->add_option("--strategy", ret_strategy, "idf_sentence|idf_ngram|dense_ngram")
      ->check(CLI::IsMember({"idf_sentence", "idf_ngram", "dense_ngram"}));
  ret->add_option("--corpus", ret_corpus, "retrieval corpus snapshot")->required();
  ret->add_option("--index", ret_index, "index file from the matching build-* command")->required();
  ret->add_option("--queries", ret_queries, "query corpus snapshot")->required();
  ret->add_option("--mode", ret_mode, "train|decode")->check(CLI::IsMember({"train", "decode"}));
  ret->add_option("-n,--neighbors", ret_n, "neighbor count (train cap / sentence top-n)");
  ret->add_flag("--self-exclude", ret_self_exclude,
                "exclude each query's own pair id (queries indexed by the same corpus)");
  ret->add_option("--provider", ret_provider, "dense strategy: hash|encoder");
  ret->add_option("--dim", ret_dim, "dense hash provider dimension");
  ret->add_option("--checkpoint", ret_ckpt);
  ret->add_option("--model-config", ret_mcfg);
  ret->add_option("--vocab", ret_vocab);
  ret->add_option("--output", ret_out)->required();

  // train -------------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "teacher-forced training with offline neighbors");
  TrainArgs ta;
  tr->add_option("--train", ta.train_path)->required();
  tr->add_option("--dev", ta.dev_path);
  tr->add_option("--model-config", ta.model_config);
  tr->add_option("--train-config", ta.train_config);
  tr->add_option("--neighbors", ta.neighbors);
  tr->add_option("--dev-neighbors", ta.dev_neighbors);
  tr->add_option("--retrieval-corpus", ta.retrieval_corpus);
  tr->add_option("--init-checkpoint", ta.init_checkpoint);
  tr->add_option("--vocab", ta.vocab, "pin the model vocabulary (required with --init-checkpoint)");
  tr->add_option("--outdir", ta.outdir)->required();

  // translate -----------------------------------------------------------------------
  auto* tl = app.add_subcommand("translate", "decode a corpus with a trained checkpoint");
  TranslateArgs tla;
  tl->add_option("--model-config", tla.model_config)->required();
  tl->add_option("--checkpoint", tla.checkpoint)->required();
  tl->add_option("--vocab", tla.vocab)->required();
  tl->add_option("--input", tla.input, "query corpus snapshot")->required();
  tl->add_option("--neighbors", tla.neighbors, "decode-mode neighbor dump");
  tl->add_option("--retrieval-corpus", tla.retrieval_corpus);
  tl->add_option("--beam", tla.beam);
  tl->add_option("--max-len", tla.max_len);
  tl->add_option("--output", tla.output)->required();

  // evaluate -------------------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "corpus BLEU over tokenized files");
  std::string ev_hyp, ev_ref, ev_ref_corpus;
  ev->add_option("--hyp", ev_hyp)->required();
  ev->add_option("--ref", ev_ref, "reference token file");
  ev->add_option("--ref-corpus", ev_ref_corpus, "corpus snapshot; target side as references");

  // adapt ----------------------------------------------------------------------------
  auto* ad = app.add_subcommand("adapt",
                                "non-parametric adaptation: swap the retrieval corpus, no "
                                "parameter updates");
  AdaptArgs aa;
  ad->add_option("--model-config", aa.model_config)->required();
  ad->add_option("--checkpoint", aa.checkpoint)->required();
  ad->add_option("--vocab", aa.vocab)->required();
  ad->add_option("--adapt-corpus", aa.adapt_corpus, "in-domain training corpus")->required();
  ad->add_option("--queries", aa.queries, "query corpus snapshot")->required();
  ad->add_option("--strategy", aa.strategy)->check(
      CLI::IsMember({"idf_sentence", "idf_ngram", "dense_ngram"}));
  ad->add_option("--widths", aa.widths);
  ad->add_option("--provider", aa.provider);
  ad->add_option("--dim", aa.dim);
  ad->add_option("-n,--neighbors", aa.neighbors_n);
  ad->add_option("--output-neighbors", aa.output_neighbors);
  ad->add_option("--hyp", aa.hyp, "translate the queries with the adapted memory");
  ad->add_option("--beam", aa.beam);
  ad->add_option("--max-len", aa.max_len);

  // finetune --------------------------------------------------------------------------
  auto* ft = app.add_subcommand("finetune", "fine-tuning based adaptation on in-domain data");
  TrainArgs fa;
  ft->add_option("--train", fa.train_path, "in-domain corpus")->required();
  ft->add_option("--dev", fa.dev_path);
  ft->add_option("--model-config", fa.model_config)->required();
  ft->add_option("--train-config", fa.train_config);
  ft->add_option("--neighbors", fa.neighbors);
  ft->add_option("--dev-neighbors", fa.dev_neighbors);
  ft->add_option("--retrieval-corpus", fa.retrieval_corpus);
  ft->add_option("--checkpoint", fa.init_checkpoint, "base checkpoint to continue from")
      ->required();
  ft->add_option("--vocab", fa.vocab, "the base model's vocabulary")->required();
  ft->add_option("--outdir", fa.outdir)->required();

  // synth-task ---------------------------------------------------------------------------
  auto* sy = app.add_subcommand("synth-task", "emit the copy-with-substitution demo task");
  std::string sy_outdir;
  int sy_domains = 2, sy_groups = 100, sy_dev_groups = 25, sy_siblings = 2;
  sy->add_option("--outdir", sy_outdir)->required();
  sy->add_option("--domains", sy_domains);
  sy->add_option("--groups", sy_groups, "train groups per domain");
  sy->add_option("--dev-groups", sy_dev_groups);
  sy->add_option("--siblings", sy_siblings);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      Corpus c;
      c.split = split_from_name(in_split);
      LoadStats stats;
      for (std::size_t i = 0; i < in_files.size(); ++i) {
        LoadOptions opts;
        opts.format = in_format == "tsv" ? CorpusFormat::kTsv : CorpusFormat::kJsonl;
        opts.tokenizer = tokenizer_from(in_tok, in_lower);
        opts.domain = i < in_domains.size() ? in_domains[i] : "default";
        opts.split = c.split;
        opts.skip_bad = in_skip_bad;
        append_corpus(c, in_files[i], opts, &stats);
      }
      if (in_dedupe) c = dedupe(c);
      save_corpus(c, in_out);
      std::cout << "ingested " << c.size() << " pairs (skipped " << stats.rows_skipped_bad
                << " malformed, " << stats.rows_skipped_empty << " empty), vocab "
                << c.vocab.size() << " -> " << in_out << "\n";
    } else if (*bidf) {
      Corpus c = load_corpus_snapshot(bidf_corpus);
      IdfTable idf = build_idf(c);
      InvertedIndex index = build_inverted_index(c, idf);
      save_idf_index(idf, index, bidf_out);
      std::cout << "idf index over " << c.size() << " pairs, " << index.postings.size()
                << " tokens -> " << bidf_out << "\n";
    } else if (*bng) {
      Corpus c = load_corpus_snapshot(bng_corpus);
      IdfTable idf = build_idf(c);
      NGramRetrievalConfig cfg;
      cfg.widths = parse_widths(bng_widths);
      cfg.seed = g.seed;
      NGramIndex idx = build_ngram_index(c, cfg, idf);
      save_ngram_index(idx, bng_out);
      std::size_t keys = 0;
      for (const auto& [w, table] : idx.widths) keys += table.entries.size();
      std::cout << "ngram index over " << c.size() << " pairs, " << keys << " distinct n-grams -> "
                << bng_out << "\n";
    } else if (*bdn) {
      Corpus c = load_corpus_snapshot(bdn_corpus);
      auto provider =
          make_provider(bdn_provider, bdn_dim, g.seed, bdn_ckpt, bdn_mcfg, bdn_vocab, g.precision);
      NGramRetrievalConfig cfg;
      cfg.widths = parse_widths(bdn_widths);
      cfg.seed = g.seed;
      DenseIndex idx = build_dense_index(c, *provider, cfg);
      save_dense_index(idx, bdn_out);
      std::size_t entries = 0;
      for (const auto& [w, v] : idx.widths) entries += v.size();
      std::cout << "dense index over " << c.size() << " pairs, " << entries << " entries (d="
                << idx.dimension << ") -> " << bdn_out << "\n";
    } else if (*ret) {
      Corpus corpus = load_corpus_snapshot(ret_corpus);
      Corpus queries = load_corpus_snapshot(ret_queries);
      RetrievalMode mode = ret_mode == "train" ? RetrievalMode::kTrain : RetrievalMode::kDecode;
      Strategy strategy = strategy_from_name(ret_strategy);
      std::vector<NeighborSet> sets;
      sets.reserve(queries.size());
      if (strategy == Strategy::kIdfSentence) {
        IdfTable idf;
        InvertedIndex index;
        load_idf_index(ret_index, idf, index);
        for (const auto& p : queries.pairs) {
          std::optional<std::uint64_t> exclude;
          if (ret_self_exclude) exclude = p.id;
          sets.push_back(retrieve_sentences(p.source, corpus, idf, index,
                                            static_cast<std::size_t>(ret_n), exclude, p.id));
        }
      } else if (strategy == Strategy::kIdfNgram) {
        NGramIndex idx = load_ngram_index(ret_index);
        NGramRetrievalConfig cfg;
        for (const auto& [w, table] : idx.widths) cfg.widths.push_back(w);
        cfg.train_cap = static_cast<std::size_t>(ret_n);
        cfg.seed = g.seed;
        for (const auto& p : queries.pairs) {
          std::optional<std::uint64_t> exclude;
          if (ret_self_exclude) exclude = p.id;
          sets.push_back(retrieve_by_ngrams(p.source, idx, cfg, mode, exclude, p.id));
        }
      } else {
        DenseIndex idx = load_dense_index(ret_index);
        auto provider = make_provider(ret_provider, static_cast<int>(idx.dimension), g.seed,
                                      ret_ckpt, ret_mcfg, ret_vocab, g.precision);
        NGramRetrievalConfig cfg;
        for (const auto& [w, v] : idx.widths) cfg.widths.push_back(w);
        cfg.train_cap = static_cast<std::size_t>(ret_n);
        cfg.seed = g.seed;
        for (const auto& p : queries.pairs) {
          std::optional<std::uint64_t> exclude;
          if (ret_self_exclude) exclude = p.id;
          sets.push_back(retrieve_dense(p.source, idx, *provider, cfg, mode, exclude, p.id));
        }
      }
      dump_neighbor_sets(sets, ret_out);
      std::cout << "retrieved neighbors for " << sets.size() << " queries -> " << ret_out << "\n";
    } else if (*tr) {
      if (!ta.init_checkpoint.empty() && ta.vocab.empty())
        throw std::runtime_error("--init-checkpoint requires --vocab");
      if (g.precision == "single")
        run_train<float>(ta, g);
      else
        run_train<double>(ta, g);
    } else if (*tl) {
      if (g.precision == "single")
        run_translate<float>(tla);
      else
        run_translate<double>(tla);
    } else if (*ev) {
      std::vector<TokenSeq> hyp = read_token_lines(ev_hyp);
      std::vector<TokenSeq> ref;
      if (!ev_ref.empty()) {
        ref = read_token_lines(ev_ref);
      } else if (!ev_ref_corpus.empty()) {
        Corpus rc = load_corpus_snapshot(ev_ref_corpus);
        for (const auto& p : rc.pairs) ref.push_back(p.target);
      } else {
        throw std::runtime_error("evaluate needs --ref or --ref-corpus");
      }
      double bleu = corpus_bleu(hyp, ref);
      std::printf("BLEU = %.2f\n", bleu);
    } else if (*ad) {
      if (g.precision == "single")
        run_adapt<float>(aa, g);
      else
        run_adapt<double>(aa, g);
    } else if (*ft) {
      if (g.precision == "single")
        run_train<float>(fa, g);
      else
        run_train<double>(fa, g);
    } else if (*sy) {
      SyntheticTaskConfig scfg;
      scfg.seed = g.seed;
      scfg.domains.clear();
      for (int d = 0; d < sy_domains; ++d) scfg.domains.push_back(d);
      scfg.groups_per_domain = sy_groups;
      scfg.dev_groups_per_domain = sy_dev_groups;
      scfg.siblings_per_group = sy_siblings;
      SyntheticTask task = make_copy_substitution_task(scfg);
      std::filesystem::create_directories(sy_outdir);
      auto dump_tsv = [](const Corpus& c, const std::string& path) {
        std::ofstream os(path, std::ios::binary);
        for (const auto& p : c.pairs) {
          for (std::size_t i = 0; i < p.source.size(); ++i) os << (i ? " " : "") << p.source[i];
          os << '\t';
          for (std::size_t i = 0; i < p.target.size(); ++i) os << (i ? " " : "") << p.target[i];
          os << '\n';
        }
      };
      dump_tsv(task.train, sy_outdir + "/train.tsv");
      dump_tsv(task.dev, sy_outdir + "/dev.tsv");
      dump_neighbor_sets(oracle_neighbor_sets(task.train_oracle), sy_outdir + "/train_oracle.jsonl");
      dump_neighbor_sets(oracle_neighbor_sets(task.dev_oracle), sy_outdir + "/dev_oracle.jsonl");
      std::cout << "synthetic task: " << task.train.size() << " train / " << task.dev.size()
                << " dev pairs -> " << sy_outdir << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

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

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "semimt/common.hpp"
#include "semimt/corpus.hpp"
#include "semimt/tensor.hpp"

namespace semimt {

enum class MemoryMode { kNone, kTm, kCtm, kCstm };

MemoryMode memory_mode_from_name(const std::string& name);
const char* memory_mode_name(MemoryMode m);

inline MemoryMode memory_mode_from_name(const std::string& name) {
  if (name == "none") return MemoryMode::kNone;
  if (name == "tm") return MemoryMode::kTm;
  if (name == "ctm") return MemoryMode::kCtm;
  if (name == "cstm") return MemoryMode::kCstm;
  throw std::runtime_error("unknown memory_mode: " + name);
}

inline const char* memory_mode_name(MemoryMode m) {
  switch (m) {
    case MemoryMode::kNone: return "none";
    case MemoryMode::kTm: return "tm";
    case MemoryMode::kCtm: return "ctm";
    case MemoryMode::kCstm: return "cstm";
  }
  return "none";
}

struct ModelConfig {
  int d_model = 64;
  int num_heads = 4;
  int d_ff = 128;
  int enc_layers = 2;
  int dec_layers = 2;
  double dropout_rate = 0.1;
  int vocab_size = 0;
  int max_len = 256;
  MemoryMode memory_mode = MemoryMode::kNone;
  int mem_layers = 1;  // depth of the retrieved-pair encoders
  double label_smoothing = 0.1;
  double ln_eps = 1e-6;

  void validate() const {
    if (d_model <= 0 || num_heads <= 0 || d_ff <= 0 || enc_layers <= 0 || dec_layers <= 0 ||
        mem_layers <= 0)
      throw std::runtime_error("model config: dimensions and depths must be positive");
    if (d_model % num_heads != 0)
      throw std::runtime_error("model config: d_model must be divisible by num_heads");
    if (vocab_size < 5) throw std::runtime_error("model config: vocab_size must cover the reserved ids");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw std::runtime_error("model config: dropout_rate must be in [0, 1)");
    if (max_len < 2) throw std::runtime_error("model config: max_len too small");
  }
};

/// Flat key=value files carry model and training configs.
inline std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = value;
  }
  return kv;
}

ModelConfig model_config_from_file(const std::string& path);
void save_model_config(const ModelConfig& cfg, const std::string& path);

inline ModelConfig model_config_from_file(const std::string& path) {
  auto kv = read_kv_file(path);
  ModelConfig cfg;
  auto geti = [&](const char* k, int& out) {
    if (kv.count(k)) out = std::stoi(kv.at(k));
  };
  auto getd = [&](const char* k, double& out) {
    if (kv.count(k)) out = std::stod(kv.at(k));
  };
  geti("d_model", cfg.d_model);
  geti("num_heads", cfg.num_heads);
  geti("d_ff", cfg.d_ff);
  geti("enc_layers", cfg.enc_layers);
  geti("dec_layers", cfg.dec_layers);
  getd("dropout_rate", cfg.dropout_rate);
  geti("vocab_size", cfg.vocab_size);
  geti("max_len", cfg.max_len);
  geti("mem_layers", cfg.mem_layers);
  getd("label_smoothing", cfg.label_smoothing);
  getd("ln_eps", cfg.ln_eps);
  if (kv.count("memory_mode")) cfg.memory_mode = memory_mode_from_name(kv.at("memory_mode"));
  return cfg;
}

inline void save_model_config(const ModelConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write config: " + path);
  os << "d_model = " << cfg.d_model << "\n"
     << "num_heads = " << cfg.num_heads << "\n"
     << "d_ff = " << cfg.d_ff << "\n"
     << "enc_layers = " << cfg.enc_layers << "\n"
     << "dec_layers = " << cfg.dec_layers << "\n"
     << "dropout_rate = " << cfg.dropout_rate << "\n"
     << "vocab_size = " << cfg.vocab_size << "\n"
     << "max_len = " << cfg.max_len << "\n"
     << "memory_mode = " << memory_mode_name(cfg.memory_mode) << "\n"
     << "mem_layers = " << cfg.mem_layers << "\n"
     << "label_smoothing = " << cfg.label_smoothing << "\n"
     << "ln_eps = " << cfg.ln_eps << "\n";
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Named parameter matrices. std::map keeps iteration order deterministic.
template <class Scalar>
class ParamStore {
 public:
  Mat<Scalar>& emplace(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    auto [it, fresh] = params_.try_emplace(name, Mat<Scalar>::Zero(rows, cols));
    if (!fresh) throw std::runtime_error("parameter registered twice: " + name);
    return it->second;
  }
  Mat<Scalar>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::runtime_error("unknown parameter: " + name);
    return it->second;
  }
  const Mat<Scalar>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::runtime_error("unknown parameter: " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Mat<Scalar>> params_;
};

namespace detail {
constexpr char kCkptMagic[] = "SMTCKPT1";
}

template <class Scalar>
void save_checkpoint(const ParamStore<Scalar>& store, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  os.write(detail::kCkptMagic, 8);
  put_le<std::uint32_t>(os, 1);
  put_le<std::uint8_t>(os, sizeof(Scalar));
  put_le<std::uint64_t>(os, store.size());
  for (const auto& [name, m] : store) {
    put_str(os, name);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.rows()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if constexpr (sizeof(Scalar) == 4)
        put_f32(os, static_cast<float>(m(i)));
      else
        put_f64(os, static_cast<double>(m(i)));
    }
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

template <class Scalar>
ParamStore<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  expect_magic(is, std::string_view(detail::kCkptMagic, 8));
  std::uint32_t version = get_le<std::uint32_t>(is);
  if (version != 1) throw std::runtime_error("unsupported checkpoint version");
  std::uint8_t width = get_le<std::uint8_t>(is);
  if (width != sizeof(Scalar))
    throw std::runtime_error("checkpoint precision does not match the requested precision");
  std::uint64_t n = get_le<std::uint64_t>(is);
  ParamStore<Scalar> store;
  for (std::uint64_t k = 0; k < n; ++k) {
    std::string name = get_str(is);
    std::uint32_t rows = get_le<std::uint32_t>(is);
    std::uint32_t cols = get_le<std::uint32_t>(is);
    Mat<Scalar>& m = store.emplace(name, rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if constexpr (sizeof(Scalar) == 4)
        m(i) = static_cast<Scalar>(get_f32(is));
      else
        m(i) = static_cast<Scalar>(get_f64(is));
    }
  }
  return store;
}

/// FNV over the canonical byte serialization; equal iff every value is
/// bit-identical.
template <class Scalar>
std::uint64_t param_checksum(const ParamStore<Scalar>& store) {
  std::uint64_t h = kFnvOffset;
  for (const auto& [name, m] : store) {
    h = fnv1a(name, h);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if constexpr (sizeof(Scalar) == 4) {
        std::uint32_t bits;
        float f = static_cast<float>(m(i));
        std::memcpy(&bits, &f, 4);
        h = fnv1a_u64(bits, h);
      } else {
        std::uint64_t bits;
        double d = static_cast<double>(m(i));
        std::memcpy(&bits, &d, 8);
        h = fnv1a_u64(bits, h);
      }
    }
  }
  return h;
}

// -- initialization ----------------------------------------------------------

namespace detail {

template <class Scalar>
void fill_xavier(Mat<Scalar>& m, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = static_cast<Scalar>(rng.uniform(-limit, limit));
}

template <class Scalar>
void init_attention(ParamStore<Scalar>& store, Rng& rng, const std::string& prefix, int d) {
  for (const char* w : {".wq", ".wk", ".wv", ".wo"}) fill_xavier(store.emplace(prefix + w, d, d), rng);
}

template <class Scalar>
void init_layer_norm(ParamStore<Scalar>& store, const std::string& prefix, int d) {
  store.emplace(prefix + ".g", 1, d).setOnes();
  store.emplace(prefix + ".b", 1, d);  // zeros
}

template <class Scalar>
void init_ffn(ParamStore<Scalar>& store, Rng& rng, const std::string& prefix, int d, int d_ff) {
  fill_xavier(store.emplace(prefix + ".w1", d, d_ff), rng);
  store.emplace(prefix + ".b1", 1, d_ff);
  fill_xavier(store.emplace(prefix + ".w2", d_ff, d), rng);
  store.emplace(prefix + ".b2", 1, d);
}

}  // namespace detail

/// Initializes every parameter the configuration calls for, in a fixed
/// order driven by one seeded stream. The memory-mode extras append to the
/// baseline set, so a baseline checkpoint is a strict name subset.
template <class Scalar>
ParamStore<Scalar> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamStore<Scalar> store;
  Rng rng(fnv1a_u64(seed, fnv1a("param-init")));
  const int d = cfg.d_model;

  Mat<Scalar>& embed = store.emplace("embed.tok", cfg.vocab_size, d);
  double escale = 1.0 / std::sqrt(static_cast<double>(d));
  for (Eigen::Index i = 0; i < embed.size(); ++i)
    embed(i) = static_cast<Scalar>(rng.uniform(-escale, escale));

  for (int l = 0; l < cfg.enc_layers; ++l) {
    std::string p = "enc.l" + std::to_string(l);
    detail::init_layer_norm(store, p + ".ln1", d);
    detail::init_attention(store, rng, p + ".self", d);
    detail::init_layer_norm(store, p + ".ln2", d);
    detail::init_ffn(store, rng, p + ".ffn", d, cfg.d_ff);
  }
  detail::init_layer_norm(store, "enc.ln", d);

  for (int l = 0; l < cfg.dec_layers; ++l) {
    std::string p = "dec.l" + std::to_string(l);
    detail::init_layer_norm(store, p + ".ln1", d);
    detail::init_attention(store, rng, p + ".self", d);
    detail::init_layer_norm(store, p + ".ln2", d);
    detail::init_attention(store, rng, p + ".cross", d);
    detail::init_layer_norm(store, p + ".ln3", d);
    detail::init_ffn(store, rng, p + ".ffn", d, cfg.d_ff);
  }
  detail::init_layer_norm(store, "dec.ln", d);

  detail::fill_xavier(store.emplace("out.w", d, cfg.vocab_size), rng);
  store.emplace("out.b", 1, cfg.vocab_size);

  if (cfg.memory_mode != MemoryMode::kNone) {
    // retrieved-source encoder (CSTM only: it conditions on the current source)
    if (cfg.memory_mode == MemoryMode::kCstm) {
      for (int l = 0; l < cfg.mem_layers; ++l) {
        std::string p = "memsrc.l" + std::to_string(l);
        detail::init_layer_norm(store, p + ".ln1", d);
        detail::init_attention(store, rng, p + ".self", d);
        detail::init_layer_norm(store, p + ".ln2", d);
        detail::init_attention(store, rng, p + ".cross", d);
        detail::init_layer_norm(store, p + ".ln3", d);
        detail::init_ffn(store, rng, p + ".ffn", d, cfg.d_ff);
      }
      detail::init_layer_norm(store, "memsrc.ln", d);
    }
    // retrieved-target encoder; cross-attention except in TM mode
    for (int l = 0; l < cfg.mem_layers; ++l) {
      std::string p = "memtgt.l" + std::to_string(l);
      detail::init_layer_norm(store, p + ".ln1", d);
      detail::init_attention(store, rng, p + ".self", d);
      detail::init_layer_norm(store, p + ".ln2", d);
      if (cfg.memory_mode != MemoryMode::kTm) {
        detail::init_attention(store, rng, p + ".cross", d);
        detail::init_layer_norm(store, p + ".ln3", d);
      }
      detail::init_ffn(store, rng, p + ".ffn", d, cfg.d_ff);
    }
    detail::init_layer_norm(store, "memtgt.ln", d);
    detail::init_layer_norm(store, "cstm.ln", d);  // norm over the assembled memory

    for (int l = 0; l < cfg.dec_layers; ++l) {
      std::string p = "dec.l" + std::to_string(l);
      detail::init_attention(store, rng, p + ".mem", d);
      store.emplace(p + ".gate.ws", d, 1);  // zero: the gate starts balanced
      store.emplace(p + ".gate.wm", d, 1);
    }
  }
  return store;
}

// ---------------------------------------------------------------------------
// Forward machinery
// ---------------------------------------------------------------------------

struct TrainContext {
  bool training = false;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  double dropout_rate = 0.0;
  /// Disambiguates dropout sites across sentences sharing one graph.
  std::string scope;
};

/// Binds store entries into a graph lazily; each parameter becomes one leaf
/// no matter how often it is used.
template <class Scalar>
class BoundParams {
 public:
  BoundParams(Graph<Scalar>& g, ParamStore<Scalar>& store, bool trainable)
      : graph_(g), store_(store), trainable_(trainable) {}

  Var<Scalar> operator()(const std::string& name) {
    auto it = leaves_.find(name);
    if (it != leaves_.end()) return it->second;
    Var<Scalar> leaf =
        trainable_ ? graph_.param(store_.at(name)) : graph_.input(store_.at(name));
    leaves_.emplace(name, leaf);
    return leaf;
  }

  const std::map<std::string, Var<Scalar>>& leaves() const { return leaves_; }
  ParamStore<Scalar>& store() { return store_; }
  Graph<Scalar>& graph() { return graph_; }

 private:
  Graph<Scalar>& graph_;
  ParamStore<Scalar>& store_;
  bool trainable_;
  std::map<std::string, Var<Scalar>> leaves_;
};

namespace detail {

template <class Scalar>
Var<Scalar> site_dropout(Var<Scalar> x, const TrainContext& ctx, const std::string& site) {
  DropoutPlan plan{ctx.seed, fnv1a(ctx.scope + site), ctx.step};
  return dropout(x, ctx.dropout_rate, plan, ctx.training);
}

template <class Scalar>
Mat<Scalar> positional_encoding(Eigen::Index len, int d) {
  Mat<Scalar> pe(len, d);
  for (Eigen::Index pos = 0; pos < len; ++pos) {
    for (int i = 0; i < d; i += 2) {
      double angle = static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / d);
      pe(pos, i) = static_cast<Scalar>(std::sin(angle));
      if (i + 1 < d) pe(pos, i + 1) = static_cast<Scalar>(std::cos(angle));
    }
  }
  return pe;
}

}  // namespace detail

inline MaskMat full_mask(Eigen::Index rows, Eigen::Index cols) {
  MaskMat m(rows, cols);
  m.setConstant(true);
  return m;
}

inline MaskMat causal_mask(Eigen::Index n) {
  MaskMat m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = j <= i;
  return m;
}

/// Columns of the mask marked false are unreachable keys (padding).
inline MaskMat mask_from_columns(Eigen::Index rows, const std::vector<bool>& key_is_real) {
  MaskMat m(rows, static_cast<Eigen::Index>(key_is_real.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = key_is_real[static_cast<std::size_t>(j)];
  return m;
}

/// Standard multi-head attention: project, split into heads, scaled dot
/// product with the boolean mask, recombine, output-project. Parameters
/// live under `prefix` (.wq .wk .wv .wo).
template <class Scalar>
Var<Scalar> multi_head_attention(BoundParams<Scalar>& bp, const std::string& prefix,
                                 Var<Scalar> query_seq, Var<Scalar> kv_seq, const MaskMat& mask,
                                 int num_heads, const TrainContext& ctx) {
  const Eigen::Index d = query_seq.cols();
  if (d % num_heads != 0) throw std::runtime_error("attention: d_model not divisible by heads");
  const Eigen::Index dh = d / num_heads;
  Var<Scalar> q = matmul(query_seq, bp(prefix + ".wq"));
  Var<Scalar> k = matmul(kv_seq, bp(prefix + ".wk"));
  Var<Scalar> v = matmul(kv_seq, bp(prefix + ".wv"));
  std::vector<Eigen::Index> sizes(static_cast<std::size_t>(num_heads), dh);
  auto qh = split(q, sizes, 1);
  auto kh = split(k, sizes, 1);
  auto vh = split(v, sizes, 1);
  const Scalar inv_sqrt = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(dh)));
  std::vector<Var<Scalar>> heads;
  heads.reserve(static_cast<std::size_t>(num_heads));
  for (int h = 0; h < num_heads; ++h) {
    Var<Scalar> scores = scale(matmul(qh[h], transpose(kh[h])), inv_sqrt);
    Var<Scalar> weights = masked_softmax(scores, mask);
    weights = detail::site_dropout(weights, ctx, prefix + ".attw.h" + std::to_string(h));
    heads.push_back(matmul(weights, vh[h]));
  }
  return matmul(concat(heads, 1), bp(prefix + ".wo"));
}

template <class Scalar>
Var<Scalar> feed_forward(BoundParams<Scalar>& bp, const std::string& prefix, Var<Scalar> x,
                         const TrainContext& ctx) {
  Var<Scalar> h = relu(add_rowwise(matmul(x, bp(prefix + ".w1")), bp(prefix + ".b1")));
  h = detail::site_dropout(h, ctx, prefix + ".relu");
  return add_rowwise(matmul(h, bp(prefix + ".w2")), bp(prefix + ".b2"));
}

template <class Scalar>
Var<Scalar> apply_layer_norm(BoundParams<Scalar>& bp, const std::string& prefix, Var<Scalar> x,
                             const ModelConfig& cfg) {
  return layer_norm(x, bp(prefix + ".g"), bp(prefix + ".b"), static_cast<Scalar>(cfg.ln_eps));
}

/// Token embedding (scaled), sinusoidal positions, input dropout.
template <class Scalar>
Var<Scalar> embed_sequence(BoundParams<Scalar>& bp, const ModelConfig& cfg,
                           const std::vector<std::int32_t>& ids, const TrainContext& ctx,
                           const std::string& site) {
  if (static_cast<int>(ids.size()) > cfg.max_len)
    throw std::runtime_error("sequence longer than max_len");
  Var<Scalar> emb = embedding_lookup(bp("embed.tok"), ids);
  emb = scale(emb, static_cast<Scalar>(std::sqrt(static_cast<double>(cfg.d_model))));
  Var<Scalar> pe = bp.graph().input(
      detail::positional_encoding<Scalar>(static_cast<Eigen::Index>(ids.size()), cfg.d_model));
  return detail::site_dropout(add(emb, pe), ctx, site + ".embdrop");
}

template <class Scalar>
struct EncoderOutput {
  Var<Scalar> states;
  std::vector<bool> pad_mask;  // true where the position is a real token
};

/// Pre-norm encoder over tokens + EOS.
template <class Scalar>
EncoderOutput<Scalar> encode(BoundParams<Scalar>& bp, const ModelConfig& cfg,
                             std::vector<std::int32_t> src_ids, const TrainContext& ctx) {
  if (src_ids.empty()) throw std::runtime_error("encode: empty source");
  src_ids.push_back(Vocab::kEos);
  Var<Scalar> x = embed_sequence(bp, cfg, src_ids, ctx, "enc");
  const Eigen::Index t_len = x.rows();
  MaskMat self = full_mask(t_len, t_len);
  for (int l = 0; l < cfg.enc_layers; ++l) {
    std::string p = "enc.l" + std::to_string(l);
    Var<Scalar> normed = apply_layer_norm(bp, p + ".ln1", x, cfg);
    Var<Scalar> a = multi_head_attention(bp, p + ".self", normed, normed, self, cfg.num_heads, ctx);
    x = add(x, detail::site_dropout(a, ctx, p + ".self.drop"));
    Var<Scalar> f = feed_forward(bp, p + ".ffn", apply_layer_norm(bp, p + ".ln2", x, cfg), ctx);
    x = add(x, detail::site_dropout(f, ctx, p + ".ffn.drop"));
  }
  EncoderOutput<Scalar> out;
  out.states = apply_layer_norm(bp, "enc.ln", x, cfg);
  out.pad_mask.assign(static_cast<std::size_t>(t_len), true);
  return out;
}

/// Time-concatenated encodings of the retrieved targets, ready for the
/// decoder's memory attention. Empty when no neighbors were retrieved.
template <class Scalar>
struct MemoryContext {
  std::optional<Var<Scalar>> states;
  std::vector<bool> pad_mask;                // true = real row
  std::vector<Eigen::Index> segment_sizes;   // rows per neighbor
  /// Test hook: pins the gate to a constant (1 reproduces the baseline).
  std::optional<double> pin_gate;
  /// Probe: when set, every layer appends its per-position gate values.
  std::vector<Mat<Scalar>>* gate_probe = nullptr;

  bool empty() const { return !states.has_value(); }
};

/// Gated blend of source context and memory context (one scalar gate per
/// position per layer). With empty memory the source context passes
/// through untouched.
template <class Scalar>
Var<Scalar> gated_cross_attention(BoundParams<Scalar>& bp, const std::string& layer_prefix,
                                  Var<Scalar> x_normed, const EncoderOutput<Scalar>& enc,
                                  const MemoryContext<Scalar>& memory, const ModelConfig& cfg,
                                  const TrainContext& ctx) {
  MaskMat cross = mask_from_columns(x_normed.rows(), enc.pad_mask);
  Var<Scalar> c_src = multi_head_attention(bp, layer_prefix + ".cross", x_normed, enc.states,
                                           cross, cfg.num_heads, ctx);
  if (memory.empty()) return c_src;

  MaskMat mem_mask = mask_from_columns(x_normed.rows(), memory.pad_mask);
  Var<Scalar> c_mem = multi_head_attention(bp, layer_prefix + ".mem", x_normed, *memory.states,
                                           mem_mask, cfg.num_heads, ctx);
  Var<Scalar> gate;
  if (memory.pin_gate) {
    Mat<Scalar> pinned(x_normed.rows(), 1);
    pinned.setConstant(static_cast<Scalar>(*memory.pin_gate));
    gate = bp.graph().input(std::move(pinned));
  } else {
    Var<Scalar> pre =
        add(matmul(c_src, bp(layer_prefix + ".gate.ws")), matmul(c_mem, bp(layer_prefix + ".gate.wm")));
    gate = sigmoid(pre);
  }
  if (memory.gate_probe) memory.gate_probe->push_back(gate.value());
  return add(row_scale(c_src, gate), row_scale(c_mem, affine(gate, Scalar(-1), Scalar(1))));
}

/// Teacher-forced decoder: input BOS + tokens, logits for every position.
/// `memory` may be empty, in which case this is exactly the baseline
/// decoder.
template <class Scalar>
Var<Scalar> decode_train(BoundParams<Scalar>& bp, const ModelConfig& cfg,
                         const std::vector<std::int32_t>& tgt_ids, const EncoderOutput<Scalar>& enc,
                         const MemoryContext<Scalar>& memory, const TrainContext& ctx) {
  std::vector<std::int32_t> input_ids;
  input_ids.reserve(tgt_ids.size() + 1);
  input_ids.push_back(Vocab::kBos);
  input_ids.insert(input_ids.end(), tgt_ids.begin(), tgt_ids.end());
  Var<Scalar> x = embed_sequence(bp, cfg, input_ids, ctx, "dec");
  const Eigen::Index t_len = x.rows();
  MaskMat causal = causal_mask(t_len);
  for (int l = 0; l < cfg.dec_layers; ++l) {
    std::string p = "dec.l" + std::to_string(l);
    Var<Scalar> normed = apply_layer_norm(bp, p + ".ln1", x, cfg);
    Var<Scalar> a =
        multi_head_attention(bp, p + ".self", normed, normed, causal, cfg.num_heads, ctx);
    x = add(x, detail::site_dropout(a, ctx, p + ".self.drop"));
    Var<Scalar> c = gated_cross_attention(bp, p, apply_layer_norm(bp, p + ".ln2", x, cfg), enc,
                                          memory, cfg, ctx);
    x = add(x, detail::site_dropout(c, ctx, p + ".cross.drop"));
    Var<Scalar> f = feed_forward(bp, p + ".ffn", apply_layer_norm(bp, p + ".ln3", x, cfg), ctx);
    x = add(x, detail::site_dropout(f, ctx, p + ".ffn.drop"));
  }
  x = apply_layer_norm(bp, "dec.ln", x, cfg);
  return add_rowwise(matmul(x, bp("out.w")), bp("out.b"));
}

/// Labels for teacher forcing: tokens + EOS.
inline std::vector<std::int32_t> shifted_labels(const std::vector<std::int32_t>& tgt_ids) {
  std::vector<std::int32_t> labels = tgt_ids;
  labels.push_back(Vocab::kEos);
  return labels;
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

struct DecodeOptions {
  int beam = 1;
  int max_out_len = 64;
};

/// One evaluation of the decoder over a prefix; returns log-probs of the
/// next token. Rebuilt per step (no state caching at this scale).
template <class Scalar>
Eigen::VectorXd next_token_logprobs(ParamStore<Scalar>& store, const ModelConfig& cfg,
                                    const std::vector<std::int32_t>& src_ids,
                                    const std::vector<std::int32_t>& prefix,
                                    const std::function<MemoryContext<Scalar>(
                                        BoundParams<Scalar>&, const EncoderOutput<Scalar>&)>&
                                        memory_builder) {
  Graph<Scalar> g;
  BoundParams<Scalar> bp(g, store, false);
  TrainContext ctx;  // evaluation: no dropout
  EncoderOutput<Scalar> enc = encode(bp, cfg, src_ids, ctx);
  MemoryContext<Scalar> memory;
  if (memory_builder) memory = memory_builder(bp, enc);
  Var<Scalar> logits = decode_train(bp, cfg, prefix, enc, memory, ctx);
  Eigen::Index last = logits.rows() - 1;
  Eigen::VectorXd row = logits.value().row(last).template cast<double>();
  double mx = row.maxCoeff();
  double lse = std::log((row.array() - mx).exp().sum()) + mx;
  return row.array() - lse;
}

/// Beam search with length-normalized log probability (sum / length).
/// beam = 1 reduces to greedy argmax decoding.
template <class Scalar>
std::vector<std::int32_t> beam_decode(
    ParamStore<Scalar>& store, const ModelConfig& cfg, const std::vector<std::int32_t>& src_ids,
    const DecodeOptions& opts,
    const std::function<MemoryContext<Scalar>(BoundParams<Scalar>&, const EncoderOutput<Scalar>&)>&
        memory_builder = nullptr) {
  if (opts.beam < 1) throw std::runtime_error("beam must be >= 1");
  struct Hyp {
    std::vector<std::int32_t> tokens;  // no BOS/EOS
    double sum_logp = 0.0;
    bool finished = false;
    double norm() const {
      return sum_logp / static_cast<double>(std::max<std::size_t>(1, tokens.size() + finished));
    }
  };
  std::vector<Hyp> beam_set{Hyp{}};
  for (int step = 0; step < opts.max_out_len + 1; ++step) {
    bool all_done = true;
    for (const auto& h : beam_set)
      if (!h.finished && static_cast<int>(h.tokens.size()) < opts.max_out_len) all_done = false;
    if (all_done) break;
    std::vector<Hyp> candidates;
    for (const auto& h : beam_set) {
      if (h.finished || static_cast<int>(h.tokens.size()) >= opts.max_out_len) {
        candidates.push_back(h);
        continue;
      }
      Eigen::VectorXd logp = next_token_logprobs(store, cfg, src_ids, h.tokens, memory_builder);
      // consider the best `beam` continuations of this hypothesis
      std::vector<std::int32_t> order(static_cast<std::size_t>(logp.size()));
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int32_t>(i);
      std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
        if (logp(a) != logp(b)) return logp(a) > logp(b);
        return a < b;
      });
      int take = std::min<int>(opts.beam, static_cast<int>(order.size()));
      for (int k = 0; k < take; ++k) {
        Hyp next = h;
        std::int32_t tok = order[static_cast<std::size_t>(k)];
        next.sum_logp += logp(tok);
        if (tok == Vocab::kEos) {
          next.finished = true;
        } else {
          next.tokens.push_back(tok);
        }
        candidates.push_back(std::move(next));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Hyp& a, const Hyp& b) {
      return a.norm() > b.norm();
    });
    if (static_cast<int>(candidates.size()) > opts.beam) candidates.resize(opts.beam);
    beam_set = std::move(candidates);
  }
  std::stable_sort(beam_set.begin(), beam_set.end(),
                   [](const Hyp& a, const Hyp& b) { return a.norm() > b.norm(); });
  return beam_set.front().tokens;
}

template <class Scalar>
std::vector<std::int32_t> greedy_decode(
    ParamStore<Scalar>& store, const ModelConfig& cfg, const std::vector<std::int32_t>& src_ids,
    int max_out_len,
    const std::function<MemoryContext<Scalar>(BoundParams<Scalar>&, const EncoderOutput<Scalar>&)>&
        memory_builder = nullptr) {
  std::vector<std::int32_t> tokens;
  for (int step = 0; step < max_out_len; ++step) {
    Eigen::VectorXd logp = next_token_logprobs(store, cfg, src_ids, tokens, memory_builder);
    Eigen::Index best;
    logp.maxCoeff(&best);
    if (static_cast<std::int32_t>(best) == Vocab::kEos) break;
    tokens.push_back(static_cast<std::int32_t>(best));
  }
  return tokens;
}

}  // namespace semimt

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

#include <optional>
#include <string>
#include <vector>

#include "semimt/transformer.hpp"

namespace semimt {

/// Retrieved source/target pairs feeding the memory. N may be zero.
struct RetrievedBatch {
  struct Item {
    std::vector<std::int32_t> source_ids;
    std::vector<std::int32_t> target_ids;
    std::uint64_t pair_id = 0;
    double score = 0.0;
  };
  std::vector<Item> items;

  std::size_t size() const { return items.size(); }
};

namespace detail {

/// Shared body of the two retrieved-pair encoders: pre-norm self-attention
/// (bidirectional), optional cross-attention to `conditioning`, feed
/// forward. `scope_tag` keeps dropout sites distinct per neighbor.
template <class Scalar>
Var<Scalar> retrieved_encoder_stack(BoundParams<Scalar>& bp, const ModelConfig& cfg,
                                    const std::string& stack, Var<Scalar> x,
                                    std::optional<Var<Scalar>> conditioning,
                                    const TrainContext& ctx, const std::string& scope_tag) {
  const Eigen::Index t_len = x.rows();
  MaskMat self = full_mask(t_len, t_len);
  for (int l = 0; l < cfg.mem_layers; ++l) {
    std::string p = stack + ".l" + std::to_string(l);
    std::string tag = scope_tag + p;
    Var<Scalar> normed = apply_layer_norm(bp, p + ".ln1", x, cfg);
    Var<Scalar> a = multi_head_attention(bp, p + ".self", normed, normed, self, cfg.num_heads, ctx);
    x = add(x, detail::site_dropout(a, ctx, tag + ".self.drop"));
    if (conditioning) {
      MaskMat cross = full_mask(t_len, conditioning->rows());
      Var<Scalar> c = multi_head_attention(bp, p + ".cross", apply_layer_norm(bp, p + ".ln2", x, cfg),
                                           *conditioning, cross, cfg.num_heads, ctx);
      x = add(x, detail::site_dropout(c, ctx, tag + ".cross.drop"));
      Var<Scalar> f = feed_forward(bp, p + ".ffn", apply_layer_norm(bp, p + ".ln3", x, cfg), ctx);
      x = add(x, detail::site_dropout(f, ctx, tag + ".ffn.drop"));
    } else {
      Var<Scalar> f = feed_forward(bp, p + ".ffn", apply_layer_norm(bp, p + ".ln2", x, cfg), ctx);
      x = add(x, detail::site_dropout(f, ctx, tag + ".ffn.drop"));
    }
  }
  return apply_layer_norm(bp, stack + ".ln", x, cfg);
}

}  // namespace detail

/// Encodes one retrieved source X^i: self-attention over X^i plus
/// cross-attention into the encoding of the current source.
template <class Scalar>
Var<Scalar> encode_retrieved_source(BoundParams<Scalar>& bp, const ModelConfig& cfg,
                                    std::vector<std::int32_t> source_ids,
                                    const EncoderOutput<Scalar>& enc_x, const TrainContext& ctx,
                                    const std::string& scope_tag) {
  if (source_ids.empty()) throw std::runtime_error("encode_retrieved_source: empty sequence");
  source_ids.push_back(Vocab::kEos);
  Var<Scalar> x = embed_sequence(bp, cfg, source_ids, ctx, scope_tag + "memsrc");
  return detail::retrieved_encoder_stack(bp, cfg, "memsrc", x,
                                         std::optional<Var<Scalar>>(enc_x.states), ctx, scope_tag);
}

/// Encodes one retrieved target Y^i. The conditioning depends on the mode:
/// the encoded X^i (cstm), the current source encoding (ctm), or nothing
/// (tm).
template <class Scalar>
Var<Scalar> encode_retrieved_target(BoundParams<Scalar>& bp, const ModelConfig& cfg,
                                    std::vector<std::int32_t> target_ids,
                                    std::optional<Var<Scalar>> conditioning,
                                    const TrainContext& ctx, const std::string& scope_tag) {
  if (target_ids.empty()) throw std::runtime_error("encode_retrieved_target: empty sequence");
  if (cfg.memory_mode == MemoryMode::kTm) {
    conditioning.reset();  // targets are encoded without any context
  } else if (!conditioning) {
    throw std::runtime_error("encode_retrieved_target: mode requires conditioning input");
  }
  target_ids.push_back(Vocab::kEos);
  Var<Scalar> x = embed_sequence(bp, cfg, target_ids, ctx, scope_tag + "memtgt");
  return detail::retrieved_encoder_stack(bp, cfg, "memtgt", x, conditioning, ctx, scope_tag);
}

/// Builds the decoder-facing memory from the retrieved batch: encode each
/// pair per the configured mode, concatenate the target encodings along
/// the time axis, and layer-norm the result.
template <class Scalar>
MemoryContext<Scalar> build_memory(BoundParams<Scalar>& bp, const ModelConfig& cfg,
                                   const RetrievedBatch& batch, const EncoderOutput<Scalar>& enc_x,
                                   const TrainContext& ctx) {
  MemoryContext<Scalar> memory;
  if (batch.items.empty()) return memory;
  if (cfg.memory_mode == MemoryMode::kNone)
    throw std::runtime_error("build_memory: model configured without memory");

  std::vector<Var<Scalar>> segments;
  segments.reserve(batch.size());
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    const auto& item = batch.items[i];
    std::string scope_tag = "nb" + std::to_string(i) + ".";
    std::optional<Var<Scalar>> conditioning;
    switch (cfg.memory_mode) {
      case MemoryMode::kCstm:
        conditioning = encode_retrieved_source(bp, cfg, item.source_ids, enc_x, ctx, scope_tag);
        break;
      case MemoryMode::kCtm:
        conditioning = enc_x.states;
        break;
      case MemoryMode::kTm:
        break;
      case MemoryMode::kNone:
        break;
    }
    segments.push_back(
        encode_retrieved_target(bp, cfg, item.target_ids, conditioning, ctx, scope_tag));
  }
  Var<Scalar> mem = segments.size() == 1 ? segments[0] : concat(segments, 0);
  mem = apply_layer_norm(bp, "cstm.ln", mem, cfg);
  memory.states = mem;
  memory.pad_mask.assign(static_cast<std::size_t>(mem.rows()), true);
  for (const auto& s : segments) memory.segment_sizes.push_back(s.rows());
  return memory;
}

/// Full conditional forward pass: encode the source, assemble the memory,
/// decode with gated multi-source attention. With an empty batch this is
/// bitwise the baseline decoder.
template <class Scalar>
Var<Scalar> semiparametric_forward(BoundParams<Scalar>& bp, const ModelConfig& cfg,
                                   const std::vector<std::int32_t>& src_ids,
                                   const std::vector<std::int32_t>& tgt_ids,
                                   const RetrievedBatch& batch, const TrainContext& ctx,
                                   std::optional<double> pin_gate = std::nullopt,
                                   std::vector<Mat<Scalar>>* gate_probe = nullptr) {
  EncoderOutput<Scalar> enc = encode(bp, cfg, src_ids, ctx);
  MemoryContext<Scalar> memory = build_memory(bp, cfg, batch, enc, ctx);
  memory.pin_gate = pin_gate;
  memory.gate_probe = gate_probe;
  return decode_train(bp, cfg, tgt_ids, enc, memory, ctx);
}

}  // namespace semimt

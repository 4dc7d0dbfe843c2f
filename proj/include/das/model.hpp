#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "das/featureizer.hpp"
#include "das/graph.hpp"
#include "das/tensor.hpp"

namespace das::model {

using num::BoolMatrix;
using num::Graph;
using num::NodeId;
using num::Shape;
using num::Tensor;

// Which of the nine features feed the encoder (question side) and decoder
// (response side). Shared features (st, p, sp) can be toggled per side.
struct FeatureToggles {
  bool e_id = true, e_cat = true, e_st = true, e_p = true, e_sp = true;
  bool l_r = true, l_et = true, l_st = true, l_iot = true, l_d = true, l_p = true, l_sp = true;
};

struct ModelConfig {
  int num_blocks = 2;
  int d_model = 64;
  int num_heads = 4;
  int d_ff = 256;
  int seq_size = 5;
  float dropout_rate = 0.1f;
  int question_vocab = 0;  // count of known question ids (indices 1..Q)
  int sp_max = data::kDefaultSpMax;
  FeatureToggles features;

  int d_k() const { return d_model / num_heads; }
  void validate() const;

  // Embedding-table layout. Each feature reserves a pad index so padded
  // window slots stay distinguishable from real values.
  int id_rows() const { return question_vocab + 2; }  // 0 = OOV, 1..Q, pad
  int32_t id_pad() const { return question_vocab + 1; }
  static constexpr int kCatRows = 9;  // parts 1..7, pad 8 (0 unused)
  static constexpr int32_t kCatPad = 8;
  static constexpr int kHourRows = 25;  // 0..23, pad 24
  static constexpr int32_t kHourPad = 24;
  static constexpr int kDowRows = 8;  // 0..6, pad 7
  static constexpr int32_t kDowPad = 7;
  int p_rows() const { return seq_size + 1; }  // window positions 1..seq, pad 0
  static constexpr int32_t kPPad = 0;
  int sp_rows() const { return sp_max + 1; }  // session positions 1..sp_max, pad 0
  static constexpr int32_t kSpPad = 0;
  static constexpr int kBinaryRows = 3;  // 0, 1, pad 2
  static constexpr int32_t kBinaryPad = 2;
  static constexpr int kEtRows = data::kEtBuckets + 1;  // buckets 0..301, pad 302
  static constexpr int32_t kEtPad = data::kEtBuckets;
};

template <typename T>
struct AttentionParams {
  Tensor<T> wq, wk, wv, wo;  // [d_model, d_model]
};

template <typename T>
struct NormParams {
  Tensor<T> gamma, beta;  // [d_model]
};

template <typename T>
struct FfnParams {
  Tensor<T> w1, b1, w2, b2;  // [d, d_ff], [d_ff], [d_ff, d], [d]
};

template <typename T>
struct EncoderBlockParams {
  AttentionParams<T> attn;
  NormParams<T> norm1;
  FfnParams<T> ffn;
  NormParams<T> norm2;
};

template <typename T>
struct DecoderBlockParams {
  AttentionParams<T> self;
  NormParams<T> norm1;
  AttentionParams<T> cross;
  NormParams<T> norm2;
  FfnParams<T> ffn;
  NormParams<T> norm3;
};

template <typename T>
struct ModelParams {
  // Embedding tables; shared features st/p/sp get separate question-side
  // (_e) and response-side (_l) tables.
  Tensor<T> emb_id, emb_cat;
  Tensor<T> emb_hour_e, emb_hour_l, emb_dow_e, emb_dow_l;
  Tensor<T> emb_p_e, emb_p_l, emb_sp_e, emb_sp_l;
  Tensor<T> emb_r, emb_et, emb_iot, emb_d;
  Tensor<T> start;  // [1, d_model], learned start token
  std::vector<EncoderBlockParams<T>> encoder;
  std::vector<DecoderBlockParams<T>> decoder;
  Tensor<T> head_w;  // [d_model, 1]
  Tensor<T> head_b;  // [1]

  // Visits every tensor in a fixed order; the order defines checkpoint and
  // optimizer-state layout.
  void for_each(const std::function<void(const std::string&, Tensor<T>&)>& fn);
  void for_each(const std::function<void(const std::string&, const Tensor<T>&)>& fn) const;
};

template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, uint64_t seed);

template <typename T>
ModelParams<T> zero_params(const ModelConfig& cfg);

// Allowed attention pattern for one window: position i may attend j iff
// j <= i and slot j is real. The same rule applies to encoder self-attention,
// decoder self-attention, and decoder-to-encoder attention.
struct MaskSet {
  BoolMatrix enc_self, dec_self, enc_dec;
};

MaskSet build_masks(int64_t n, const std::vector<uint8_t>& real);

// Feature windows flattened to embedding indices, [batch * n] row-major.
struct WindowBatch {
  int64_t batch = 0;
  int64_t n = 0;
  std::vector<int32_t> id, cat, hour, dow, p, sp;  // question+shared features
  std::vector<int32_t> r, et, iot, d;              // response features
  std::vector<uint8_t> real;                       // [batch * n] slot validity
  std::vector<int32_t> first_real;                 // [batch]
  std::vector<float> targets;                      // [batch]
};

WindowBatch make_batch(const std::vector<data::TrainingWindow>& windows, size_t begin, size_t end,
                       const ModelConfig& cfg);

// Same, but gathers windows through `order[begin..end)` so a rebalanced or
// shuffled epoch can be batched without copying the windows themselves.
WindowBatch make_batch_gather(const std::vector<data::TrainingWindow>& windows,
                              const std::vector<size_t>& order, size_t begin, size_t end,
                              const ModelConfig& cfg);

// Additive attention mask per window: 0 where allowed, a large negative
// sentinel elsewhere. Fully padded rows fall back to attending themselves so
// softmax stays finite; their outputs are never consumed.
template <typename T>
Tensor<T> additive_mask(const WindowBatch& batch);

// Graph-side handle to registered parameters, keyed by the for_each names.
struct ParamNodes {
  std::unordered_map<std::string, NodeId> ids;
  NodeId at(const std::string& name) const;
};

template <typename T>
ParamNodes register_params(Graph<T>& g, const ModelParams<T>& params);

struct ForwardNodes {
  NodeId logits = -1;  // [batch, n]
  NodeId probs = -1;   // [batch, n], sigmoid of logits
  NodeId loss = -1;    // scalar, only when targets were supplied
};

// Full network: summed feature embeddings -> encoder stack over e_1..e_n ->
// decoder stack over (S, l_1..l_{n-1}) with cross-attention on the encoder
// output -> per-position linear head. Pass rng=nullptr for inference
// (dropout disabled).
template <typename T>
ForwardNodes das_forward(Graph<T>& g, const ParamNodes& pn, const ModelConfig& cfg,
                         const WindowBatch& batch, T dropout_rate, std::mt19937_64* rng,
                         const std::vector<T>* targets);

// Convenience inference: per-position dropout probabilities for each window,
// shape [windows.size()][seq_size].
std::vector<std::vector<float>> forward_probs(const ModelParams<float>& params, const ModelConfig& cfg,
                                              const std::vector<data::TrainingWindow>& windows);

// Elementwise sum of the active question-side feature embeddings for one
// interaction; p is the window position (1-based). The response-side variant
// uses the separate l-tables for the shared features.
template <typename T>
std::vector<T> embed_question(const ModelParams<T>& params, const ModelConfig& cfg,
                              const data::FeatureFrame& frame, int32_t p);
template <typename T>
std::vector<T> embed_response(const ModelParams<T>& params, const ModelConfig& cfg,
                              const data::FeatureFrame& frame, int32_t p);

}  // namespace das::model

#include "das/model.hpp"

#include <cmath>

#include "das/error.hpp"
#include "das/ops.hpp"
#include "das/optim.hpp"
#include "das/util.hpp"

namespace das::model {

void ModelConfig::validate() const {
  if (num_blocks < 1) raise(ErrorCategory::config, "block count must be at least 1");
  if (d_model < 1 || d_ff < 1) raise(ErrorCategory::config, "model widths must be positive");
  if (num_heads < 1 || d_model % num_heads != 0) {
    raise(ErrorCategory::config,
          strfmt("d_model (%d) must be divisible by the head count (%d)", d_model, num_heads));
  }
  if (seq_size < 2) raise(ErrorCategory::config, "sequence size must be at least 2");
  if (dropout_rate < 0.0f || dropout_rate >= 1.0f) {
    raise(ErrorCategory::config, "dropout rate must be in [0, 1)");
  }
  if (question_vocab < 0) raise(ErrorCategory::config, "question vocab size must be non-negative");
  if (sp_max < 1) raise(ErrorCategory::config, "sp_max must be at least 1");
}

namespace {

// Single traversal used by both for_each overloads; the order here defines
// checkpoint and optimizer-state layout, so it must stay stable.
template <typename P, typename F>
void visit_params(P& p, F&& fn) {
  fn("emb_id", p.emb_id);
  fn("emb_cat", p.emb_cat);
  fn("emb_hour_e", p.emb_hour_e);
  fn("emb_hour_l", p.emb_hour_l);
  fn("emb_dow_e", p.emb_dow_e);
  fn("emb_dow_l", p.emb_dow_l);
  fn("emb_p_e", p.emb_p_e);
  fn("emb_p_l", p.emb_p_l);
  fn("emb_sp_e", p.emb_sp_e);
  fn("emb_sp_l", p.emb_sp_l);
  fn("emb_r", p.emb_r);
  fn("emb_et", p.emb_et);
  fn("emb_iot", p.emb_iot);
  fn("emb_d", p.emb_d);
  fn("start", p.start);
  for (size_t i = 0; i < p.encoder.size(); ++i) {
    const std::string b = "enc" + std::to_string(i);
    auto& e = p.encoder[i];
    fn(b + ".attn.wq", e.attn.wq);
    fn(b + ".attn.wk", e.attn.wk);
    fn(b + ".attn.wv", e.attn.wv);
    fn(b + ".attn.wo", e.attn.wo);
    fn(b + ".norm1.gamma", e.norm1.gamma);
    fn(b + ".norm1.beta", e.norm1.beta);
    fn(b + ".ffn.w1", e.ffn.w1);
    fn(b + ".ffn.b1", e.ffn.b1);
    fn(b + ".ffn.w2", e.ffn.w2);
    fn(b + ".ffn.b2", e.ffn.b2);
    fn(b + ".norm2.gamma", e.norm2.gamma);
    fn(b + ".norm2.beta", e.norm2.beta);
  }
  for (size_t i = 0; i < p.decoder.size(); ++i) {
    const std::string b = "dec" + std::to_string(i);
    auto& d = p.decoder[i];
    fn(b + ".self.wq", d.self.wq);
    fn(b + ".self.wk", d.self.wk);
    fn(b + ".self.wv", d.self.wv);
    fn(b + ".self.wo", d.self.wo);
    fn(b + ".norm1.gamma", d.norm1.gamma);
    fn(b + ".norm1.beta", d.norm1.beta);
    fn(b + ".cross.wq", d.cross.wq);
    fn(b + ".cross.wk", d.cross.wk);
    fn(b + ".cross.wv", d.cross.wv);
    fn(b + ".cross.wo", d.cross.wo);
    fn(b + ".norm2.gamma", d.norm2.gamma);
    fn(b + ".norm2.beta", d.norm2.beta);
    fn(b + ".ffn.w1", d.ffn.w1);
    fn(b + ".ffn.b1", d.ffn.b1);
    fn(b + ".ffn.w2", d.ffn.w2);
    fn(b + ".ffn.b2", d.ffn.b2);
    fn(b + ".norm3.gamma", d.norm3.gamma);
    fn(b + ".norm3.beta", d.norm3.beta);
  }
  fn("head.w", p.head_w);
  fn("head.b", p.head_b);
}

}  // namespace

template <typename T>
void ModelParams<T>::for_each(const std::function<void(const std::string&, Tensor<T>&)>& fn) {
  visit_params(*this, fn);
}

template <typename T>
void ModelParams<T>::for_each(
    const std::function<void(const std::string&, const Tensor<T>&)>& fn) const {
  visit_params(*this, fn);
}

namespace {

template <typename T>
ModelParams<T> shaped_params(const ModelConfig& cfg) {
  const int64_t d = cfg.d_model;
  ModelParams<T> p;
  p.emb_id = Tensor<T>(Shape{cfg.id_rows(), d});
  p.emb_cat = Tensor<T>(Shape{ModelConfig::kCatRows, d});
  p.emb_hour_e = Tensor<T>(Shape{ModelConfig::kHourRows, d});
  p.emb_hour_l = Tensor<T>(Shape{ModelConfig::kHourRows, d});
  p.emb_dow_e = Tensor<T>(Shape{ModelConfig::kDowRows, d});
  p.emb_dow_l = Tensor<T>(Shape{ModelConfig::kDowRows, d});
  p.emb_p_e = Tensor<T>(Shape{cfg.p_rows(), d});
  p.emb_p_l = Tensor<T>(Shape{cfg.p_rows(), d});
  p.emb_sp_e = Tensor<T>(Shape{cfg.sp_rows(), d});
  p.emb_sp_l = Tensor<T>(Shape{cfg.sp_rows(), d});
  p.emb_r = Tensor<T>(Shape{ModelConfig::kBinaryRows, d});
  p.emb_et = Tensor<T>(Shape{ModelConfig::kEtRows, d});
  p.emb_iot = Tensor<T>(Shape{ModelConfig::kBinaryRows, d});
  p.emb_d = Tensor<T>(Shape{ModelConfig::kBinaryRows, d});
  p.start = Tensor<T>(Shape{1, d});
  auto norm = [&] { return NormParams<T>{Tensor<T>(Shape{d}), Tensor<T>(Shape{d})}; };
  auto attn = [&] {
    return AttentionParams<T>{Tensor<T>(Shape{d, d}), Tensor<T>(Shape{d, d}),
                              Tensor<T>(Shape{d, d}), Tensor<T>(Shape{d, d})};
  };
  auto ffn = [&] {
    return FfnParams<T>{Tensor<T>(Shape{d, cfg.d_ff}), Tensor<T>(Shape{cfg.d_ff}),
                        Tensor<T>(Shape{cfg.d_ff, d}), Tensor<T>(Shape{d})};
  };
  for (int i = 0; i < cfg.num_blocks; ++i) {
    p.encoder.push_back({attn(), norm(), ffn(), norm()});
    p.decoder.push_back({attn(), norm(), attn(), norm(), ffn(), norm()});
  }
  p.head_w = Tensor<T>(Shape{d, 1});
  p.head_b = Tensor<T>(Shape{1});
  return p;
}

}  // namespace

template <typename T>
ModelParams<T> zero_params(const ModelConfig& cfg) {
  cfg.validate();
  return shaped_params<T>(cfg);
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  ModelParams<T> p = shaped_params<T>(cfg);
  std::mt19937_64 rng(seed);
  p.for_each([&](const std::string& name, Tensor<T>& t) {
    const bool is_gamma = name.size() > 5 && name.rfind("gamma") == name.size() - 5;
    const bool is_bias = name.rfind(".b") != std::string::npos &&
                         (name.rfind(".b1") == name.size() - 3 ||
                          name.rfind(".b2") == name.size() - 3 ||
                          name.rfind(".beta") == name.size() - 5 ||
                          name == "head.b");
    if (is_gamma) {
      for (int64_t i = 0; i < t.numel(); ++i) t[i] = T(1);
    } else if (is_bias) {
      // zero-initialized biases and layer-norm shifts
    } else if (t.rank() == 2) {
      t = train::xavier_uniform<T>(t.dim(0), t.dim(1), rng);
    } else {
      raise(ErrorCategory::contract, strfmt("unexpected parameter layout for '%s'", name.c_str()));
    }
  });
  return p;
}

NodeId ParamNodes::at(const std::string& name) const {
  auto it = ids.find(name);
  if (it == ids.end()) {
    raise(ErrorCategory::contract, strfmt("unknown parameter '%s'", name.c_str()));
  }
  return it->second;
}

template <typename T>
ParamNodes register_params(Graph<T>& g, const ModelParams<T>& params) {
  ParamNodes pn;
  params.for_each([&](const std::string& name, const Tensor<T>& t) { pn.ids.emplace(name, g.param(t)); });
  return pn;
}

namespace {

void append_window(WindowBatch& b, const data::TrainingWindow& win, const ModelConfig& cfg) {
  const int64_t n = cfg.seq_size;
  if (win.frames.size() != static_cast<size_t>(n)) {
    raise(ErrorCategory::contract,
          strfmt("window length %zu does not match configured sequence size %lld",
                 win.frames.size(), static_cast<long long>(n)));
  }
  if (win.first_real < 0 || win.first_real >= n) {
    raise(ErrorCategory::contract, "window must contain at least one real frame");
  }
  b.first_real.push_back(win.first_real);
  b.targets.push_back(static_cast<float>(win.target_label));
  for (int64_t s = 0; s < n; ++s) {
    const bool real = s >= win.first_real;
    const auto& f = win.frames[static_cast<size_t>(s)];
    if (real && (f.id_index < 0 || f.id_index > cfg.question_vocab)) {
      raise(ErrorCategory::compat,
            strfmt("question index %d is outside the checkpoint vocab (0..%d)", f.id_index,
                   cfg.question_vocab));
    }
    b.real.push_back(real ? 1 : 0);
    b.id.push_back(real ? f.id_index : cfg.id_pad());
    b.cat.push_back(real ? f.category : ModelConfig::kCatPad);
    b.hour.push_back(real ? f.hour : ModelConfig::kHourPad);
    b.dow.push_back(real ? f.dow : ModelConfig::kDowPad);
    b.p.push_back(real ? static_cast<int32_t>(s + 1) : ModelConfig::kPPad);
    b.sp.push_back(real ? std::min(f.sp, cfg.sp_max) : ModelConfig::kSpPad);
    b.r.push_back(real ? f.r : ModelConfig::kBinaryPad);
    b.et.push_back(real ? f.et_bucket : ModelConfig::kEtPad);
    b.iot.push_back(real ? f.iot : ModelConfig::kBinaryPad);
    b.d.push_back(real ? f.d : ModelConfig::kBinaryPad);
  }
}

}  // namespace

WindowBatch make_batch(const std::vector<data::TrainingWindow>& windows, size_t begin, size_t end,
                       const ModelConfig& cfg) {
  cfg.validate();
  if (begin >= end || end > windows.size()) {
    raise(ErrorCategory::contract, "make_batch: bad window range");
  }
  WindowBatch b;
  b.batch = static_cast<int64_t>(end - begin);
  b.n = cfg.seq_size;
  b.id.reserve(static_cast<size_t>(b.batch * b.n));
  for (size_t w = begin; w < end; ++w) append_window(b, windows[w], cfg);
  return b;
}

WindowBatch make_batch_gather(const std::vector<data::TrainingWindow>& windows,
                              const std::vector<size_t>& order, size_t begin, size_t end,
                              const ModelConfig& cfg) {
  cfg.validate();
  if (begin >= end || end > order.size()) {
    raise(ErrorCategory::contract, "make_batch_gather: bad order range");
  }
  WindowBatch b;
  b.batch = static_cast<int64_t>(end - begin);
  b.n = cfg.seq_size;
  b.id.reserve(static_cast<size_t>(b.batch * b.n));
  for (size_t k = begin; k < end; ++k) {
    if (order[k] >= windows.size()) {
      raise(ErrorCategory::contract, "make_batch_gather: index out of range");
    }
    append_window(b, windows[order[k]], cfg);
  }
  return b;
}

template <typename T>
Tensor<T> additive_mask(const WindowBatch& batch) {
  const int64_t B = batch.batch, n = batch.n;
  Tensor<T> m(Shape{B, n, n});
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t i = 0; i < n; ++i) {
      bool any = false;
      for (int64_t j = 0; j < n; ++j) {
        const bool allowed = j <= i && batch.real[static_cast<size_t>(b * n + j)] != 0;
        m[(b * n + i) * n + j] = allowed ? T(0) : static_cast<T>(num::kMaskSentinel);
        any = any || allowed;
      }
      // Rows of pure padding attend themselves so softmax stays defined;
      // nothing downstream reads these positions.
      if (!any) m[(b * n + i) * n + i] = T(0);
    }
  }
  return m;
}

namespace {

template <typename T>
NodeId maybe_dropout(Graph<T>& g, NodeId x, T rate, std::mt19937_64* rng) {
  if (rng == nullptr || rate <= T(0)) return x;
  return g.dropout(x, rate, *rng);
}

template <typename T>
NodeId sum_nodes(Graph<T>& g, const std::vector<NodeId>& parts, int64_t B, int64_t n, int64_t d) {
  if (parts.empty()) return g.constant(Tensor<T>(Shape{B, n, d}));
  NodeId acc = parts[0];
  for (size_t i = 1; i < parts.size(); ++i) acc = g.add(acc, parts[i]);
  return acc;
}

template <typename T>
NodeId attention_sublayer(Graph<T>& g, const ParamNodes& pn, const std::string& prefix,
                          NodeId q_in, NodeId kv_in, const Tensor<T>& mask, const ModelConfig& cfg,
                          T rate, std::mt19937_64* rng) {
  const NodeId q = g.split_heads(g.matmul(q_in, pn.at(prefix + ".wq")), cfg.num_heads);
  const NodeId k = g.split_heads(g.matmul(kv_in, pn.at(prefix + ".wk")), cfg.num_heads);
  const NodeId v = g.split_heads(g.matmul(kv_in, pn.at(prefix + ".wv")), cfg.num_heads);
  const T inv_sqrt_dk = static_cast<T>(1.0 / std::sqrt(static_cast<double>(cfg.d_k())));
  const NodeId scores = g.scale(g.matmul_nt(q, k), inv_sqrt_dk);
  const NodeId weights = g.softmax_rows(scores, mask);
  const NodeId ctx = g.merge_heads(g.matmul(weights, v));
  return maybe_dropout(g, g.matmul(ctx, pn.at(prefix + ".wo")), rate, rng);
}

template <typename T>
NodeId ffn_sublayer(Graph<T>& g, const ParamNodes& pn, const std::string& prefix, NodeId x, T rate,
                    std::mt19937_64* rng) {
  const NodeId hidden = g.relu(g.add(g.matmul(x, pn.at(prefix + ".w1")), pn.at(prefix + ".b1")));
  const NodeId out = g.add(g.matmul(hidden, pn.at(prefix + ".w2")), pn.at(prefix + ".b2"));
  return maybe_dropout(g, out, rate, rng);
}

template <typename T>
NodeId add_norm(Graph<T>& g, const ParamNodes& pn, const std::string& norm, NodeId x,
                NodeId sublayer) {
  return g.layer_norm(g.add(x, sublayer), pn.at(norm + ".gamma"), pn.at(norm + ".beta"),
                      static_cast<T>(1e-5));
}

}  // namespace

template <typename T>
ForwardNodes das_forward(Graph<T>& g, const ParamNodes& pn, const ModelConfig& cfg,
                         const WindowBatch& batch, T dropout_rate, std::mt19937_64* rng,
                         const std::vector<T>* targets) {
  cfg.validate();
  if (batch.n != cfg.seq_size) {
    raise(ErrorCategory::contract,
          strfmt("batch window length %lld does not match configured sequence size %d",
                 static_cast<long long>(batch.n), cfg.seq_size));
  }
  if (batch.batch < 1) raise(ErrorCategory::contract, "empty batch");
  const int64_t B = batch.batch, n = batch.n, d = cfg.d_model;
  const Shape idx_shape{B, n};
  const auto& f = cfg.features;

  auto gather = [&](const char* table, const std::vector<int32_t>& idx) {
    return g.gather_rows(pn.at(table), idx, idx_shape);
  };

  std::vector<NodeId> e_parts;
  if (f.e_id) e_parts.push_back(gather("emb_id", batch.id));
  if (f.e_cat) e_parts.push_back(gather("emb_cat", batch.cat));
  if (f.e_st) {
    e_parts.push_back(gather("emb_hour_e", batch.hour));
    e_parts.push_back(gather("emb_dow_e", batch.dow));
  }
  if (f.e_p) e_parts.push_back(gather("emb_p_e", batch.p));
  if (f.e_sp) e_parts.push_back(gather("emb_sp_e", batch.sp));

  std::vector<NodeId> l_parts;
  if (f.l_r) l_parts.push_back(gather("emb_r", batch.r));
  if (f.l_et) l_parts.push_back(gather("emb_et", batch.et));
  if (f.l_st) {
    l_parts.push_back(gather("emb_hour_l", batch.hour));
    l_parts.push_back(gather("emb_dow_l", batch.dow));
  }
  if (f.l_iot) l_parts.push_back(gather("emb_iot", batch.iot));
  if (f.l_d) l_parts.push_back(gather("emb_d", batch.d));
  if (f.l_p) l_parts.push_back(gather("emb_p_l", batch.p));
  if (f.l_sp) l_parts.push_back(gather("emb_sp_l", batch.sp));

  NodeId enc_x = sum_nodes(g, e_parts, B, n, d);
  NodeId l_sum = sum_nodes(g, l_parts, B, n, d);
  // Decoder input is offset by one: position i holds l_{i-1}, the first real
  // position holds the learned start token. The target's own response never
  // enters the network.
  NodeId dec_x = g.decoder_shift(l_sum, pn.at("start"), batch.first_real);
  enc_x = maybe_dropout(g, enc_x, dropout_rate, rng);
  dec_x = maybe_dropout(g, dec_x, dropout_rate, rng);

  const Tensor<T> mask = additive_mask<T>(batch);

  for (int i = 0; i < cfg.num_blocks; ++i) {
    const std::string b = "enc" + std::to_string(i);
    enc_x = add_norm(g, pn, b + ".norm1", enc_x,
                     attention_sublayer(g, pn, b + ".attn", enc_x, enc_x, mask, cfg, dropout_rate,
                                        rng));
    enc_x = add_norm(g, pn, b + ".norm2", enc_x,
                     ffn_sublayer(g, pn, b + ".ffn", enc_x, dropout_rate, rng));
  }
  const NodeId enc_out = enc_x;

  for (int i = 0; i < cfg.num_blocks; ++i) {
    const std::string b = "dec" + std::to_string(i);
    dec_x = add_norm(g, pn, b + ".norm1", dec_x,
                     attention_sublayer(g, pn, b + ".self", dec_x, dec_x, mask, cfg, dropout_rate,
                                        rng));
    dec_x = add_norm(g, pn, b + ".norm2", dec_x,
                     attention_sublayer(g, pn, b + ".cross", dec_x, enc_out, mask, cfg,
                                        dropout_rate, rng));
    dec_x = add_norm(g, pn, b + ".norm3", dec_x,
                     ffn_sublayer(g, pn, b + ".ffn", dec_x, dropout_rate, rng));
  }

  ForwardNodes out;
  const NodeId per_pos = g.reshape(g.matmul(dec_x, pn.at("head.w")), Shape{B, n});
  out.logits = g.add(per_pos, pn.at("head.b"));
  out.probs = g.sigmoid(out.logits);
  if (targets != nullptr) {
    if (static_cast<int64_t>(targets->size()) != B) {
      raise(ErrorCategory::contract, "target count does not match batch size");
    }
    Tensor<T> t(Shape{B});
    t.data.assign(targets->begin(), targets->end());
    out.loss = g.bce_logits_mean(g.take_last(out.logits), std::move(t));
  }
  return out;
}

std::vector<std::vector<float>> forward_probs(const ModelParams<float>& params, const ModelConfig& cfg,
                                              const std::vector<data::TrainingWindow>& windows) {
  std::vector<std::vector<float>> result;
  result.reserve(windows.size());
  constexpr size_t kChunk = 256;
  for (size_t begin = 0; begin < windows.size(); begin += kChunk) {
    const size_t end = std::min(windows.size(), begin + kChunk);
    WindowBatch batch = make_batch(windows, begin, end, cfg);
    Graph<float> g;
    ParamNodes pn = register_params(g, params);
    ForwardNodes fw = das_forward<float>(g, pn, cfg, batch, 0.0f, nullptr, nullptr);
    const Tensor<float>& probs = g.value(fw.probs);
    for (int64_t b = 0; b < batch.batch; ++b) {
      std::vector<float> row(static_cast<size_t>(batch.n));
      for (int64_t i = 0; i < batch.n; ++i) row[static_cast<size_t>(i)] = probs[b * batch.n + i];
      result.push_back(std::move(row));
    }
  }
  return result;
}

template <typename T>
std::vector<T> embed_question(const ModelParams<T>& params, const ModelConfig& cfg,
                              const data::FeatureFrame& frame, int32_t p) {
  cfg.validate();
  const int64_t d = cfg.d_model;
  std::vector<T> out(static_cast<size_t>(d), T(0));
  auto accumulate = [&](const Tensor<T>& table, int32_t row) {
    if (row < 0 || row >= table.dim(0)) {
      raise(ErrorCategory::contract, strfmt("embedding index %d out of range", row));
    }
    for (int64_t j = 0; j < d; ++j) out[static_cast<size_t>(j)] += table[row * d + j];
  };
  const auto& f = cfg.features;
  if (f.e_id) accumulate(params.emb_id, frame.id_index);
  if (f.e_cat) accumulate(params.emb_cat, frame.category);
  if (f.e_st) {
    accumulate(params.emb_hour_e, frame.hour);
    accumulate(params.emb_dow_e, frame.dow);
  }
  if (f.e_p) accumulate(params.emb_p_e, p);
  if (f.e_sp) accumulate(params.emb_sp_e, std::min(frame.sp, cfg.sp_max));
  return out;
}

template <typename T>
std::vector<T> embed_response(const ModelParams<T>& params, const ModelConfig& cfg,
                              const data::FeatureFrame& frame, int32_t p) {
  cfg.validate();
  const int64_t d = cfg.d_model;
  std::vector<T> out(static_cast<size_t>(d), T(0));
  auto accumulate = [&](const Tensor<T>& table, int32_t row) {
    if (row < 0 || row >= table.dim(0)) {
      raise(ErrorCategory::contract, strfmt("embedding index %d out of range", row));
    }
    for (int64_t j = 0; j < d; ++j) out[static_cast<size_t>(j)] += table[row * d + j];
  };
  const auto& f = cfg.features;
  if (f.l_r) accumulate(params.emb_r, frame.r);
  if (f.l_et) accumulate(params.emb_et, frame.et_bucket);
  if (f.l_st) {
    accumulate(params.emb_hour_l, frame.hour);
    accumulate(params.emb_dow_l, frame.dow);
  }
  if (f.l_iot) accumulate(params.emb_iot, frame.iot);
  if (f.l_d) accumulate(params.emb_d, frame.d);
  if (f.l_p) accumulate(params.emb_p_l, p);
  if (f.l_sp) accumulate(params.emb_sp_l, std::min(frame.sp, cfg.sp_max));
  return out;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<float> init_params<float>(const ModelConfig&, uint64_t);
template ModelParams<double> init_params<double>(const ModelConfig&, uint64_t);
template ModelParams<float> zero_params<float>(const ModelConfig&);
template ModelParams<double> zero_params<double>(const ModelConfig&);
template ParamNodes register_params<float>(Graph<float>&, const ModelParams<float>&);
template ParamNodes register_params<double>(Graph<double>&, const ModelParams<double>&);
template Tensor<float> additive_mask<float>(const WindowBatch&);
template Tensor<double> additive_mask<double>(const WindowBatch&);
template ForwardNodes das_forward<float>(Graph<float>&, const ParamNodes&, const ModelConfig&,
                                         const WindowBatch&, float, std::mt19937_64*,
                                         const std::vector<float>*);
template ForwardNodes das_forward<double>(Graph<double>&, const ParamNodes&, const ModelConfig&,
                                          const WindowBatch&, double, std::mt19937_64*,
                                          const std::vector<double>*);
template std::vector<float> embed_question<float>(const ModelParams<float>&, const ModelConfig&,
                                                  const data::FeatureFrame&, int32_t);
template std::vector<double> embed_question<double>(const ModelParams<double>&, const ModelConfig&,
                                                    const data::FeatureFrame&, int32_t);
template std::vector<float> embed_response<float>(const ModelParams<float>&, const ModelConfig&,
                                                  const data::FeatureFrame&, int32_t);
template std::vector<double> embed_response<double>(const ModelParams<double>&, const ModelConfig&,
                                                    const data::FeatureFrame&, int32_t);

}  // namespace das::model

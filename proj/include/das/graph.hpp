#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "das/ops.hpp"
#include "das/tensor.hpp"

namespace das::num {

using NodeId = int;

enum class Op : uint8_t {
  leaf,
  add,           // in1 same-shape, trailing vector, or single element
  matmul,        // batched; rank-2 rhs broadcast
  matmul_nt,     // A * B^T, equal batch dims
  scale,         // value = in0 * scalar
  relu,
  sigmoid,
  gather_rows,   // table[in0] indexed by `indices` -> [len(indices), d]
  softmax_rows,  // additive mask in aux (constant, no grad)
  layer_norm,    // in0 = x, in1 = gamma, in2 = beta; scalar = eps
  dropout,       // aux = saved 0/scale mask
  decoder_shift, // in0 = l embeddings [B,n,d], in1 = start token [d]
  split_heads,   // [B,n,h*dk] -> [B,h,n,dk]; scalar = h
  merge_heads,   // [B,h,n,dk] -> [B,n,h*dk]
  reshape,
  take_last,     // [B,n] -> [B], last column
  bce_logits_mean,  // in0 = logits [B], aux = targets; scalar output
  sum_all,
};

// Single forward pass recorded as a tape: node k only consumes nodes < k,
// so reverse iteration is a valid backward schedule.
template <typename T>
class Graph {
 public:
  struct Node {
    Op op = Op::leaf;
    NodeId in0 = -1, in1 = -1, in2 = -1;
    Tensor<T> value;
    Tensor<T> aux;                 // op-specific saved data
    std::vector<int32_t> indices;  // gather rows / per-row shift offsets
    T scalar{};
    bool needs_grad = false;
  };

  NodeId leaf(Tensor<T> value) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = n.value.requires_grad;
    return push(std::move(n));
  }

  NodeId param(const Tensor<T>& value) {
    Tensor<T> v = value;
    v.requires_grad = true;
    return leaf(std::move(v));
  }

  NodeId constant(Tensor<T> value) {
    value.requires_grad = false;
    return leaf(std::move(value));
  }

  NodeId add(NodeId a, NodeId b) {
    Node n = make(Op::add, a, b);
    n.value = num::add(val(a), val(b));
    return push(std::move(n));
  }

  NodeId matmul(NodeId a, NodeId b) {
    Node n = make(Op::matmul, a, b);
    n.value = num::matmul(val(a), val(b));
    return push(std::move(n));
  }

  NodeId matmul_nt(NodeId a, NodeId b) {
    Node n = make(Op::matmul_nt, a, b);
    n.value = num::matmul_nt(val(a), val(b));
    return push(std::move(n));
  }

  NodeId scale(NodeId a, T c) {
    Node n = make(Op::scale, a);
    n.scalar = c;
    n.value = num::scale(val(a), c);
    return push(std::move(n));
  }

  NodeId relu(NodeId a) {
    Node n = make(Op::relu, a);
    n.value = num::relu(val(a));
    return push(std::move(n));
  }

  NodeId sigmoid(NodeId a) {
    Node n = make(Op::sigmoid, a);
    n.value = num::sigmoid(val(a));
    return push(std::move(n));
  }

  // Embedding lookup: rows of `table` selected by flat indices; the result
  // shape is `indices_shape + [d]`.
  NodeId gather_rows(NodeId table, const std::vector<int32_t>& indices, Shape indices_shape) {
    const Tensor<T>& tb = val(table);
    if (tb.rank() != 2)
      raise(ErrorCategory::contract, "gather_rows table must be rank 2");
    const int64_t rows = tb.dim(0), d = tb.dim(1);
    if (shape_numel(indices_shape) != static_cast<int64_t>(indices.size()))
      raise(ErrorCategory::contract, "gather_rows index shape mismatch");
    Node n = make(Op::gather_rows, table);
    n.indices = indices;
    indices_shape.push_back(d);
    n.value = Tensor<T>(indices_shape);
    for (size_t i = 0; i < indices.size(); ++i) {
      const int32_t r = indices[i];
      if (r < 0 || r >= rows)
        raise(ErrorCategory::contract,
              strfmt("embedding index %d out of range [0, %lld)", r, (long long)rows));
      const T* src = tb.data.data() + static_cast<int64_t>(r) * d;
      T* dst = n.value.data.data() + static_cast<int64_t>(i) * d;
      for (int64_t j = 0; j < d; ++j) dst[j] = src[j];
    }
    return push(std::move(n));
  }

  NodeId softmax_rows(NodeId scores, Tensor<T> additive_mask) {
    Node n = make(Op::softmax_rows, scores);
    n.value = num::softmax_rows_additive(val(scores), additive_mask);
    n.aux = std::move(additive_mask);
    return push(std::move(n));
  }

  NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta, T eps) {
    const Tensor<T>& xv = val(x);
    const int64_t d = xv.shape.back();
    const int64_t rows = xv.numel() / d;
    Node n = make(Op::layer_norm, x, gamma, beta);
    n.scalar = eps;
    n.value = Tensor<T>(xv.shape);
    // aux holds xhat (numel) followed by inv-std per row
    n.aux = Tensor<T>(Shape{xv.numel() + rows});
    const Tensor<T>& g = val(gamma);
    const Tensor<T>& b = val(beta);
    for (int64_t r = 0; r < rows; ++r) {
      const T* xp = xv.data.data() + r * d;
      T mean = T(0);
      for (int64_t j = 0; j < d; ++j) mean += xp[j];
      mean /= static_cast<T>(d);
      T var = T(0);
      for (int64_t j = 0; j < d; ++j) var += (xp[j] - mean) * (xp[j] - mean);
      var /= static_cast<T>(d);
      const T inv = T(1) / std::sqrt(var + eps);
      n.aux[xv.numel() + r] = inv;
      for (int64_t j = 0; j < d; ++j) {
        const T xh = (xp[j] - mean) * inv;
        n.aux[r * d + j] = xh;
        n.value[r * d + j] = xh * g[j] + b[j];
      }
    }
    return push(std::move(n));
  }

  // Inverted dropout; aux keeps the applied multiplier per element.
  NodeId dropout(NodeId x, T rate, std::mt19937_64& rng) {
    if (rate <= T(0)) return x;
    const Tensor<T>& xv = val(x);
    Node n = make(Op::dropout, x);
    n.aux = Tensor<T>(xv.shape);
    n.value = Tensor<T>(xv.shape);
    const T keep = T(1) - rate;
    const T s = T(1) / keep;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int64_t i = 0; i < xv.numel(); ++i) {
      const T m = uni(rng) < static_cast<double>(keep) ? s : T(0);
      n.aux[i] = m;
      n.value[i] = xv[i] * m;
    }
    return push(std::move(n));
  }

  // Builds the decoder input: for each batch row with first real slot f,
  // out[f] = start token, out[i] = l[i-1] for i > f, zeros before f.
  NodeId decoder_shift(NodeId l, NodeId start, const std::vector<int32_t>& first_real) {
    const Tensor<T>& lv = val(l);
    if (lv.rank() != 3)
      raise(ErrorCategory::contract, "decoder_shift expects [batch, n, d]");
    const int64_t B = lv.dim(0), nlen = lv.dim(1), d = lv.dim(2);
    const Tensor<T>& sv = val(start);
    if (sv.numel() != d)
      raise(ErrorCategory::contract, "decoder_shift start token size mismatch");
    Node n = make(Op::decoder_shift, l, start);
    n.indices.assign(first_real.begin(), first_real.end());
    n.value = Tensor<T>(lv.shape);
    for (int64_t b = 0; b < B; ++b) {
      const int64_t f = first_real[static_cast<size_t>(b)];
      for (int64_t j = 0; j < d; ++j) n.value[(b * nlen + f) * d + j] = sv[j];
      for (int64_t i = f + 1; i < nlen; ++i)
        for (int64_t j = 0; j < d; ++j)
          n.value[(b * nlen + i) * d + j] = lv[(b * nlen + i - 1) * d + j];
    }
    return push(std::move(n));
  }

  NodeId split_heads(NodeId x, int heads) {
    const Tensor<T>& xv = val(x);
    const int64_t B = xv.dim(0), nlen = xv.dim(1), d = xv.dim(2);
    const int64_t dk = d / heads;
    Node n = make(Op::split_heads, x);
    n.scalar = static_cast<T>(heads);
    n.value = Tensor<T>(Shape{B, heads, nlen, dk});
    for (int64_t b = 0; b < B; ++b)
      for (int64_t i = 0; i < nlen; ++i)
        for (int64_t h = 0; h < heads; ++h) {
          const T* src = xv.data.data() + (b * nlen + i) * d + h * dk;
          T* dst = n.value.data.data() + ((b * heads + h) * nlen + i) * dk;
          for (int64_t j = 0; j < dk; ++j) dst[j] = src[j];
        }
    return push(std::move(n));
  }

  NodeId merge_heads(NodeId x) {
    const Tensor<T>& xv = val(x);
    const int64_t B = xv.dim(0), heads = xv.dim(1), nlen = xv.dim(2), dk = xv.dim(3);
    Node n = make(Op::merge_heads, x);
    n.value = Tensor<T>(Shape{B, nlen, heads * dk});
    for (int64_t b = 0; b < B; ++b)
      for (int64_t h = 0; h < heads; ++h)
        for (int64_t i = 0; i < nlen; ++i) {
          const T* src = xv.data.data() + ((b * heads + h) * nlen + i) * dk;
          T* dst = n.value.data.data() + (b * nlen + i) * heads * dk + h * dk;
          for (int64_t j = 0; j < dk; ++j) dst[j] = src[j];
        }
    return push(std::move(n));
  }

  NodeId reshape(NodeId x, Shape new_shape) {
    const Tensor<T>& xv = val(x);
    if (shape_numel(new_shape) != xv.numel())
      raise(ErrorCategory::contract, "reshape element count mismatch");
    Node n = make(Op::reshape, x);
    n.value = Tensor<T>(std::move(new_shape), xv.data);
    return push(std::move(n));
  }

  NodeId take_last(NodeId x) {
    const Tensor<T>& xv = val(x);
    if (xv.rank() != 2) raise(ErrorCategory::contract, "take_last expects [batch, n]");
    const int64_t B = xv.dim(0), nlen = xv.dim(1);
    Node n = make(Op::take_last, x);
    n.value = Tensor<T>(Shape{B});
    for (int64_t b = 0; b < B; ++b) n.value[b] = xv[b * nlen + nlen - 1];
    return push(std::move(n));
  }

  // Numerically stable mean of BCE(sigmoid(logit), target) over the batch.
  NodeId bce_logits_mean(NodeId logits, Tensor<T> targets) {
    const Tensor<T>& z = val(logits);
    if (z.numel() != targets.numel())
      raise(ErrorCategory::contract, "bce target size mismatch");
    Node n = make(Op::bce_logits_mean, logits);
    T total = T(0);
    for (int64_t i = 0; i < z.numel(); ++i) {
      const T zi = z[i], yi = targets[i];
      total += std::max(zi, T(0)) - zi * yi + std::log1p(std::exp(-std::abs(zi)));
    }
    n.aux = std::move(targets);
    n.value = Tensor<T>(Shape{1});
    n.value[0] = total / static_cast<T>(z.numel());
    return push(std::move(n));
  }

  NodeId sum_all(NodeId x) {
    Node n = make(Op::sum_all, x);
    n.value = Tensor<T>(Shape{1});
    T total = T(0);
    for (const T v : val(x).data) total += v;
    n.value[0] = total;
    return push(std::move(n));
  }

  const Tensor<T>& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }

  // Gradient of the last backward() loss w.r.t. this node (zeros if the node
  // did not participate).
  const Tensor<T>& grad(NodeId id) const {
    ensure_grad(id);
    return grads_[static_cast<size_t>(id)];
  }

  size_t size() const { return nodes_.size(); }

  void backward(NodeId loss) {
    const Tensor<T>& lv = value(loss);
    if (lv.numel() != 1)
      raise(ErrorCategory::contract,
            "backward requires a scalar loss, got shape " + shape_str(lv.shape));
    grads_.assign(nodes_.size(), Tensor<T>());
    ensure_grad(loss);
    grads_[static_cast<size_t>(loss)][0] = T(1);

    for (NodeId id = loss; id >= 0; --id) {
      const Node& n = nodes_[static_cast<size_t>(id)];
      if (!n.needs_grad || n.op == Op::leaf) continue;
      if (grads_[static_cast<size_t>(id)].numel() == 0) continue;  // not on the loss path
      backward_node(id, n);
    }
  }

 private:
  std::vector<Node> nodes_;
  mutable std::vector<Tensor<T>> grads_;

  Node make(Op op, NodeId a, NodeId b = -1, NodeId c = -1) {
    Node n;
    n.op = op;
    n.in0 = a;
    n.in1 = b;
    n.in2 = c;
    n.needs_grad = needs(a) || needs(b) || needs(c);
    return n;
  }

  bool needs(NodeId id) const {
    return id >= 0 && nodes_[static_cast<size_t>(id)].needs_grad;
  }

  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  const Tensor<T>& val(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }

  void ensure_grad(NodeId id) const {
    if (grads_.size() != nodes_.size()) grads_.resize(nodes_.size());
    Tensor<T>& g = grads_[static_cast<size_t>(id)];
    if (g.numel() == 0) g = Tensor<T>::zeros(nodes_[static_cast<size_t>(id)].value.shape);
  }

  // Accumulates into the input's grad buffer only when that input needs grad.
  Tensor<T>* grad_sink(NodeId id) {
    if (!needs(id)) return nullptr;
    ensure_grad(id);
    return &grads_[static_cast<size_t>(id)];
  }

  void backward_node(NodeId id, const Node& n) {
    const Tensor<T>& gout = grads_[static_cast<size_t>(id)];
    switch (n.op) {
      case Op::add: {
        if (Tensor<T>* ga = grad_sink(n.in0))
          for (int64_t i = 0; i < gout.numel(); ++i) (*ga)[i] += gout[i];
        if (Tensor<T>* gb = grad_sink(n.in1)) {
          const int64_t bn = gb->numel();
          if (bn == gout.numel()) {
            for (int64_t i = 0; i < gout.numel(); ++i) (*gb)[i] += gout[i];
          } else if (bn == 1) {
            T s = T(0);
            for (int64_t i = 0; i < gout.numel(); ++i) s += gout[i];
            (*gb)[0] += s;
          } else {
            for (int64_t i = 0; i < gout.numel(); ++i) (*gb)[i % bn] += gout[i];
          }
        }
        break;
      }
      case Op::matmul: {
        const Tensor<T>& a = val(n.in0);
        const Tensor<T>& b = val(n.in1);
        const int64_t m = a.shape[a.shape.size() - 2];
        const int64_t k = a.shape.back();
        const int64_t nn = b.shape.back();
        const int64_t batch = a.numel() / (m * k);
        const bool broadcast_b = b.rank() == 2;
        if (Tensor<T>* ga = grad_sink(n.in0)) {
          // dA = dC * B^T
          for (int64_t s = 0; s < batch; ++s) {
            const T* bp = broadcast_b ? b.data.data() : b.data.data() + s * k * nn;
            detail::gemm_nt(gout.data.data() + s * m * nn, bp,
                            ga->data.data() + s * m * k, m, nn, k);
          }
        }
        if (Tensor<T>* gb = grad_sink(n.in1)) {
          // dB = A^T * dC (summed over the batch when B is broadcast)
          for (int64_t s = 0; s < batch; ++s) {
            T* gp = broadcast_b ? gb->data.data() : gb->data.data() + s * k * nn;
            detail::gemm_tn(a.data.data() + s * m * k, gout.data.data() + s * m * nn, gp,
                            m, k, nn);
          }
        }
        break;
      }
      case Op::matmul_nt: {
        // C = A * B^T with A [..,m,k], B [..,n,k]
        const Tensor<T>& a = val(n.in0);
        const Tensor<T>& b = val(n.in1);
        const int64_t m = a.shape[a.shape.size() - 2];
        const int64_t k = a.shape.back();
        const int64_t nn = b.shape[b.shape.size() - 2];
        const int64_t batch = a.numel() / (m * k);
        if (Tensor<T>* ga = grad_sink(n.in0)) {
          // dA = dC * B
          for (int64_t s = 0; s < batch; ++s)
            detail::gemm_nn(gout.data.data() + s * m * nn, b.data.data() + s * nn * k,
                            ga->data.data() + s * m * k, m, nn, k);
        }
        if (Tensor<T>* gb = grad_sink(n.in1)) {
          // dB = dC^T * A
          for (int64_t s = 0; s < batch; ++s)
            detail::gemm_tn(gout.data.data() + s * m * nn, a.data.data() + s * m * k,
                            gb->data.data() + s * nn * k, m, nn, k);
        }
        break;
      }
      case Op::scale: {
        if (Tensor<T>* ga = grad_sink(n.in0))
          for (int64_t i = 0; i < gout.numel(); ++i) (*ga)[i] += gout[i] * n.scalar;
        break;
      }
      case Op::relu: {
        if (Tensor<T>* ga = grad_sink(n.in0))
          for (int64_t i = 0; i < gout.numel(); ++i)
            if (n.value[i] > T(0)) (*ga)[i] += gout[i];
        break;
      }
      case Op::sigmoid: {
        if (Tensor<T>* ga = grad_sink(n.in0))
          for (int64_t i = 0; i < gout.numel(); ++i)
            (*ga)[i] += gout[i] * n.value[i] * (T(1) - n.value[i]);
        break;
      }
      case Op::gather_rows: {
        if (Tensor<T>* gt = grad_sink(n.in0)) {
          const int64_t d = gt->shape.back();
          for (size_t i = 0; i < n.indices.size(); ++i) {
            T* dst = gt->data.data() + static_cast<int64_t>(n.indices[i]) * d;
            const T* src = gout.data.data() + static_cast<int64_t>(i) * d;
            for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
          }
        }
        break;
      }
      case Op::softmax_rows: {
        if (Tensor<T>* ga = grad_sink(n.in0)) {
          const int64_t w = n.value.shape.back();
          const int64_t rows = n.value.numel() / w;
          for (int64_t r = 0; r < rows; ++r) {
            const T* y = n.value.data.data() + r * w;
            const T* gy = gout.data.data() + r * w;
            T* gx = ga->data.data() + r * w;
            T dot = T(0);
            for (int64_t j = 0; j < w; ++j) dot += y[j] * gy[j];
            for (int64_t j = 0; j < w; ++j) gx[j] += y[j] * (gy[j] - dot);
          }
        }
        break;
      }
      case Op::layer_norm: {
        const Tensor<T>& xv = val(n.in0);
        const Tensor<T>& g = val(n.in1);
        const int64_t d = xv.shape.back();
        const int64_t rows = xv.numel() / d;
        Tensor<T>* gx = grad_sink(n.in0);
        Tensor<T>* gg = grad_sink(n.in1);
        Tensor<T>* gb = grad_sink(n.in2);
        for (int64_t r = 0; r < rows; ++r) {
          const T* xh = n.aux.data.data() + r * d;
          const T inv = n.aux[xv.numel() + r];
          const T* gy = gout.data.data() + r * d;
          if (gg)
            for (int64_t j = 0; j < d; ++j) (*gg)[j] += gy[j] * xh[j];
          if (gb)
            for (int64_t j = 0; j < d; ++j) (*gb)[j] += gy[j];
          if (gx) {
            T sum_g = T(0), sum_gx = T(0);
            for (int64_t j = 0; j < d; ++j) {
              const T t = gy[j] * g[j];
              sum_g += t;
              sum_gx += t * xh[j];
            }
            const T inv_d = T(1) / static_cast<T>(d);
            for (int64_t j = 0; j < d; ++j) {
              const T t = gy[j] * g[j];
              (*gx)[r * d + j] += inv * (t - sum_g * inv_d - xh[j] * sum_gx * inv_d);
            }
          }
        }
        break;
      }
      case Op::dropout: {
        if (Tensor<T>* ga = grad_sink(n.in0))
          for (int64_t i = 0; i < gout.numel(); ++i) (*ga)[i] += gout[i] * n.aux[i];
        break;
      }
      case Op::decoder_shift: {
        const Tensor<T>& lv = val(n.in0);
        const int64_t B = lv.dim(0), nlen = lv.dim(1), d = lv.dim(2);
        Tensor<T>* gl = grad_sink(n.in0);
        Tensor<T>* gs = grad_sink(n.in1);
        for (int64_t b = 0; b < B; ++b) {
          const int64_t f = n.indices[static_cast<size_t>(b)];
          if (gs)
            for (int64_t j = 0; j < d; ++j) (*gs)[j] += gout[(b * nlen + f) * d + j];
          if (gl)
            for (int64_t i = f + 1; i < nlen; ++i)
              for (int64_t j = 0; j < d; ++j)
                (*gl)[(b * nlen + i - 1) * d + j] += gout[(b * nlen + i) * d + j];
        }
        break;
      }
      case Op::split_heads: {
        if (Tensor<T>* ga = grad_sink(n.in0)) {
          const int64_t B = n.value.dim(0), heads = n.value.dim(1), nlen = n.value.dim(2),
                        dk = n.value.dim(3);
          const int64_t d = heads * dk;
          for (int64_t b = 0; b < B; ++b)
            for (int64_t h = 0; h < heads; ++h)
              for (int64_t i = 0; i < nlen; ++i) {
                const T* src = gout.data.data() + ((b * heads + h) * nlen + i) * dk;
                T* dst = ga->data.data() + (b * nlen + i) * d + h * dk;
                for (int64_t j = 0; j < dk; ++j) dst[j] += src[j];
              }
        }
        break;
      }
      case Op::merge_heads: {
        if (Tensor<T>* ga = grad_sink(n.in0)) {
          const Tensor<T>& xv = val(n.in0);
          const int64_t B = xv.dim(0), heads = xv.dim(1), nlen = xv.dim(2), dk = xv.dim(3);
          for (int64_t b = 0; b < B; ++b)
            for (int64_t h = 0; h < heads; ++h)
              for (int64_t i = 0; i < nlen; ++i) {
                const T* src = gout.data.data() + (b * nlen + i) * heads * dk + h * dk;
                T* dst = ga->data.data() + ((b * heads + h) * nlen + i) * dk;
                for (int64_t j = 0; j < dk; ++j) dst[j] += src[j];
              }
        }
        break;
      }
      case Op::reshape: {
        if (Tensor<T>* ga = grad_sink(n.in0))
          for (int64_t i = 0; i < gout.numel(); ++i) (*ga)[i] += gout[i];
        break;
      }
      case Op::take_last: {
        if (Tensor<T>* ga = grad_sink(n.in0)) {
          const int64_t nlen = ga->shape.back();
          for (int64_t b = 0; b < gout.numel(); ++b)
            (*ga)[b * nlen + nlen - 1] += gout[b];
        }
        break;
      }
      case Op::bce_logits_mean: {
        if (Tensor<T>* ga = grad_sink(n.in0)) {
          const Tensor<T>& z = val(n.in0);
          const T g0 = gout[0] / static_cast<T>(z.numel());
          const Tensor<T> s = num::sigmoid(z);
          for (int64_t i = 0; i < z.numel(); ++i) (*ga)[i] += g0 * (s[i] - n.aux[i]);
        }
        break;
      }
      case Op::sum_all: {
        if (Tensor<T>* ga = grad_sink(n.in0))
          for (int64_t i = 0; i < ga->numel(); ++i) (*ga)[i] += gout[0];
        break;
      }
      case Op::leaf:
        break;
    }
  }
};

}  // namespace das::num

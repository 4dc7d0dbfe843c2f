#pragma once

#include <cmath>
#include <limits>

#include "das/tensor.hpp"

// Pure forward kernels. Every function here leaves its inputs untouched and
// returns a fresh tensor; the autodiff tape in graph.hpp is built on top of
// these plus the matching backward rules.

namespace das::num {

inline constexpr double kMaskSentinel = -1e9;

namespace detail {

// C[m x n] += A[m x k] * B[k x n], contiguous row-major slices.
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    T* ci = c + i * n;
    for (int64_t t = 0; t < k; ++t) {
      const T av = ai[t];
      if (av == T(0)) continue;
      const T* bt = b + t * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += av * bt[j];
    }
  }
}

// C[m x n] += A[m x k] * B[n x k]^T  (rows of B are dotted with rows of A).
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    T* ci = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      T acc = T(0);
      for (int64_t t = 0; t < k; ++t) acc += ai[t] * bj[t];
      ci[j] += acc;
    }
  }
}

// C[k x n] += A[m x k]^T * B[m x n].
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t t = 0; t < m; ++t) {
    const T* at = a + t * k;
    const T* bt = b + t * n;
    for (int64_t i = 0; i < k; ++i) {
      const T av = at[i];
      if (av == T(0)) continue;
      T* ci = c + i * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += av * bt[j];
    }
  }
}

inline void check_matmul_shapes(const Shape& a, const Shape& b) {
  if (a.size() < 2 || b.size() < 2)
    raise(ErrorCategory::contract, "matmul requires rank >= 2, got " + shape_str(a) +
                                       " and " + shape_str(b));
  if (a[a.size() - 1] != b[b.size() - 2])
    raise(ErrorCategory::contract,
          "matmul dimension mismatch: " + shape_str(a) + " x " + shape_str(b));
  if (b.size() > 2) {
    // batched x batched requires identical leading dims
    if (a.size() != b.size())
      raise(ErrorCategory::contract,
            "matmul batch rank mismatch: " + shape_str(a) + " x " + shape_str(b));
    for (size_t i = 0; i + 2 < a.size(); ++i)
      if (a[i] != b[i])
        raise(ErrorCategory::contract,
              "matmul batch dims differ: " + shape_str(a) + " x " + shape_str(b));
  }
}

}  // namespace detail

// Batched matrix product over the last two axes. A rank-2 right-hand side is
// broadcast across the batch (the weight-matrix case); otherwise leading
// dimensions must match exactly.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_matmul_shapes(a.shape, b.shape);
  const int64_t m = a.shape[a.shape.size() - 2];
  const int64_t k = a.shape[a.shape.size() - 1];
  const int64_t n = b.shape[b.shape.size() - 1];
  const int64_t batch = a.numel() / (m * k);

  Shape out_shape(a.shape.begin(), a.shape.end() - 1);
  out_shape.push_back(n);
  Tensor<T> out(out_shape);

  const bool broadcast_b = b.rank() == 2;
  for (int64_t s = 0; s < batch; ++s) {
    const T* bp = broadcast_b ? b.data.data() : b.data.data() + s * k * n;
    detail::gemm_nn(a.data.data() + s * m * k, bp, out.data.data() + s * m * n, m, k, n);
  }
  return out;
}

// A * B^T over the last two axes with equal batch dims: [..,m,k] x [..,n,k].
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || b.rank() < 2 || a.shape.back() != b.shape.back())
    raise(ErrorCategory::contract,
          "matmul_nt inner dim mismatch: " + shape_str(a.shape) + " x " + shape_str(b.shape));
  const int64_t m = a.shape[a.shape.size() - 2];
  const int64_t k = a.shape.back();
  const int64_t n = b.shape[b.shape.size() - 2];
  const int64_t batch = a.numel() / (m * k);
  if (batch != b.numel() / (n * k))
    raise(ErrorCategory::contract,
          "matmul_nt batch mismatch: " + shape_str(a.shape) + " x " + shape_str(b.shape));

  Shape out_shape(a.shape.begin(), a.shape.end() - 1);
  out_shape.back() = m;
  out_shape.push_back(n);
  Tensor<T> out(out_shape);
  for (int64_t s = 0; s < batch; ++s)
    detail::gemm_nt(a.data.data() + s * m * k, b.data.data() + s * n * k,
                    out.data.data() + s * m * n, m, k, n);
  return out;
}

// Row-wise softmax over allowed entries; disallowed entries get weight
// exactly 0. Rows with no allowed entry are a contract violation.
template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& scores, const BoolMatrix& mask) {
  if (scores.rank() != 2 || scores.dim(0) != mask.rows || scores.dim(1) != mask.cols)
    raise(ErrorCategory::contract,
          "masked_softmax shape mismatch: scores " + shape_str(scores.shape) + " vs mask [" +
              std::to_string(mask.rows) + "x" + std::to_string(mask.cols) + "]");
  const int64_t rows = mask.rows, cols = mask.cols;
  Tensor<T> out(scores.shape);
  for (int64_t i = 0; i < rows; ++i) {
    T mx = std::numeric_limits<T>::lowest();
    bool any = false;
    for (int64_t j = 0; j < cols; ++j)
      if (mask.at(i, j)) {
        any = true;
        mx = std::max(mx, scores.at(i, j));
      }
    if (!any)
      raise(ErrorCategory::contract,
            "masked_softmax: row " + std::to_string(i) + " has no allowed entries");
    T denom = T(0);
    for (int64_t j = 0; j < cols; ++j) {
      if (!mask.at(i, j)) continue;
      const T e = std::exp(scores.at(i, j) - mx);
      out.at(i, j) = e;
      denom += e;
    }
    for (int64_t j = 0; j < cols; ++j)
      if (mask.at(i, j)) out.at(i, j) /= denom;
  }
  return out;
}

// Softmax along the last axis after adding `add_mask`, which holds 0 for
// allowed entries and kMaskSentinel for disallowed ones. add_mask has shape
// [B, n, n] and broadcasts over the head axis of [B, h, n, n] scores.
// exp(sentinel - max) underflows to exactly 0, so disallowed weights are 0.
template <typename T>
Tensor<T> softmax_rows_additive(const Tensor<T>& scores, const Tensor<T>& add_mask) {
  const int64_t n = scores.shape.back();
  const int64_t rows = scores.numel() / n;
  const int64_t mask_rows = add_mask.numel() / n;
  if (add_mask.shape.back() != n || rows % mask_rows != 0)
    raise(ErrorCategory::contract, "softmax mask shape " + shape_str(add_mask.shape) +
                                       " incompatible with scores " + shape_str(scores.shape));
  const int64_t B = scores.rank() >= 3 ? scores.shape[0] : 1;
  const int64_t rows_per_b = rows / B;
  const int64_t mask_rows_per_b = mask_rows / B;

  Tensor<T> out(scores.shape);
  for (int64_t r = 0; r < rows; ++r) {
    const int64_t b = r / rows_per_b;
    const int64_t i = (r % rows_per_b) % mask_rows_per_b;  // row within [n, n] slice
    const T* sp = scores.data.data() + r * n;
    const T* mp = add_mask.data.data() + (b * mask_rows_per_b + i) * n;
    T* op = out.data.data() + r * n;
    T mx = std::numeric_limits<T>::lowest();
    for (int64_t j = 0; j < n; ++j) mx = std::max(mx, sp[j] + mp[j]);
    T denom = T(0);
    for (int64_t j = 0; j < n; ++j) {
      const T e = std::exp(sp[j] + mp[j] - mx);
      op[j] = e;
      denom += e;
    }
    for (int64_t j = 0; j < n; ++j) op[j] /= denom;
  }
  return out;
}

// (x - mean) / sqrt(var + eps) * gamma + beta over the last axis.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps) {
  const int64_t d = x.shape.back();
  if (gamma.numel() != d || beta.numel() != d)
    raise(ErrorCategory::contract, "layer_norm parameter size mismatch: x " +
                                       shape_str(x.shape) + ", gamma " + shape_str(gamma.shape));
  const int64_t rows = x.numel() / d;
  Tensor<T> out(x.shape);
  for (int64_t r = 0; r < rows; ++r) {
    const T* xp = x.data.data() + r * d;
    T* op = out.data.data() + r * d;
    T mean = T(0);
    for (int64_t j = 0; j < d; ++j) mean += xp[j];
    mean /= static_cast<T>(d);
    T var = T(0);
    for (int64_t j = 0; j < d; ++j) var += (xp[j] - mean) * (xp[j] - mean);
    var /= static_cast<T>(d);
    const T inv = T(1) / std::sqrt(var + eps);
    for (int64_t j = 0; j < d; ++j)
      op[j] = (xp[j] - mean) * inv * gamma[j] + beta[j];
  }
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out(x.shape);
  for (int64_t i = 0; i < x.numel(); ++i) {
    const T v = x[i];
    out[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                       : std::exp(v) / (T(1) + std::exp(v));
  }
  return out;
}

// a + b where b is same-shape, a trailing-axis vector (bias), or one element.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out = a;
  if (b.numel() == a.numel()) {
    for (int64_t i = 0; i < a.numel(); ++i) out[i] += b[i];
  } else if (b.numel() == 1) {
    for (int64_t i = 0; i < a.numel(); ++i) out[i] += b[0];
  } else if (b.rank() == 1 && b.numel() == a.shape.back()) {
    const int64_t d = a.shape.back();
    for (int64_t i = 0; i < a.numel(); ++i) out[i] += b[i % d];
  } else {
    raise(ErrorCategory::contract,
          "add broadcast mismatch: " + shape_str(a.shape) + " + " + shape_str(b.shape));
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  Tensor<T> out = a;
  for (auto& v : out.data) v *= c;
  return out;
}

}  // namespace das::num

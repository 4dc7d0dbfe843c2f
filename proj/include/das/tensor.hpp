#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "das/error.hpp"
#include "das/util.hpp"

namespace das::num {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Dense row-major tensor. `requires_grad` marks parameters for the tape in
// graph.hpp; the pure kernels below ignore it.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0))
      : shape(std::move(s)), data(static_cast<size_t>(shape_numel(shape)), fill) {}
  Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (static_cast<int64_t>(data.size()) != shape_numel(shape))
      raise(ErrorCategory::contract,
            "tensor data size " + std::to_string(data.size()) +
                " does not match shape " + shape_str(shape));
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }

  int rank() const { return static_cast<int>(shape.size()); }
  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

  T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  // 2-D accessor (row-major); used by tests and small utilities.
  T& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * shape.back() + c)]; }
  const T& at(int64_t r, int64_t c) const {
    return data[static_cast<size_t>(r * shape.back() + c)];
  }
};

struct BoolMatrix {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<uint8_t> allowed;

  BoolMatrix() = default;
  BoolMatrix(int64_t r, int64_t c, bool fill = false)
      : rows(r), cols(c), allowed(static_cast<size_t>(r * c), fill ? 1 : 0) {}

  bool at(int64_t r, int64_t c) const {
    return allowed[static_cast<size_t>(r * cols + c)] != 0;
  }
  void set(int64_t r, int64_t c, bool v) {
    allowed[static_cast<size_t>(r * cols + c)] = v ? 1 : 0;
  }
};

}  // namespace das::num

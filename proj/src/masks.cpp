#include "das/error.hpp"
#include "das/model.hpp"

namespace das::model {

MaskSet build_masks(int64_t n, const std::vector<uint8_t>& real) {
  if (n < 1) raise(ErrorCategory::contract, "mask length must be at least 1");
  if (real.size() != static_cast<size_t>(n)) {
    raise(ErrorCategory::contract, "pad flags must match the window length");
  }
  BoolMatrix m(n, n);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j <= i; ++j) {
      if (real[static_cast<size_t>(j)]) m.set(i, j, true);
    }
  }
  return MaskSet{m, m, m};
}

}  // namespace das::model

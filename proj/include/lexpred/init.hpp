#pragma once
// Glorot (uniform fan-based) initialization.

#include <cmath>

#include "lexpred/common.hpp"
#include "lexpred/tensor.hpp"

namespace lexpred {

inline std::pair<int64_t, int64_t> glorot_fans(const ad::Shape& shape) {
  if (shape.empty()) return {1, 1};
  if (shape.size() == 1) return {shape[0], 1};
  // non-2-D: fan rule on the flattened trailing dims
  int64_t fan_in = shape[0];
  int64_t fan_out = 1;
  for (size_t i = 1; i < shape.size(); ++i) fan_out *= shape[i];
  return {fan_in, fan_out};
}

template <typename T>
void glorot_fill(ad::Tensor<T>& t, Rng& rng) {
  auto [fan_in, fan_out] = glorot_fans(t.shape());
  double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  for (auto& v : t.values()) v = T(rng.uniform(-limit, limit));
}

template <typename T>
ad::Tensor<T> glorot_init(const ad::Shape& shape, uint64_t seed) {
  auto t = ad::Tensor<T>::param(shape,
                                std::vector<T>(size_t(ad::numel(shape)), T(0)));
  Rng rng(seed);
  glorot_fill(t, rng);
  return t;
}

}  // namespace lexpred

// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Random layers, adversarial inputs and a 64-bit convolution oracle shared by
// the unit tests and the acceptance suite.

#ifndef DETQ_TESTS_FIXTURES_HPP
#define DETQ_TESTS_FIXTURES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "detq/detq.hpp"

namespace detq::fixture {

/// Float layer with weights drawn at a random magnitude, so quantized shifts
/// span the whole [0, 14] range. |W| < 2 keeps every weight representable
/// in 16 bits at the largest shift.
inline ConvLayerF random_float_layer(Rng& rng, int m, int K, int n, MaskType mask) {
  ConvLayerF l{m, K, n, mask, std::vector<double>(static_cast<std::size_t>(m) * K * K * n),
               std::vector<double>(n)};
  const double scale = std::ldexp(1.0, static_cast<int>(rng.uniform_int(-12, 0)));
  for (double& w : l.weights) w = std::clamp(rng.normal(0.0, scale), -1.99, 1.99);
  for (double& b : l.bias) b = rng.coin() ? 0.0 : rng.normal(0.0, 4.0);
  l.apply_mask();
  return l;
}

/// Accumulator at (j, y, x) in 64 bits, no overflow possible.
inline std::int64_t accumulate_i64(const QTensor& x, const QConvLayer& l, int j, int y, int xx) {
  const int K = l.kernel, c = K / 2;
  std::int64_t acc = l.bias[j];
  for (int i = 0; i < l.in_channels; ++i)
    for (int ky = 0; ky < K; ++ky)
      for (int kx = 0; kx < K; ++kx) {
        const int sy = y + ky - c, sx = xx + kx - c;
        if (sy < 0 || sy >= x.values.height() || sx < 0 || sx >= x.values.width()) continue;
        if (!tap_active(l.mask, K, ky, kx)) continue;
        acc += std::int64_t{l.w(i, ky, kx, j)} * x.values.at(i, sy, sx);
      }
  return acc;
}

inline QTensor random_qtensor(Rng& rng, Shape3 s, int p, int bits) {
  const std::int64_t hi = (std::int64_t{1} << (bits - 1)) - 1;
  IntTensor t(s);
  for (auto& v : t.data()) v = static_cast<std::int32_t>(rng.uniform_int(-hi, hi));
  return {std::move(t), p, bits};
}

inline constexpr AccumulationOrder kOrders[] = {AccumulationOrder::sequential,
                                                AccumulationOrder::reversed,
                                                AccumulationOrder::pairwise_tree};

}  // namespace detq::fixture

#endif  // DETQ_TESTS_FIXTURES_HPP

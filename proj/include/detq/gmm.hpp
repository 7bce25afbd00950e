// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DETQ_GMM_HPP
#define DETQ_GMM_HPP

#include <array>
#include <cstdint>
#include <cmath>
#include <vector>

#include "detq/tensor.hpp"

namespace detq {

inline constexpr int kMixtureComponents = 3;
inline constexpr std::int32_t kWeightOne = 1 << 15;  // Q15 mixture-weight total
/// Scales are floored at 2^-kScaleFloorLog2 in real units.
inline constexpr int kScaleFloorLog2 = 4;

/// One latent element's 3-component mixture. Weights are Q15 and sum to
/// 2^15; means and scales are fixed point at `scale_exp`.
struct GmmParams {
  std::array<std::int32_t, kMixtureComponents> weight{};
  std::array<std::int32_t, kMixtureComponents> mean{};
  std::array<std::int32_t, kMixtureComponents> scale{};
  int scale_exp = 10;

  friend bool operator==(const GmmParams&, const GmmParams&) = default;
};

/// Real-valued counterpart produced by the floating-point pipeline.
struct GmmParamsF {
  std::array<double, kMixtureComponents> weight{};
  std::array<double, kMixtureComponents> mean{};
  std::array<double, kMixtureComponents> scale{};
};

/// Per-element parameters over a (C, H, W) latent, indexed like Tensor3.
template <class P>
struct BasicGmmField {
  Shape3 shape;
  std::vector<P> elems;

  explicit BasicGmmField(Shape3 s = {}) : shape(s), elems(s.size()) {}
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * shape.height + y) * shape.width + x;
  }
  P& at(int c, int y, int x) { return elems[index(c, y, x)]; }
  const P& at(int c, int y, int x) const { return elems[index(c, y, x)]; }
};

using GmmField = BasicGmmField<GmmParams>;
using GmmFieldF = BasicGmmField<GmmParamsF>;

/// Canonical little-endian byte image of an integer field, for byte-exact
/// comparisons.
inline std::vector<std::uint8_t> serialize(const GmmField& f) {
  std::vector<std::uint8_t> out;
  out.reserve(f.elems.size() * 40 + 12);
  auto put = [&out](std::int32_t v) {
    const auto u = static_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
  };
  put(f.shape.channels);
  put(f.shape.height);
  put(f.shape.width);
  for (const GmmParams& p : f.elems) {
    for (auto v : p.weight) put(v);
    for (auto v : p.mean) put(v);
    for (auto v : p.scale) put(v);
    put(p.scale_exp);
  }
  return out;
}

inline GmmParamsF to_real(const GmmParams& p) {
  GmmParamsF r;
  const double s = std::ldexp(1.0, -p.scale_exp);
  for (int k = 0; k < kMixtureComponents; ++k) {
    r.weight[k] = p.weight[k] / static_cast<double>(kWeightOne);
    r.mean[k] = p.mean[k] * s;
    r.scale[k] = p.scale[k] * s;
  }
  return r;
}

inline GmmFieldF to_real(const GmmField& f) {
  GmmFieldF r(f.shape);
  for (std::size_t i = 0; i < f.elems.size(); ++i) r.elems[i] = to_real(f.elems[i]);
  return r;
}

}  // namespace detq

#endif  // DETQ_GMM_HPP

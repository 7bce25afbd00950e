// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Integer inference for the entropy subnetworks: clamp, exact 32-bit
// convolution, fused requantization shift, integer LeakyReLU and the
// linearized-softmax GMM head.
//
// Accumulators are checked at every addition when DETQ_CHECKED_ACCUMULATION
// is nonzero (the default unless NDEBUG). Without checks the quantizer's
// static bound is what keeps the sums in range.

#ifndef DETQ_INT_INFER_HPP
#define DETQ_INT_INFER_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "detq/errors.hpp"
#include "detq/gmm.hpp"
#include "detq/quantizer.hpp"
#include "detq/rounding.hpp"
#include "detq/tensor.hpp"

#ifndef DETQ_CHECKED_ACCUMULATION
#ifdef NDEBUG
#define DETQ_CHECKED_ACCUMULATION 0
#else
#define DETQ_CHECKED_ACCUMULATION 1
#endif
#endif

namespace detq {

inline constexpr int kGatherDepth = 7;
/// LeakyReLU negative slope 41/2^12.
inline constexpr std::int64_t kLeakyNumerator = 41;
inline constexpr int kLeakyShift = 12;
inline constexpr int kActivationBits = 16;

/// 32-bit accumulator values, one per output element.
using AccTensor = IntTensor;

inline std::int32_t acc_add(std::int32_t a, std::int32_t b) {
#if DETQ_CHECKED_ACCUMULATION
  std::int32_t r;
  if (__builtin_add_overflow(a, b, &r))
    throw OverflowError("32-bit accumulator overflow: " + std::to_string(a) + " + " +
                        std::to_string(b));
  return r;
#else
  return static_cast<std::int32_t>(static_cast<std::uint32_t>(a) +
                                   static_cast<std::uint32_t>(b));
#endif
}

inline QTensor clamp_input(const QTensor& x, int input_bits) {
  QTensor out{IntTensor(x.shape()), x.scale_exp, std::min(x.bit_depth, input_bits)};
  for (std::size_t i = 0; i < x.values.size(); ++i)
    out.values.data()[i] =
        static_cast<std::int32_t>(clamp_symmetric(x.values.data()[i], input_bits));
  return out;
}

/// A' for one output element: sum over active taps of W_q * x', then + b_q.
inline std::int32_t qconv_accumulate_at(const QTensor& x, const QConvLayer& layer, int j,
                                        int y, int xx, AccumulationOrder order) {
  const int K = layer.kernel, c = K / 2, H = x.values.height(), W = x.values.width();
  std::int32_t acc = 0;
  if (order == AccumulationOrder::sequential) {
    for (int i = 0; i < layer.in_channels; ++i)
      for (int ky = 0; ky < K; ++ky) {
        const int sy = y + ky - c;
        if (sy < 0 || sy >= H) continue;
        for (int kx = 0; kx < K; ++kx) {
          const int sx = xx + kx - c;
          if (sx < 0 || sx >= W || !tap_active(layer.mask, K, ky, kx)) continue;
          acc = acc_add(acc, layer.w(i, ky, kx, j) * x.values.at(i, sy, sx));
        }
      }
  } else {
    thread_local std::vector<std::int32_t> terms;
    terms.clear();
    for (int i = 0; i < layer.in_channels; ++i)
      for (int ky = 0; ky < K; ++ky) {
        const int sy = y + ky - c;
        if (sy < 0 || sy >= H) continue;
        for (int kx = 0; kx < K; ++kx) {
          const int sx = xx + kx - c;
          if (sx < 0 || sx >= W || !tap_active(layer.mask, K, ky, kx)) continue;
          terms.push_back(layer.w(i, ky, kx, j) * x.values.at(i, sy, sx));
        }
      }
    acc = accumulate<std::int32_t>(terms, order, acc_add);
  }
  return acc_add(acc, layer.bias[j]);
}

/// A' = b_q + W_q x'. x' must already be clamped to the layer's N_I.
inline AccTensor qconv_forward(const QTensor& x, const QConvLayer& layer,
                               AccumulationOrder order = AccumulationOrder::sequential) {
  check_conv_input(x.shape(), layer.in_channels, layer.kernel);
  if (x.scale_exp != layer.spec.p_in)
    throw Error("input scale 2^-" + std::to_string(x.scale_exp) +
                " does not match layer p_in " + std::to_string(layer.spec.p_in));
  const std::int64_t hi = (std::int64_t{1} << (layer.spec.input_bits - 1)) - 1;
  for (std::int32_t v : x.values.data())
    if (v > hi || v < -hi)
      throw Error("input value " + std::to_string(v) + " outside " +
                  std::to_string(layer.spec.input_bits) + "-bit clamp range");
  AccTensor out({layer.out_channels, x.values.height(), x.values.width()});
  for (int j = 0; j < layer.out_channels; ++j)
    for (int y = 0; y < out.height(); ++y)
      for (int xx = 0; xx < out.width(); ++xx)
        out.at(j, y, xx) = qconv_accumulate_at(x, layer, j, y, xx, order);
  return out;
}

/// qconv_forward for a causal context layer.
inline AccTensor masked_conv_forward(const QTensor& x, const QConvLayer& layer,
                                     AccumulationOrder order = AccumulationOrder::sequential) {
  if (layer.mask == MaskType::none) throw Error("masked_conv_forward: layer has no mask");
  return qconv_forward(x, layer, order);
}

/// Moves channel j of the accumulator from scale 2^-(k_j + p_in) to 2^-p_next
/// with one rounding shift, then clamps to `out_bits`.
inline QTensor requantize(const AccTensor& acc, const QConvLayer& layer, int p_next,
                          int out_bits = kActivationBits) {
  if (acc.channels() != layer.out_channels)
    throw ShapeError("requantize: accumulator channels do not match layer");
  QTensor out{IntTensor(acc.shape()), p_next, out_bits};
  const std::size_t plane = acc.shape().plane();
  for (int j = 0; j < layer.out_channels; ++j) {
    const int s = layer.spec.weight_shift[j] + layer.spec.p_in - p_next;
    for (std::size_t e = 0; e < plane; ++e) {
      const std::size_t idx = j * plane + e;
      const std::int64_t v = round_shift(acc.data()[idx], s);
      if (s < 0 && (v > std::numeric_limits<std::int32_t>::max() ||
                    v < std::numeric_limits<std::int32_t>::min()))
        throw OverflowError("requantize: left shift by " + std::to_string(-s) +
                            " overflows 32 bits in channel " + std::to_string(j));
      out.values.data()[idx] = static_cast<std::int32_t>(clamp_symmetric(v, out_bits));
    }
  }
  return out;
}

inline std::int32_t leaky_relu_int(std::int32_t v) {
  if (v >= 0) return v;
  return static_cast<std::int32_t>(round_shift(std::int64_t{v} * kLeakyNumerator, kLeakyShift));
}

inline QTensor leaky_relu_int(const QTensor& x) {
  QTensor out = x;
  for (std::int32_t& v : out.values.data()) v = leaky_relu_int(v);
  return out;
}

/// Softmax with exp(z) ~ 1 + z on logits at scale 2^-p, as Q15 weights summing
/// to exactly 2^15. Numerators are floored at one unit. Each weight holds one
/// reserved unit; the other 2^15 - 3 are shared in proportion to the
/// numerators, floors first, leftover units to the largest remainders with
/// the lowest index first on ties. Every weight is therefore >= 1.
inline std::array<std::int32_t, kMixtureComponents> linear_softmax_int(
    const std::array<std::int32_t, kMixtureComponents>& z, int p) {
  std::array<std::int64_t, kMixtureComponents> num{};
  std::int64_t total = 0;
  for (int i = 0; i < kMixtureComponents; ++i) {
    num[i] = std::max<std::int64_t>((std::int64_t{1} << p) + z[i], 1);
    total += num[i];
  }
  constexpr std::int64_t kShared = kWeightOne - kMixtureComponents;
  std::array<std::int32_t, kMixtureComponents> w{};
  std::array<std::int64_t, kMixtureComponents> rem{};
  std::int64_t assigned = 0;
  for (int i = 0; i < kMixtureComponents; ++i) {
    const std::int64_t scaled = num[i] * kShared;
    w[i] = static_cast<std::int32_t>(1 + scaled / total);
    rem[i] = scaled % total;
    assigned += w[i];
  }
  std::array<int, kMixtureComponents> idx{0, 1, 2};
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (std::int64_t u = 0; u < kWeightOne - assigned; ++u) ++w[idx[u]];
  return w;
}

struct HeadConfig {
  int latent_channels = 1;
  int scale_exp = 10;  // fixed-point exponent of emitted means and scales
  int symbol_min = -24;
  int symbol_max = 24;
};

/// Integer hyperdecoder, causal context and 7-layer 1x1 gather.
struct EntropyStack {
  std::vector<QConvLayer> hyper;
  std::vector<QConvLayer> context;
  std::vector<QConvLayer> gather;
  HeadConfig head;

  void validate() const {
    auto chain = [](const std::vector<QConvLayer>& ls, const char* name) {
      if (ls.empty()) throw ShapeError(std::string(name) + " subnetwork is empty");
      for (std::size_t l = 0; l + 1 < ls.size(); ++l) {
        if (ls[l].out_channels != ls[l + 1].in_channels)
          throw ShapeError(std::string(name) + " layer " + std::to_string(l) +
                           " channel count does not feed layer " + std::to_string(l + 1));
        if (ls[l].spec.p_out != ls[l + 1].spec.p_in)
          throw Error(std::string(name) + " layer " + std::to_string(l) +
                      " p_out does not match next p_in");
      }
    };
    chain(hyper, "hyper");
    chain(context, "context");
    chain(gather, "gather");
    if (gather.size() != kGatherDepth)
      throw ShapeError("gather must have exactly 7 layers");
    for (const auto& g : gather)
      if (g.kernel != 1 || g.mask != MaskType::none)
        throw ShapeError("gather layers must be unmasked 1x1 convolutions");
    if (context.front().in_channels != head.latent_channels)
      throw ShapeError("context input channels must equal latent channels");
    if (context.front().mask != MaskType::exclusive)
      throw Error("first context layer must use the exclusive causal mask");
    for (const auto& c : context)
      if (c.mask == MaskType::none) throw Error("context layers must be masked");
    for (const auto& h : hyper)
      if (h.mask != MaskType::none) throw Error("hyper layers must not be masked");
    if (gather.front().in_channels != hyper.back().out_channels + context.back().out_channels)
      throw ShapeError("gather input must be hyper + context channels");
    if (hyper.back().spec.p_out != gather.front().spec.p_in ||
        context.back().spec.p_out != gather.front().spec.p_in)
      throw Error("hyper/context output scale must equal gather input scale");
    if (gather.back().out_channels != 3 * kMixtureComponents * head.latent_channels)
      throw ShapeError("gather output must have 9 channels per latent channel");
    if (gather.back().spec.p_out != head.scale_exp)
      throw Error("last gather layer p_out must equal head scale_exp");
    if (head.scale_exp < kScaleFloorLog2)
      throw Error("head scale_exp too small for the scale floor");
    if (head.symbol_min > head.symbol_max) throw Error("empty symbol range");
  }
};

/// Runs a chain of layers: clamp to N_I, convolve, requantize to p_out,
/// LeakyReLU (skipped after the final layer when `final_activation` is false).
inline QTensor run_chain(QTensor x, std::span<const QConvLayer> layers,
                         AccumulationOrder order, bool final_activation) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const QConvLayer& layer = layers[l];
    const QTensor xc = clamp_input(x, layer.spec.input_bits);
    const AccTensor acc = qconv_forward(xc, layer, order);
    x = requantize(acc, layer, layer.spec.p_out);
    if (l + 1 < layers.size() || final_activation) x = leaky_relu_int(x);
  }
  return x;
}

inline QTensor concat_channels(const QTensor& a, const QTensor& b) {
  if (a.values.height() != b.values.height() || a.values.width() != b.values.width())
    throw ShapeError("concat: spatial shapes differ");
  if (a.scale_exp != b.scale_exp) throw Error("concat: scales differ");
  std::vector<std::int32_t> data(a.values.vec());
  data.insert(data.end(), b.values.vec().begin(), b.values.vec().end());
  return {IntTensor({a.values.channels() + b.values.channels(), a.values.height(),
                     a.values.width()},
                    std::move(data)),
          a.scale_exp, std::max(a.bit_depth, b.bit_depth)};
}

/// Gather output element (y, x) -> mixture parameters for every latent channel.
inline void head_params_at(const QTensor& out, const HeadConfig& head, int y, int x,
                           GmmField& field, int fy, int fx) {
  const int p = head.scale_exp;
  const std::int32_t floor = std::int32_t{1} << (p - kScaleFloorLog2);
  for (int c = 0; c < head.latent_channels; ++c) {
    GmmParams g;
    g.scale_exp = p;
    std::array<std::int32_t, kMixtureComponents> z{};
    for (int k = 0; k < kMixtureComponents; ++k) {
      z[k] = out.values.at(9 * c + k, y, x);
      g.mean[k] = out.values.at(9 * c + 3 + k, y, x);
      g.scale[k] = std::max(out.values.at(9 * c + 6 + k, y, x), floor);
    }
    g.weight = linear_softmax_int(z, p);
    field.at(c, fy, fx) = g;
  }
}

inline GmmField head_params(const QTensor& out, const HeadConfig& head) {
  GmmField field({head.latent_channels, out.values.height(), out.values.width()});
  for (int y = 0; y < out.values.height(); ++y)
    for (int x = 0; x < out.values.width(); ++x) head_params_at(out, head, y, x, field, y, x);
  return field;
}

inline QTensor hyper_forward(const EntropyStack& s, const QTensor& hyper_in,
                             AccumulationOrder order) {
  return run_chain(hyper_in, s.hyper, order, true);
}

inline QTensor context_forward(const EntropyStack& s, const QTensor& latent_in,
                               AccumulationOrder order) {
  return run_chain(latent_in, s.context, order, true);
}

/// Priors for every latent element in one pass. Inputs are already on the
/// first hyper/context layers' input grids.
inline GmmField run_entropy_stack(const QTensor& latent_in, const QTensor& hyper_in,
                                  const EntropyStack& s,
                                  AccumulationOrder order = AccumulationOrder::sequential) {
  s.validate();
  const QTensor h = hyper_forward(s, hyper_in, order);
  const QTensor c = context_forward(s, latent_in, order);
  const QTensor g = run_chain(concat_channels(h, c), s.gather, order, false);
  return head_params(g, s.head);
}

/// Convenience overload from integer symbols.
inline GmmField run_entropy_stack(const IntTensor& latent, const IntTensor& hyper_latent,
                                  const EntropyStack& s,
                                  AccumulationOrder order = AccumulationOrder::sequential) {
  s.validate();
  return run_entropy_stack(quantize_symbols(latent, s.context.front().spec.activation()),
                           quantize_symbols(hyper_latent, s.hyper.front().spec.activation()),
                           s, order);
}

}  // namespace detq

#endif  // DETQ_INT_INFER_HPP

// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Power-of-two post-training quantization of entropy-network layers.
//
// Activations entering a layer are held as x_q = clamp(round(x * 2^p)) with
// N_I-bit symmetric range. Weights of output channel j are held as
// W_q = round(W * 2^k_j) with no clipping, and biases as
// b_q = round(b * 2^(k_j + p)). The shift k_j starts from the closed-form
// bound and is lowered until the rounded channel satisfies both
//
//   sum_i |W_q,ij|  <=  2^(N_A-N_I)
//   sum_i |W_q,ij| * (2^(N_I-1) - 1) + |b_q,j|  <=  2^(N_A-1) - 1,
//
// so no N_A-bit accumulator can overflow for any admissible input.

#ifndef DETQ_QUANTIZER_HPP
#define DETQ_QUANTIZER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "detq/errors.hpp"
#include "detq/rounding.hpp"
#include "detq/tensor.hpp"

namespace detq {

/// Largest per-channel weight shift. Keeps |W| < 2 inside 16-bit storage.
inline constexpr int kMaxWeightShift = 14;
inline constexpr int kAccumulatorBits = 32;
inline constexpr int kWeightBits = 16;

/// Integer activations with a power-of-two scale: real ~= value * 2^-scale_exp.
struct QTensor {
  IntTensor values;
  int scale_exp = 0;
  int bit_depth = 16;

  const Shape3& shape() const { return values.shape(); }
  friend bool operator==(const QTensor&, const QTensor&) = default;
};

/// Activation-side parameters chosen per layer (before weights are seen).
struct ActivationQuant {
  int input_bits = 16;  // N_I
  int p_in = 8;         // input scale s_x = 2^-p_in
  int p_out = 8;        // scale of the next layer's input
  int accumulator_bits = kAccumulatorBits;  // N_A

  void validate() const {
    if (input_bits < 2 || input_bits > 16)
      throw Error("input bit depth must be in [2,16], got " + std::to_string(input_bits));
    if (accumulator_bits != kAccumulatorBits)
      throw Error("only 32-bit accumulators are supported");
    if (p_in < 0 || p_in > 15 || p_out < 0 || p_out > 15)
      throw Error("activation shifts must be in [0,15]");
  }
};

struct LayerQuantSpec {
  int input_bits = 16;
  int p_in = 8;
  int p_out = 8;
  int accumulator_bits = kAccumulatorBits;
  std::vector<int> weight_shift;  // k_j per output channel

  ActivationQuant activation() const {
    return {input_bits, p_in, p_out, accumulator_bits};
  }
  friend bool operator==(const LayerQuantSpec&, const LayerQuantSpec&) = default;
};

struct QConvLayer {
  int in_channels = 0;
  int kernel = 1;
  int out_channels = 0;
  MaskType mask = MaskType::none;
  std::vector<std::int16_t> weights;  // (m, K, K, n)
  std::vector<std::int32_t> bias;     // n
  LayerQuantSpec spec;

  std::size_t weight_index(int i, int ky, int kx, int j) const {
    return ((static_cast<std::size_t>(i) * kernel + ky) * kernel + kx) *
               out_channels + j;
  }
  std::int32_t w(int i, int ky, int kx, int j) const {
    return weights[weight_index(i, ky, kx, j)];
  }

  /// sum_i |W_q,ij| over every active tap of channel j.
  std::int64_t abs_weight_sum(int j) const {
    std::int64_t s = 0;
    for (int i = 0; i < in_channels; ++i)
      for (int ky = 0; ky < kernel; ++ky)
        for (int kx = 0; kx < kernel; ++kx)
          if (tap_active(mask, kernel, ky, kx)) s += std::abs(w(i, ky, kx, j));
    return s;
  }

  /// Worst-case |accumulator| for channel j over all N_I-bit inputs.
  std::int64_t worst_case_accumulator(int j) const {
    const std::int64_t xmax = (std::int64_t{1} << (spec.input_bits - 1)) - 1;
    return abs_weight_sum(j) * xmax + std::abs(std::int64_t{bias[j]});
  }

  friend bool operator==(const QConvLayer&, const QConvLayer&) = default;
};

/// clamp(round(x * 2^p), -(2^(b-1)-1), 2^(b-1)-1).
inline std::int32_t quantize_value(double x, int p, int bits) {
  const std::int64_t hi = (std::int64_t{1} << (bits - 1)) - 1;
  const double r = round_half_away(std::ldexp(x, p));
  if (r >= static_cast<double>(hi)) return static_cast<std::int32_t>(hi);
  if (r <= -static_cast<double>(hi)) return static_cast<std::int32_t>(-hi);
  return static_cast<std::int32_t>(r);
}

inline QTensor quantize_activation_tensor(const FloatTensor& x, const ActivationQuant& q) {
  q.validate();
  IntTensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    out.data()[i] = quantize_value(x.data()[i], q.p_in, q.input_bits);
  return {std::move(out), q.p_in, q.input_bits};
}

/// Integer symbols (latents, hyper-latents) placed on a layer's input grid.
inline QTensor quantize_symbols(const IntTensor& symbols, const ActivationQuant& q) {
  q.validate();
  IntTensor out(symbols.shape());
  for (std::size_t i = 0; i < symbols.size(); ++i)
    out.data()[i] = static_cast<std::int32_t>(clamp_symmetric(
        std::int64_t{symbols.data()[i]} << q.p_in, q.input_bits));
  return {std::move(out), q.p_in, q.input_bits};
}

/// k_j = N_A - N_I - ceil(log2(sum_i |W_ij|)), with the sum taken exactly.
/// Uncapped; an all-zero column yields kMaxWeightShift.
inline int derive_weight_shift(std::span<const double> column, int accumulator_bits,
                               int input_bits) {
  ExactSum s;
  for (double w : column) s.add(std::abs(w));
  if (s.sign() == 0) return kMaxWeightShift;
  return accumulator_bits - input_bits - s.ceil_log2();
}

/// k_j <- min(N_A - 1 - p - max(ceil(log2|b_j|), 0), k_j) - 1 for b_j != 0.
inline int adjust_shift_for_bias(int k, double bias, int p, int accumulator_bits) {
  if (bias == 0.0) return k;
  const int bias_log = std::max(ceil_log2(std::abs(bias)), 0);
  return std::min(accumulator_bits - 1 - p - bias_log, k) - 1;
}

namespace detail {

inline bool quantize_channel(const ConvLayerF& layer, int j, int k, int p_in,
                             QConvLayer& out) {
  bool fits = true;
  for (int i = 0; i < layer.in_channels; ++i)
    for (int ky = 0; ky < layer.kernel; ++ky)
      for (int kx = 0; kx < layer.kernel; ++kx) {
        const std::size_t idx = layer.weight_index(i, ky, kx, j);
        const double q = tap_active(layer.mask, layer.kernel, ky, kx)
                             ? round_half_away(std::ldexp(layer.weights[idx], k))
                             : 0.0;
        if (std::abs(q) > 32767.0) {
          fits = false;
          out.weights[idx] = 0;
        } else {
          out.weights[idx] = static_cast<std::int16_t>(q);
        }
      }
  const double b = round_half_away(std::ldexp(layer.bias[j], k + p_in));
  out.bias[j] = static_cast<std::int32_t>(std::clamp(b, -2147483647.0, 2147483647.0));
  return fits;
}

}  // namespace detail

/// Quantizes one convolution. Per channel: Eq.-16 shift capped at
/// kMaxWeightShift, bias update, then the shift is lowered further while the
/// rounded weights break the channel-sum bound or could overflow the
/// accumulator.
inline QConvLayer quantize_layer(const ConvLayerF& layer, const ActivationQuant& act) {
  layer.validate();
  act.validate();
  QConvLayer q;
  q.in_channels = layer.in_channels;
  q.kernel = layer.kernel;
  q.out_channels = layer.out_channels;
  q.mask = layer.mask;
  q.weights.assign(layer.weights.size(), 0);
  q.bias.assign(layer.out_channels, 0);
  q.spec = {act.input_bits, act.p_in, act.p_out, act.accumulator_bits, {}};
  q.spec.weight_shift.assign(layer.out_channels, 0);

  const std::int64_t acc_max = (std::int64_t{1} << (act.accumulator_bits - 1)) - 1;
  const std::int64_t weight_sum_max = std::int64_t{1}
                                      << (act.accumulator_bits - act.input_bits);
  std::vector<double> column;
  for (int j = 0; j < layer.out_channels; ++j) {
    column.clear();
    for (int i = 0; i < layer.in_channels; ++i)
      for (int ky = 0; ky < layer.kernel; ++ky)
        for (int kx = 0; kx < layer.kernel; ++kx)
          if (tap_active(layer.mask, layer.kernel, ky, kx))
            column.push_back(layer.w(i, ky, kx, j));

    int k = derive_weight_shift(column, act.accumulator_bits, act.input_bits);
    k = std::min(k, kMaxWeightShift);
    k = adjust_shift_for_bias(k, layer.bias[j], act.p_in, act.accumulator_bits);

    const std::string where = "output channel " + std::to_string(j);
    for (;; --k) {
      if (k < 0)
        throw RepresentabilityError(
            where + ": no non-negative weight shift keeps the " +
                std::to_string(act.accumulator_bits) + "-bit accumulator bound",
            j);
      if (!detail::quantize_channel(layer, j, k, act.p_in, q))
        throw RepresentabilityError(
            where + ": weight exceeds 16-bit range at shift " + std::to_string(k) +
                " (weights are never clipped)",
            j);
      q.spec.weight_shift[j] = k;
      if (q.abs_weight_sum(j) <= weight_sum_max && q.worst_case_accumulator(j) <= acc_max)
        break;
    }
  }
  return q;
}

/// Real-valued weights of a quantized layer, W_q * 2^-k_j.
inline ConvLayerF dequantize_layer(const QConvLayer& q) {
  ConvLayerF f;
  f.in_channels = q.in_channels;
  f.kernel = q.kernel;
  f.out_channels = q.out_channels;
  f.mask = q.mask;
  f.weights.resize(q.weights.size());
  f.bias.resize(q.bias.size());
  for (int j = 0; j < q.out_channels; ++j) {
    const int k = q.spec.weight_shift[j];
    for (int i = 0; i < q.in_channels; ++i)
      for (int ky = 0; ky < q.kernel; ++ky)
        for (int kx = 0; kx < q.kernel; ++kx) {
          const std::size_t idx = q.weight_index(i, ky, kx, j);
          f.weights[idx] = std::ldexp(static_cast<double>(q.weights[idx]), -k);
        }
    f.bias[j] = std::ldexp(static_cast<double>(q.bias[j]), -(k + q.spec.p_in));
  }
  return f;
}

}  // namespace detq

#endif  // DETQ_QUANTIZER_HPP

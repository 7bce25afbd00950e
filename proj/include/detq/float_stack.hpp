// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Floating-point entropy stack: the unquantized model, its activation plan
// (N_I and p per layer), the reference forward pass and the quantized stack
// derived from it.

#ifndef DETQ_FLOAT_STACK_HPP
#define DETQ_FLOAT_STACK_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "detq/entropy_model.hpp"
#include "detq/gmm.hpp"
#include "detq/int_infer.hpp"
#include "detq/quantizer.hpp"
#include "detq/random.hpp"
#include "detq/tensor.hpp"

namespace detq {

inline constexpr double kLeakySlope = static_cast<double>(kLeakyNumerator) / (1 << kLeakyShift);

struct FloatLayer {
  ConvLayerF conv;
  int input_bits = 16;  // N_I
  int p_in = 8;
};

enum class Subnet { hyper, context, gather };

inline const char* to_string(Subnet s) {
  switch (s) {
    case Subnet::hyper: return "hyper";
    case Subnet::context: return "context";
    case Subnet::gather: return "gather";
  }
  return "?";
}

struct LayerRef {
  Subnet subnet;
  int index;
  std::string name() const { return std::string(to_string(subnet)) + "." + std::to_string(index); }
};

struct FloatEntropyStack {
  std::vector<FloatLayer> hyper;
  std::vector<FloatLayer> context;
  std::vector<FloatLayer> gather;
  HeadConfig head;

  std::vector<FloatLayer>& subnet(Subnet s) {
    return s == Subnet::hyper ? hyper : (s == Subnet::context ? context : gather);
  }
  const std::vector<FloatLayer>& subnet(Subnet s) const {
    return s == Subnet::hyper ? hyper : (s == Subnet::context ? context : gather);
  }
  FloatLayer& layer(LayerRef r) { return subnet(r.subnet)[r.index]; }
  const FloatLayer& layer(LayerRef r) const { return subnet(r.subnet)[r.index]; }

  /// Topological order: hyper, context, gather.
  std::vector<LayerRef> layer_refs() const {
    std::vector<LayerRef> refs;
    for (Subnet s : {Subnet::hyper, Subnet::context, Subnet::gather})
      for (int i = 0; i < static_cast<int>(subnet(s).size()); ++i) refs.push_back({s, i});
    return refs;
  }

  /// Scale of the tensor this layer writes.
  int p_out(LayerRef r) const {
    const auto& net = subnet(r.subnet);
    if (r.index + 1 < static_cast<int>(net.size())) return net[r.index + 1].p_in;
    return r.subnet == Subnet::gather ? head.scale_exp : gather.front().p_in;
  }
};

inline EntropyStack quantize_stack(const FloatEntropyStack& f) {
  EntropyStack q;
  q.head = f.head;
  for (const LayerRef& r : f.layer_refs()) {
    const FloatLayer& l = f.layer(r);
    QConvLayer ql;
    try {
      ql = quantize_layer(l.conv, {l.input_bits, l.p_in, f.p_out(r), kAccumulatorBits});
    } catch (const RepresentabilityError& e) {
      throw RepresentabilityError("layer " + r.name() + ": " + e.what(), e.channel());
    }
    switch (r.subnet) {
      case Subnet::hyper: q.hyper.push_back(std::move(ql)); break;
      case Subnet::context: q.context.push_back(std::move(ql)); break;
      case Subnet::gather: q.gather.push_back(std::move(ql)); break;
    }
  }
  q.validate();
  return q;
}

/// Float stack carrying the dequantized weights of `q` and its plan.
inline FloatEntropyStack dequantize_stack(const EntropyStack& q) {
  FloatEntropyStack f;
  f.head = q.head;
  auto conv = [](const std::vector<QConvLayer>& src, std::vector<FloatLayer>& dst) {
    for (const auto& l : src) dst.push_back({dequantize_layer(l), l.spec.input_bits, l.spec.p_in});
  };
  conv(q.hyper, f.hyper);
  conv(q.context, f.context);
  conv(q.gather, f.gather);
  return f;
}

template <class Acc>
Acc leaky_relu_float(Acc v) {
  return v >= Acc(0) ? v : v * static_cast<Acc>(kLeakySlope);
}

template <class Acc>
FloatTensor float_chain(FloatTensor x, std::span<const FloatLayer> layers,
                        AccumulationOrder order, bool final_activation) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    x = conv2d_float_ordered<Acc>(x, layers[l].conv, order);
    if (l + 1 < layers.size() || final_activation)
      for (double& v : x.data()) v = static_cast<double>(leaky_relu_float(static_cast<Acc>(v)));
  }
  return x;
}

inline FloatTensor to_float(const IntTensor& t) {
  FloatTensor f(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) f.data()[i] = t.data()[i];
  return f;
}

inline FloatTensor concat_channels(const FloatTensor& a, const FloatTensor& b) {
  std::vector<double> data(a.vec());
  data.insert(data.end(), b.vec().begin(), b.vec().end());
  return FloatTensor({a.channels() + b.channels(), a.height(), a.width()}, std::move(data));
}

/// (C, 1, 1) column of `t` at (y, x).
template <class T>
Tensor3<T> column_at(const Tensor3<T>& t, int y, int x) {
  Tensor3<T> out({t.channels(), 1, 1});
  for (int c = 0; c < t.channels(); ++c) out.at(c, 0, 0) = t.at(c, y, x);
  return out;
}

/// Linearized softmax, scale floor and layout [w | mu | sigma] per channel.
template <class Acc>
GmmParamsF float_head_at(const FloatTensor& out, const HeadConfig& head, int c, int y, int x) {
  GmmParamsF g;
  const Acc unit = static_cast<Acc>(std::ldexp(1.0, -head.scale_exp));
  const Acc sigma_floor = static_cast<Acc>(std::ldexp(1.0, -kScaleFloorLog2));
  Acc n[kMixtureComponents];
  Acc total = 0;
  for (int k = 0; k < kMixtureComponents; ++k) {
    n[k] = std::max(Acc(1) + static_cast<Acc>(out.at(9 * c + k, y, x)), unit);
    total += n[k];
  }
  for (int k = 0; k < kMixtureComponents; ++k) {
    g.weight[k] = static_cast<double>(n[k] / total);
    g.mean[k] = static_cast<double>(static_cast<Acc>(out.at(9 * c + 3 + k, y, x)));
    g.scale[k] =
        static_cast<double>(std::max(static_cast<Acc>(out.at(9 * c + 6 + k, y, x)), sigma_floor));
  }
  return g;
}

template <class Acc>
GmmFieldF float_head(const FloatTensor& out, const HeadConfig& head) {
  GmmFieldF f({head.latent_channels, out.height(), out.width()});
  for (int c = 0; c < head.latent_channels; ++c)
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x) f.at(c, y, x) = float_head_at<Acc>(out, head, c, y, x);
  return f;
}

/// Floating-point priors with products and sums in `Acc` (float emulates a
/// 32-bit device, double is the reference).
template <class Acc>
GmmFieldF run_float_stack(const FloatEntropyStack& s, const IntTensor& latent,
                          const IntTensor& hyper_latent,
                          AccumulationOrder order = AccumulationOrder::sequential) {
  const FloatTensor h = float_chain<Acc>(to_float(hyper_latent), s.hyper, order, true);
  const FloatTensor c = float_chain<Acc>(to_float(latent), s.context, order, true);
  const FloatTensor g = float_chain<Acc>(concat_channels(h, c), s.gather, order, false);
  return float_head<Acc>(g, s.head);
}

// ---------------------------------------------------------------------------
// Random stacks and synthetic data.

struct Topology {
  int latent_channels = 2;
  int hyper_channels = 2;
  int hyper_width = 8;
  int context_width = 8;
  int gather_width = 12;
  std::vector<int> hyper_kernels{3, 3, 3};
  std::vector<int> context_kernels{5, 3};
  int height = 6;
  int width = 6;
  int symbol_min = -24;
  int symbol_max = 24;
  int head_scale_exp = 10;
};

inline ConvLayerF random_conv(Rng& rng, int m, int K, int n, MaskType mask, double gain,
                              double bias_std) {
  ConvLayerF l{m, K, n, mask, std::vector<double>(static_cast<std::size_t>(m) * K * K * n),
               std::vector<double>(n)};
  int active = 0;
  for (int ky = 0; ky < K; ++ky)
    for (int kx = 0; kx < K; ++kx) active += tap_active(mask, K, ky, kx);
  const double stddev = gain / std::sqrt(static_cast<double>(m * active));
  for (double& w : l.weights) w = rng.normal(0.0, stddev);
  for (double& b : l.bias) b = rng.normal(0.0, bias_std);
  l.apply_mask();
  return l;
}

/// Activation plan mirroring the published configuration: p = 8 for hyper,
/// context and gather layers 1-2, p = 10 for gather layers 3-7; N_I = 9 for
/// context, 16 elsewhere.
inline void apply_default_plan(FloatEntropyStack& s) {
  for (auto& l : s.hyper) l.input_bits = 16, l.p_in = 8;
  for (auto& l : s.context) l.input_bits = 9, l.p_in = 8;
  for (std::size_t i = 0; i < s.gather.size(); ++i)
    s.gather[i].input_bits = 16, s.gather[i].p_in = i < 2 ? 8 : 10;
}

inline FloatEntropyStack make_random_float_stack(const Topology& t, Rng& rng) {
  FloatEntropyStack s;
  s.head = {t.latent_channels, t.head_scale_exp, t.symbol_min, t.symbol_max};
  int in = t.hyper_channels;
  for (int K : t.hyper_kernels) {
    s.hyper.push_back({random_conv(rng, in, K, t.hyper_width, MaskType::none, 1.0, 0.05)});
    in = t.hyper_width;
  }
  in = t.latent_channels;
  for (std::size_t i = 0; i < t.context_kernels.size(); ++i) {
    const MaskType mask = i == 0 ? MaskType::exclusive : MaskType::inclusive;
    // Latent symbols are O(1..10); keep the first context layer's response small.
    const double gain = i == 0 ? 0.25 : 1.0;
    s.context.push_back(
        {random_conv(rng, in, t.context_kernels[i], t.context_width, mask, gain, 0.05)});
    in = t.context_width;
  }
  in = t.hyper_width + t.context_width;
  for (int i = 0; i < kGatherDepth - 1; ++i) {
    s.gather.push_back({random_conv(rng, in, 1, t.gather_width, MaskType::none, 1.0, 0.05)});
    in = t.gather_width;
  }
  ConvLayerF head = random_conv(rng, in, 1, 9 * t.latent_channels, MaskType::none, 0.3, 0.0);
  for (int c = 0; c < t.latent_channels; ++c)
    for (int k = 0; k < kMixtureComponents; ++k) {
      head.bias[9 * c + k] = rng.normal(0.0, 0.3);
      head.bias[9 * c + 3 + k] = rng.uniform(-3.0, 3.0);
      head.bias[9 * c + 6 + k] = rng.uniform(0.6, 2.5);
    }
  s.gather.push_back({std::move(head)});
  apply_default_plan(s);
  return s;
}

inline IntTensor random_hyper_latent(const Topology& t, Rng& rng) {
  IntTensor z({t.hyper_channels, t.height, t.width});
  for (auto& v : z.data())
    v = static_cast<std::int32_t>(std::clamp(std::round(rng.normal(0.0, 1.5)), -8.0, 8.0));
  return z;
}

}  // namespace detq

#endif  // DETQ_FLOAT_STACK_HPP

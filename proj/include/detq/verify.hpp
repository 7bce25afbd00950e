// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Audits of a quantized stack: worst-case accumulators under sign-matched
// extreme inputs, and byte equality of priors across accumulation orders.

#ifndef DETQ_VERIFY_HPP
#define DETQ_VERIFY_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "detq/gmm.hpp"
#include "detq/int_infer.hpp"
#include "detq/interop.hpp"
#include "detq/random.hpp"

namespace detq {

/// K x K input that drives output channel j at the patch center to its
/// largest magnitude: every tap at +-(2^(N_I-1)-1), sign matched to the
/// weight and to the bias.
inline QTensor adversarial_input(const QConvLayer& l, int j) {
  const std::int32_t xmax = (std::int32_t{1} << (l.spec.input_bits - 1)) - 1;
  const std::int32_t s = l.bias[j] < 0 ? -1 : 1;
  IntTensor x({l.in_channels, l.kernel, l.kernel});
  for (int i = 0; i < l.in_channels; ++i)
    for (int ky = 0; ky < l.kernel; ++ky)
      for (int kx = 0; kx < l.kernel; ++kx)
        x.at(i, ky, kx) = s * (l.w(i, ky, kx, j) < 0 ? -xmax : xmax);
  return {std::move(x), l.spec.p_in, l.spec.input_bits};
}

/// Accumulator of channel j at the center of a K x K patch, summed in 64
/// bits in sequential order, with the largest partial sum seen.
struct WideAccumulation {
  std::int64_t value = 0;
  std::int64_t peak = 0;  // largest |partial sum|
};

inline WideAccumulation accumulate_center_wide(const QTensor& x, const QConvLayer& l, int j) {
  const int K = l.kernel;
  WideAccumulation r;
  auto add = [&r](std::int64_t t) {
    r.value += t;
    r.peak = std::max(r.peak, r.value < 0 ? -r.value : r.value);
  };
  for (int i = 0; i < l.in_channels; ++i)
    for (int ky = 0; ky < K; ++ky)
      for (int kx = 0; kx < K; ++kx)
        if (tap_active(l.mask, K, ky, kx))
          add(std::int64_t{l.w(i, ky, kx, j)} * x.values.at(i, ky, kx));
  add(l.bias[j]);
  return r;
}

struct OverflowViolation {
  std::string layer;
  int channel = 0;
  std::int64_t peak = 0;
};

struct OverflowAudit {
  std::size_t channels_checked = 0;
  std::int64_t largest_peak = 0;
  std::vector<OverflowViolation> violations;
};

inline void audit_layer(const QConvLayer& l, const std::string& name, OverflowAudit& a) {
  constexpr std::int64_t limit = std::numeric_limits<std::int32_t>::max();
  for (int j = 0; j < l.out_channels; ++j) {
    const WideAccumulation w = accumulate_center_wide(adversarial_input(l, j), l, j);
    ++a.channels_checked;
    a.largest_peak = std::max(a.largest_peak, w.peak);
    if (w.peak > limit) a.violations.push_back({name, j, w.peak});
  }
}

inline OverflowAudit audit_overflow(const EntropyStack& s) {
  OverflowAudit a;
  auto net = [&a](const std::vector<QConvLayer>& ls, const char* name) {
    for (std::size_t i = 0; i < ls.size(); ++i)
      audit_layer(ls[i], std::string(name) + "." + std::to_string(i), a);
  };
  net(s.hyper, "hyper");
  net(s.context, "context");
  net(s.gather, "gather");
  return a;
}

/// Random symbols for the stack: latent uniform over the symbol range,
/// hyper-latent uniform in [-8, 8].
inline LatentSample random_symbols(const EntropyStack& s, int height, int width, Rng& rng) {
  LatentSample out{IntTensor({s.head.latent_channels, height, width}),
                   IntTensor({s.hyper.front().in_channels, height, width})};
  for (auto& v : out.latent.data())
    v = static_cast<std::int32_t>(rng.uniform_int(s.head.symbol_min, s.head.symbol_max));
  for (auto& v : out.hyper.data()) v = static_cast<std::int32_t>(rng.uniform_int(-8, 8));
  return out;
}

/// Bytes of integer priors that differ from the sequential-order priors,
/// summed over the reversed and pairwise-tree orders.
inline std::size_t order_mismatch_bytes(const EntropyStack& s, const LatentSample& in) {
  const std::vector<std::uint8_t> ref =
      serialize(run_entropy_stack(in.latent, in.hyper, s, AccumulationOrder::sequential));
  std::size_t bad = 0;
  for (AccumulationOrder o : {AccumulationOrder::reversed, AccumulationOrder::pairwise_tree}) {
    const std::vector<std::uint8_t> b = serialize(run_entropy_stack(in.latent, in.hyper, s, o));
    if (b.size() != ref.size()) return bad + std::max(b.size(), ref.size());
    for (std::size_t i = 0; i < b.size(); ++i) bad += b[i] != ref[i];
  }
  return bad;
}

struct VerifyReport {
  OverflowAudit overflow;
  std::size_t order_samples = 0;
  std::size_t order_mismatch_bytes = 0;

  bool passed() const { return overflow.violations.empty() && order_mismatch_bytes == 0; }

  std::string to_text() const {
    std::ostringstream os;
    os << "overflow_channels=" << overflow.channels_checked << "\n"
       << "overflow_largest_peak=" << overflow.largest_peak << "\n"
       << "overflow_violations=" << overflow.violations.size() << "\n";
    for (const auto& v : overflow.violations)
      os << "violation layer=" << v.layer << " channel=" << v.channel << " peak=" << v.peak << "\n";
    os << "order_samples=" << order_samples << "\n"
       << "order_mismatch_bytes=" << order_mismatch_bytes << "\n"
       << "result=" << (passed() ? "pass" : "fail") << "\n";
    return os.str();
  }
};

inline VerifyReport verify_stack(const EntropyStack& s, std::uint64_t seed, int samples,
                                 int height, int width) {
  s.validate();
  VerifyReport r;
  r.overflow = audit_overflow(s);
  Rng rng(seed);
  for (int n = 0; n < samples; ++n) {
    r.order_mismatch_bytes += order_mismatch_bytes(s, random_symbols(s, height, width, rng));
    ++r.order_samples;
  }
  return r;
}

}  // namespace detq

#endif  // DETQ_VERIFY_HPP

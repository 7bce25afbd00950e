// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Every input is drawn from a fixed seed.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "detq/detq.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace {

using namespace detq;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// 1. Worst-case accumulators of random layers stay inside int32.
Outcome overflow_freedom() {
  const auto t0 = Clock::now();
  Rng rng(1001);
  constexpr int kLayers = 1000;
  constexpr std::int64_t limit = std::numeric_limits<std::int32_t>::max();
  std::size_t channels = 0, violations = 0, unrepresentable = 0;
  std::int64_t peak = 0;
  for (int n = 0; n < kLayers; ++n) {
    const int m = static_cast<int>(rng.uniform_int(1, 256));
    const int K = std::array{1, 3, 5}[rng.uniform_int(0, 2)];
    const int ni = rng.coin() ? 9 : 16;
    const int outs = static_cast<int>(rng.uniform_int(1, 8));
    const int p_in = static_cast<int>(rng.uniform_int(0, 12));
    const ConvLayerF f = fixture::random_float_layer(rng, m, K, outs, MaskType::none);
    QConvLayer q;
    try {
      q = quantize_layer(f, {ni, p_in, p_in, 32});
    } catch (const RepresentabilityError&) {
      ++unrepresentable;
      continue;
    }
    for (int j = 0; j < outs; ++j) {
      const QTensor x = adversarial_input(q, j);
      const WideAccumulation w = accumulate_center_wide(x, q, j);
      peak = std::max(peak, w.peak);
      ++channels;
      bool bad = w.peak > limit;
      // The 32-bit path (checked at every addition) must agree in every order.
      for (AccumulationOrder o : kAllOrders) {
        try {
          bad |= qconv_accumulate_at(x, q, j, K / 2, K / 2, o) != w.value;
        } catch (const OverflowError&) {
          bad = true;
        }
      }
      violations += bad;
    }
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && unrepresentable == 0 && secs < 60.0,
          fmt("%d layers, %zu channels, %zu violations, %zu unrepresentable, peak |A| %lld, %.1f s",
              kLayers, channels, violations, unrepresentable, static_cast<long long>(peak), secs)};
}

// 2. Integer priors are byte-identical across accumulation orders.
Outcome order_invariance() {
  constexpr int kStacks = 100;
  std::size_t mismatched = 0, bytes = 0;
  for (int s = 0; s < kStacks; ++s) {
    Rng rng(2000 + s);
    const Topology t;
    const StackPair stacks = StackPair::from_float(make_random_float_stack(t, rng));
    const LatentSample in = make_sample(stacks.float_stack, t, rng);
    bytes += serialize(run_entropy_stack(in.latent, in.hyper, stacks.int_stack)).size();
    mismatched += order_mismatch_bytes(stacks.int_stack, in);
  }
  return {mismatched == 0,
          fmt("%d stacks, %zu prior bytes per order, %zu mismatching bytes", kStacks, bytes,
              mismatched)};
}

// 3. Integer priors decode exactly for every encoder/decoder order pair.
Outcome roundtrip_exactness() {
  constexpr int kStacks = 20, kLatents = 5;
  std::size_t runs = 0, errors = 0, symbols = 0;
  for (int s = 0; s < kStacks; ++s) {
    Rng rng(3000 + s);
    const Topology t;
    const StackPair stacks = StackPair::from_float(make_random_float_stack(t, rng));
    for (int n = 0; n < kLatents; ++n) {
      const LatentSample in = make_sample(stacks.float_stack, t, rng);
      for (AccumulationOrder enc : kAllOrders)
        for (AccumulationOrder dec : kAllOrders) {
          const InteropReport r = roundtrip_experiment(stacks, in, enc, dec, PriorMode::integer);
          ++runs;
          errors += !r.decoded_equal;
          symbols += r.symbols;
        }
    }
  }
  return {errors == 0, fmt("%d latents x 9 order pairs, %zu roundtrips, %zu symbols, %zu errors",
                           kStacks * kLatents, runs, symbols, errors)};
}

// 4. A one-ulp prior difference breaks float decoding but not integer decoding.
Outcome failure_reproduction() {
  const InteropReport f1 = boundary_failure_demo(PriorMode::floating);
  const InteropReport f2 = boundary_failure_demo(PriorMode::floating);
  const InteropReport i1 = boundary_failure_demo(PriorMode::integer);
  const InteropReport i2 = boundary_failure_demo(PriorMode::integer);
  const bool deterministic = f1.to_text() == f2.to_text() && i1.to_text() == i2.to_text();
  const std::string mismatch =
      f1.first_mismatch ? std::to_string(*f1.first_mismatch) : std::string("none");
  return {!f1.decoded_equal && i1.decoded_equal && deterministic,
          fmt("float decoded_equal=%s (first mismatch %s), int decoded_equal=%s, repeatable=%s",
              f1.decoded_equal ? "true" : "false", mismatch.c_str(),
              i1.decoded_equal ? "true" : "false", deterministic ? "yes" : "no")};
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// 5. Calibrated integer stacks stay close to the float reference.
Outcome quantization_fidelity() {
  constexpr int kStacks = 20, kCalib = 4, kEval = 8;
  double worst_excess = -1.0;
  std::vector<double> mean_err, scale_err;
  for (int s = 0; s < kStacks; ++s) {
    Rng rng(5000 + s);
    const Topology t;
    const FloatEntropyStack f0 = make_random_float_stack(t, rng);
    std::vector<LatentSample> calib, eval;
    for (int n = 0; n < kCalib; ++n) calib.push_back(make_sample(f0, t, rng));
    for (int n = 0; n < kEval; ++n) eval.push_back(make_sample(f0, t, rng));
    const CalibrationResult cal = calibrate_shifts(f0, calib, default_grid(f0));
    const EntropyStack q = quantize_stack(cal.stack);
    double int_bits = 0.0, float_bits = 0.0;
    for (const LatentSample& e : eval) {
      int_bits += integer_cross_entropy_bits(q, e);
      float_bits += float_cross_entropy_bits(cal.stack, e);
      const GmmFieldF a = to_real(run_entropy_stack(e.latent, e.hyper, q));
      const GmmFieldF b = run_float_stack<double>(cal.stack, e.latent, e.hyper);
      for (std::size_t i = 0; i < a.elems.size(); ++i)
        for (int k = 0; k < kMixtureComponents; ++k) {
          if (b.elems[i].mean[k] != 0.0)
            mean_err.push_back(std::abs(a.elems[i].mean[k] - b.elems[i].mean[k]) /
                               std::abs(b.elems[i].mean[k]));
          scale_err.push_back(std::abs(a.elems[i].scale[k] - b.elems[i].scale[k]) /
                              b.elems[i].scale[k]);
        }
    }
    worst_excess = std::max(worst_excess, int_bits / float_bits - 1.0);
  }
  const double mm = median(mean_err), ms = median(scale_err);
  return {worst_excess <= 0.02 && mm <= 0.01 && ms <= 0.01,
          fmt("%d stacks, worst cross-entropy excess %+.3f%%, median rel err means %.3f%% "
              "scales %.3f%%",
              kStacks, 100 * worst_excess, 100 * mm, 100 * ms)};
}

// 6. Shift derivation and value quantization equal the exact rational oracle.
Outcome formula_oracles() {
  constexpr int kTrials = 10000;
  Rng rng(6000);
  std::size_t bad_derive = 0, bad_adjust = 0, bad_value = 0, clamped = 0;
  for (int n = 0; n < kTrials; ++n) {
    const std::vector<double> col = oracle::random_column(rng);
    const int ni = static_cast<int>(rng.uniform_int(2, 16));
    bad_derive += derive_weight_shift(col, 32, ni) != oracle::derive_weight_shift(col, 32, ni);

    const int k = static_cast<int>(rng.uniform_int(-4, 30));
    const double b = oracle::random_bias(rng);
    const int p = static_cast<int>(rng.uniform_int(0, 15));
    bad_adjust += adjust_shift_for_bias(k, b, p, 32) != oracle::adjust_shift_for_bias(k, b, p, 32);

    const double x = oracle::random_activation(rng);
    const int xp = static_cast<int>(rng.uniform_int(0, 15));
    const int bits = static_cast<int>(rng.uniform_int(2, 16));
    const std::int32_t want = oracle::quantize_value(x, xp, bits);
    bad_value += quantize_value(x, xp, bits) != want;
    clamped += std::abs(want) == (1 << (bits - 1)) - 1;
  }
  return {bad_derive == 0 && bad_adjust == 0 && bad_value == 0 && clamped > 0,
          fmt("%d inputs each: derive %zu, bias adjust %zu, quantize %zu mismatches "
              "(%zu clamped cases)",
              kTrials, bad_derive, bad_adjust, bad_value, clamped)};
}

GmmParamsF random_gmm(Rng& rng, double max_scale) {
  GmmParamsF g;
  double total = 0.0;
  for (int k = 0; k < kMixtureComponents; ++k) {
    g.weight[k] = rng.uniform(0.01, 1.0);
    total += g.weight[k];
    g.mean[k] = rng.uniform(-10.0, 10.0);
    g.scale[k] = std::exp(rng.uniform(std::log(0.11), std::log(max_scale)));
  }
  for (double& w : g.weight) w /= total;
  return g;
}

// 7. The range coder is lossless and close to the entropy bound.
Outcome range_coder() {
  Rng rng(7000);
  constexpr int kPairs = 1000;
  std::size_t failures = 0;
  for (int n = 0; n < kPairs; ++n) {
    const int lo = static_cast<int>(rng.uniform_int(-40, 0));
    const int hi = lo + static_cast<int>(rng.uniform_int(0, 60));
    const std::size_t len = static_cast<std::size_t>(rng.uniform_int(0, 400));
    std::vector<CdfTable> tables;
    std::vector<std::int32_t> symbols;
    for (std::size_t i = 0; i < len; ++i) {
      tables.push_back(build_cdf_table(random_gmm(rng, 20.0), lo, hi));
      symbols.push_back(static_cast<std::int32_t>(rng.uniform_int(lo, hi)));
    }
    const Bitstream s = Bitstream::from_bytes(
        rc_encode(symbols, tables, {1, 1, static_cast<int>(len)}).to_bytes());
    failures += rc_decode(s, tables, len) != symbols;
  }

  // Code length at n = 10^4 i.i.d. draws from one table, against the
  // empirical entropy of the drawn sequence.
  constexpr std::size_t kDraws = 10000;
  double worst = 0.0;
  for (const double scale : {0.6, 2.0, 8.0}) {
    GmmParamsF g;
    g.weight = {0.5, 0.3, 0.2};
    g.mean = {-2.0, 0.5, 3.0};
    g.scale = {scale, 1.5 * scale, 0.8 * scale};
    const CdfTable t = build_cdf_table(g, -24, 24);
    std::vector<std::int32_t> symbols(kDraws);
    std::vector<std::size_t> hist(49, 0);
    for (auto& v : symbols) {
      v = t.symbol_for(static_cast<std::uint32_t>(rng.uniform_int(0, kCdfTotal - 1)));
      ++hist[v + 24];
    }
    double entropy_bits = 0.0;
    for (std::size_t c : hist)
      if (c) entropy_bits -= c * std::log2(static_cast<double>(c) / kDraws);
    const std::vector<CdfTable> tables(kDraws, t);
    const Bitstream s = rc_encode(symbols, tables);
    failures += rc_decode(s, tables, kDraws) != symbols;
    worst = std::max(worst, 8.0 * s.payload.size() / entropy_bits - 1.0);
  }
  return {failures == 0 && worst <= 0.02,
          fmt("%d random roundtrips, %zu failures; worst code length over entropy bound %+.3f%%",
              kPairs, failures, 100 * worst)};
}

// 8. Linearized softmax weights are positive, sum to 2^15 and match the oracle.
Outcome softmax() {
  Rng rng(8000);
  constexpr int kTrials = 10000;
  std::size_t nonpositive = 0, bad_sum = 0, mismatches = 0;
  for (int n = 0; n < kTrials; ++n) {
    const int p = static_cast<int>(rng.uniform_int(0, 15));
    std::array<std::int32_t, 3> z;
    for (auto& v : z) v = static_cast<std::int32_t>(rng.uniform_int(-32767, 32767));
    if (n % 4 == 0) z[1] = z[0];
    const auto w = linear_softmax_int(z, p);
    nonpositive += std::min({w[0], w[1], w[2]}) <= 0;
    bad_sum += w[0] + w[1] + w[2] != kWeightOne;
    mismatches += w != oracle::linear_softmax(z, p);
  }
  return {nonpositive == 0 && bad_sum == 0 && mismatches == 0,
          fmt("%d inputs, %zu non-positive, %zu bad sums, %zu oracle mismatches", kTrials,
              nonpositive, bad_sum, mismatches)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"overflow-freedom", overflow_freedom},
      {"order-invariance", order_invariance},
      {"roundtrip-exactness", roundtrip_exactness},
      {"failure-reproduction", failure_reproduction},
      {"quantization-fidelity", quantization_fidelity},
      {"formula-oracles", formula_oracles},
      {"range-coder", range_coder},
      {"linear-softmax", softmax},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

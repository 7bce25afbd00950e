// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Integer GMM probabilities and cumulative-frequency tables.
//
// A latent symbol v owns the bin [v - 1/2, v + 1/2). Its mass under a
// component is Phi((v + 1/2 - mu) / sigma) - Phi((v - 1/2 - mu) / sigma).
// After the checked-in Phi table nothing here touches floating point, so
// identical GmmParams produce identical tables on every platform.
//
// Intermediate widths (p = scale_exp <= 15, |v| < 2^16):
//   bin edge - mu       < 2^32   (Q p)
//   z numerator << 12   < 2^44   -> z in Q12, clamped to [-6, 6]
//   Phi                 <= 2^16  (Q16)
//   w * Phi summed      <= 2^31  (Q15 * Q16)
//   mass * (2^16 - S)   < 2^47

#ifndef DETQ_ENTROPY_MODEL_HPP
#define DETQ_ENTROPY_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "detq/errors.hpp"
#include "detq/gmm.hpp"
#include "detq/normal_cdf_table.hpp"
#include "detq/rounding.hpp"

namespace detq {

inline constexpr std::uint32_t kCdfTotal = 1u << 16;
inline constexpr int kCdfTotalBits = 16;
/// z-scores are formed in Q12 and interpolated between Q6 table entries.
inline constexpr int kZFracBits = 12;

namespace detail {

/// Phi(z) * 2^16 for z >= 0 at Q`frac_bits`, unsaturated ([32768, 65536]).
inline std::int64_t normal_cdf_upper(std::int64_t z, int frac_bits) {
  const int sub = frac_bits - kCdfGridBits;
  const std::int64_t limit = std::int64_t{kCdfTableCenter} << sub;
  if (z >= limit) return kNormalCdfQ16[2 * kCdfTableCenter];
  const std::int64_t idx = z >> sub;
  const std::int64_t frac = z - (idx << sub);
  const std::int64_t lo = kNormalCdfQ16[kCdfTableCenter + idx];
  const std::int64_t hi = kNormalCdfQ16[kCdfTableCenter + idx + 1];
  if (sub == 0) return lo;
  return lo + (((hi - lo) * frac + (std::int64_t{1} << (sub - 1))) >> sub);
}

}  // namespace detail

/// Phi(z) in Q16 over [0, 65536], z at Q`frac_bits` (>= 6). Exactly
/// antisymmetric: normal_cdf_q16(-z) == 65536 - normal_cdf_q16(z).
inline std::int64_t normal_cdf_q16(std::int64_t z, int frac_bits = kZFracBits) {
  if (z >= 0) return detail::normal_cdf_upper(z, frac_bits);
  return std::int64_t{kCdfTotal} - detail::normal_cdf_upper(-z, frac_bits);
}

/// Phi(z) for z in Q6, saturating to [0, 65535] (65535 at z >= 6).
inline std::uint32_t std_normal_cdf_fixed(std::int32_t z_q6) {
  const std::int64_t z = std::clamp<std::int64_t>(z_q6, -kCdfTableCenter, kCdfTableCenter);
  return static_cast<std::uint32_t>(
      std::min<std::int64_t>(normal_cdf_q16(z, kCdfGridBits), kCdfTotal - 1));
}

/// Q12 z-score of a bin edge. `half_edge` is twice the edge (2v - 1 or 2v + 1).
inline std::int64_t z_score_q12(std::int64_t half_edge, std::int32_t mean,
                                std::int32_t scale, int scale_exp) {
  const std::int64_t edge = half_edge * (std::int64_t{1} << (scale_exp - 1));
  const std::int64_t num = (edge - mean) * (std::int64_t{1} << kZFracBits);
  const std::int64_t z = div_round_half_away(num, scale);
  const std::int64_t lim = std::int64_t{kCdfTableCenter} << (kZFracBits - kCdfGridBits);
  return std::clamp(z, -lim, lim);
}

/// Mixture CDF at a half-integer edge, scaled by 2^15 * 2^16.
inline std::int64_t mixture_cdf_scaled(std::int64_t half_edge, const GmmParams& g) {
  std::int64_t c = 0;
  for (int k = 0; k < kMixtureComponents; ++k)
    c += std::int64_t{g.weight[k]} *
         normal_cdf_q16(z_score_q12(half_edge, g.mean[k], g.scale[k], g.scale_exp));
  return c;
}

inline void validate(const GmmParams& g) {
  std::int64_t wsum = 0;
  for (int k = 0; k < kMixtureComponents; ++k) {
    if (g.weight[k] < 0) throw Error("negative mixture weight");
    if (g.scale[k] <= 0) throw Error("non-positive mixture scale");
    wsum += g.weight[k];
  }
  if (wsum != kWeightOne) throw Error("mixture weights must sum to 2^15");
  if (g.scale_exp < 1 || g.scale_exp > 15) throw Error("scale_exp out of range");
}

/// Probability of symbol v in Q16, rounded half up.
inline std::uint32_t gmm_pmf(std::int32_t v, const GmmParams& g) {
  std::int64_t acc = 0;
  for (int k = 0; k < kMixtureComponents; ++k) {
    const std::int64_t hi =
        normal_cdf_q16(z_score_q12(2 * std::int64_t{v} + 1, g.mean[k], g.scale[k], g.scale_exp));
    const std::int64_t lo =
        normal_cdf_q16(z_score_q12(2 * std::int64_t{v} - 1, g.mean[k], g.scale[k], g.scale_exp));
    acc += std::int64_t{g.weight[k]} * (hi - lo);
  }
  return static_cast<std::uint32_t>((acc + (std::int64_t{1} << 14)) >> 15);
}

/// Monotone cumulative-frequency table over [symbol_min, symbol_max].
/// cf[0] = 0, cf[S] = 2^16, and every symbol has frequency >= 1.
struct CdfTable {
  std::int32_t symbol_min = 0;
  std::int32_t symbol_max = 0;
  std::vector<std::uint32_t> cf;

  int symbol_count() const { return symbol_max - symbol_min + 1; }
  bool contains(std::int32_t v) const { return v >= symbol_min && v <= symbol_max; }
  std::uint32_t cum(std::int32_t v) const { return cf[v - symbol_min]; }
  std::uint32_t freq(std::int32_t v) const {
    return cf[v - symbol_min + 1] - cf[v - symbol_min];
  }
  /// Symbol whose interval [cf[s], cf[s+1]) holds `target` (< 2^16).
  std::int32_t symbol_for(std::uint32_t target) const {
    const auto it = std::upper_bound(cf.begin(), cf.end(), target);
    return symbol_min + static_cast<std::int32_t>(it - cf.begin()) - 1;
  }
  /// -log2 of the coded probability of v.
  double bits(std::int32_t v) const {
    return kCdfTotalBits - std::log2(static_cast<double>(freq(v)));
  }

  friend bool operator==(const CdfTable&, const CdfTable&) = default;
};

namespace detail {

inline void check_range(std::int32_t vmin, std::int32_t vmax) {
  if (vmin > vmax) throw Error("build_cdf_table: empty symbol range");
  if (std::int64_t{vmax} - vmin + 1 > std::int64_t{kCdfTotal})
    throw Error("build_cdf_table: " + std::to_string(std::int64_t{vmax} - vmin + 1) +
                " symbols exceed the 2^16 total frequency");
}

/// Frequencies 1 + floor(share) plus one extra unit for the largest
/// remainders (lowest symbol first on ties), cumulated.
template <class Rem>
CdfTable finish_table(std::int32_t vmin, std::int32_t vmax, std::vector<std::int64_t> freq,
                      const std::vector<Rem>& rem, std::int64_t leftover) {
  const std::size_t S = freq.size();
  std::vector<std::size_t> order(S);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::int64_t u = 0; u < leftover; ++u) ++freq[order[static_cast<std::size_t>(u) % S]];
  CdfTable t{vmin, vmax, std::vector<std::uint32_t>(S + 1, 0)};
  for (std::size_t s = 0; s < S; ++s)
    t.cf[s + 1] = t.cf[s] + static_cast<std::uint32_t>(freq[s]);
  return t;
}

}  // namespace detail

/// Integer table. Tail mass below symbol_min / above symbol_max is folded
/// into the boundary symbols.
inline CdfTable build_cdf_table(const GmmParams& g, std::int32_t vmin, std::int32_t vmax) {
  detail::check_range(vmin, vmax);
  validate(g);
  const std::size_t S = static_cast<std::size_t>(vmax - vmin + 1);
  const std::int64_t total = std::int64_t{kWeightOne} * kCdfTotal;  // 2^31
  const std::int64_t spare = std::int64_t{kCdfTotal} - static_cast<std::int64_t>(S);

  std::vector<std::int64_t> freq(S), rem(S);
  std::int64_t prev = 0, assigned = 0;
  for (std::size_t s = 0; s < S; ++s) {
    const std::int64_t v = vmin + static_cast<std::int64_t>(s);
    const std::int64_t next = (s + 1 == S) ? total : mixture_cdf_scaled(2 * v + 1, g);
    const std::int64_t mass = next - prev;
    prev = next;
    freq[s] = 1 + mass * spare / total;
    rem[s] = mass * spare % total;
    assigned += freq[s];
  }
  return detail::finish_table(vmin, vmax, std::move(freq), rem,
                              std::int64_t{kCdfTotal} - assigned);
}

inline double normal_cdf_real(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Floating-point mixture CDF at x.
inline double mixture_cdf_real(double x, const GmmParamsF& g) {
  double c = 0.0;
  for (int k = 0; k < kMixtureComponents; ++k)
    c += g.weight[k] * normal_cdf_real((x - g.mean[k]) / g.scale[k]);
  return c;
}

/// Floating-point table: same folding and apportionment, with the shares
/// computed in double. This is what a float-prior codec would build.
inline CdfTable build_cdf_table(const GmmParamsF& g, std::int32_t vmin, std::int32_t vmax) {
  detail::check_range(vmin, vmax);
  const std::size_t S = static_cast<std::size_t>(vmax - vmin + 1);
  const double spare = static_cast<double>(kCdfTotal) - static_cast<double>(S);
  std::vector<std::int64_t> freq(S);
  std::vector<double> rem(S);
  std::int64_t assigned = 0;
  double prev = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    const double v = vmin + static_cast<double>(s);
    const double next = (s + 1 == S) ? 1.0 : std::min(mixture_cdf_real(v + 0.5, g), 1.0);
    const double share = std::max(next - prev, 0.0) * spare;
    prev = next;
    const double fl = std::floor(share);
    freq[s] = 1 + static_cast<std::int64_t>(fl);
    rem[s] = share - fl;
    assigned += freq[s];
  }
  const std::int64_t leftover = std::int64_t{kCdfTotal} - assigned;
  if (leftover < 0) throw Error("build_cdf_table: float shares exceed the total");
  return detail::finish_table(vmin, vmax, std::move(freq), rem, leftover);
}

}  // namespace detq

#endif  // DETQ_ENTROPY_MODEL_HPP

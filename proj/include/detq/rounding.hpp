// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Rounding primitives shared by the quantizer and the integer pipeline.
// Every rounding step in the toolkit is round-half-away-from-zero; there is
// no other tie rule anywhere.

#ifndef DETQ_ROUNDING_HPP
#define DETQ_ROUNDING_HPP

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <span>
#include <vector>

#include "detq/errors.hpp"

namespace detq {

inline double round_half_away(double x) { return std::round(x); }

/// Integer division num/den rounded half away from zero. den must be > 0.
inline std::int64_t div_round_half_away(std::int64_t num, std::int64_t den) {
  const std::int64_t mag = (2 * (num < 0 ? -num : num) + den) / (2 * den);
  return num < 0 ? -mag : mag;
}

/// v * 2^-s rounded half away from zero for s > 0, v * 2^-s exactly for
/// s <= 0. Left shifts are done in 64 bits; callers decide what overflow means.
inline std::int64_t round_shift(std::int64_t v, int s) {
  if (s <= 0) return v * (std::int64_t{1} << -s);
  const std::int64_t half = std::int64_t{1} << (s - 1);
  const std::int64_t mag = ((v < 0 ? -v : v) + half) >> s;
  return v < 0 ? -mag : mag;
}

inline std::int64_t clamp_symmetric(std::int64_t v, int bits) {
  const std::int64_t hi = (std::int64_t{1} << (bits - 1)) - 1;
  return v > hi ? hi : (v < -hi ? -hi : v);
}

/// ceil(log2(x)) for finite x > 0, exact (no libm).
inline int ceil_log2(double x) {
  int e = 0;
  const double f = std::frexp(x, &e);  // x = f * 2^e, f in [0.5, 1)
  return f == 0.5 ? e - 1 : e;
}

/// Exact sum of doubles as a nonoverlapping expansion (Shewchuk's
/// grow-expansion). Used where a power-of-two decision must not depend on
/// summation rounding.
class ExactSum {
 public:
  void add(double b) {
    scratch_.clear();
    double q = b;
    for (double e : parts_) {
      const double s = q + e;
      const double bv = s - q;
      const double err = (q - (s - bv)) + (e - bv);
      if (err != 0.0) scratch_.push_back(err);
      q = s;
    }
    if (q != 0.0 || scratch_.empty()) scratch_.push_back(q);
    parts_.swap(scratch_);
  }

  /// -1, 0 or +1.
  int sign() const {
    for (auto it = parts_.rbegin(); it != parts_.rend(); ++it) {
      if (*it > 0) return 1;
      if (*it < 0) return -1;
    }
    return 0;
  }

  double approx() const {
    double s = 0.0;
    for (double p : parts_) s += p;
    return s;
  }

  /// Sign of (sum - 2^e).
  int compare_pow2(int e) const {
    ExactSum t = *this;
    t.add(-std::ldexp(1.0, e));
    return t.sign();
  }

  /// Smallest integer c with sum <= 2^c. Sum must be positive.
  int ceil_log2() const {
    int c = detq::ceil_log2(approx());
    while (compare_pow2(c) > 0) ++c;
    while (compare_pow2(c - 1) <= 0) --c;
    return c;
  }

 private:
  std::vector<double> parts_;
  std::vector<double> scratch_;
};

}  // namespace detq

#endif  // DETQ_ROUNDING_HPP

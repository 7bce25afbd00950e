// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent arbitrary-precision reference implementations and input
// generators shared by the unit tests and the acceptance suite. Nothing here
// calls into the library's arithmetic.

#ifndef DETQ_TESTS_ORACLES_HPP
#define DETQ_TESTS_ORACLES_HPP

#include <boost/multiprecision/cpp_int.hpp>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "detq/random.hpp"

namespace detq::oracle {

using boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline Rational pow2(int e) {
  return e >= 0 ? Rational(cpp_int(1) << e) : Rational(cpp_int(1), cpp_int(1) << -e);
}

inline Rational exact(double x) { return Rational(x); }

/// Round half away from zero.
inline cpp_int round_half_away(const Rational& r) {
  const cpp_int n = boost::multiprecision::numerator(r);
  const cpp_int d = boost::multiprecision::denominator(r);
  const cpp_int an = n < 0 ? cpp_int(-n) : n;
  const cpp_int mag = (2 * an + d) / (2 * d);
  return n < 0 ? cpp_int(-mag) : mag;
}

/// Smallest integer c with r <= 2^c; r > 0.
inline int ceil_log2(const Rational& r) {
  const cpp_int n = boost::multiprecision::numerator(r);
  const cpp_int d = boost::multiprecision::denominator(r);
  int c = static_cast<int>(boost::multiprecision::msb(n)) -
          static_cast<int>(boost::multiprecision::msb(d));
  while (r > pow2(c)) ++c;
  while (r <= pow2(c - 1)) --c;
  return c;
}

inline std::int32_t quantize_value(double x, int p, int b) {
  const cpp_int q = round_half_away(exact(x) * pow2(p));
  const cpp_int hi = (cpp_int(1) << (b - 1)) - 1;
  if (q > hi) return static_cast<std::int32_t>(hi);
  if (q < -hi) return static_cast<std::int32_t>(-hi);
  return static_cast<std::int32_t>(q);
}

inline int derive_weight_shift(const std::vector<double>& col, int na, int ni) {
  Rational s = 0;
  for (double w : col) s += exact(std::abs(w));
  if (s == 0) return 14;
  return na - ni - ceil_log2(s);
}

inline int adjust_shift_for_bias(int k, double b, int p, int na) {
  if (b == 0) return k;
  const int c = std::max(ceil_log2(exact(std::abs(b))), 0);
  return std::min(na - 1 - p - c, k) - 1;
}

/// Exact linearized softmax: numerators max(2^p + z, 1); one reserved unit
/// per weight plus rational shares of 2^15 - 3, largest remainder, ties to
/// the lowest index.
inline std::array<std::int32_t, 3> linear_softmax(const std::array<std::int32_t, 3>& z, int p) {
  Rational total = 0;
  std::array<cpp_int, 3> n;
  for (int i = 0; i < 3; ++i) {
    n[i] = (cpp_int(1) << p) + z[i];
    if (n[i] < 1) n[i] = 1;
    total += Rational(n[i]);
  }
  std::array<std::int32_t, 3> w{};
  std::array<Rational, 3> frac;
  std::array<bool, 3> bumped{};
  std::int64_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const Rational share = Rational(n[i]) * (32768 - 3) / total;
    const cpp_int fl = boost::multiprecision::numerator(share) /
                       boost::multiprecision::denominator(share);
    w[i] = 1 + static_cast<std::int32_t>(fl);
    frac[i] = share - Rational(fl);
    assigned += w[i];
  }
  for (std::int64_t left = 32768 - assigned; left > 0; --left) {
    int best = -1;
    for (int i = 0; i < 3; ++i)
      if (!bumped[i] && (best < 0 || frac[i] > frac[best])) best = i;
    ++w[best];
    bumped[best] = true;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Input generators with deliberate coverage of ties and power-of-two edges.

inline double random_activation(Rng& rng) {
  switch (rng.uniform_int(0, 4)) {
    case 0: return 0.0;
    case 1: {  // exact tie at a random scale
      const int p = static_cast<int>(rng.uniform_int(0, 15));
      const double n = static_cast<double>(rng.uniform_int(-70000, 70000));
      return std::ldexp(n + 0.5, -p);
    }
    case 2: return rng.normal(0.0, 1.0) * std::pow(10.0, rng.uniform(-4, 5));
    case 3: {  // one ulp either side of a tie
      const int p = static_cast<int>(rng.uniform_int(0, 15));
      const double t = std::ldexp(static_cast<double>(rng.uniform_int(-3000, 3000)) + 0.5, -p);
      return std::nextafter(t, rng.coin() ? 1e300 : -1e300);
    }
    default: return rng.uniform(-600.0, 600.0);
  }
}

inline std::vector<double> random_column(Rng& rng) {
  const std::size_t len = static_cast<std::size_t>(
      rng.uniform_int(0, 9) == 0 ? rng.uniform_int(1, 6400) : rng.uniform_int(1, 80));
  std::vector<double> col(len);
  switch (rng.uniform_int(0, 3)) {
    case 0: {  // dyadic column summing to exactly 2^t in magnitude
      const int t = static_cast<int>(rng.uniform_int(-8, 12));
      const int frac = 20;
      std::int64_t left = std::int64_t{1} << (t + frac + 8);
      for (std::size_t i = 0; i + 1 < len && left > 0; ++i) {
        const std::int64_t a = static_cast<std::int64_t>(rng.uniform_int(0, left / 2));
        col[i] = std::ldexp(static_cast<double>(a), -(frac + 8)) * (rng.coin() ? 1 : -1);
        left -= a;
      }
      col[len - 1] = std::ldexp(static_cast<double>(left), -(frac + 8));
      if (rng.coin()) {  // nudge one entry by one ulp
        double& w = col[rng.uniform_int(0, len - 1)];
        w = std::nextafter(w, rng.coin() ? 1e300 : -1e300);
      }
      break;
    }
    case 1:
      for (double& w : col) w = rng.normal(0.0, std::pow(10.0, rng.uniform(-5, 1)));
      break;
    case 2:
      for (double& w : col) w = rng.coin() ? 0.0 : std::ldexp(rng.normal(), -static_cast<int>(rng.uniform_int(0, 30)));
      break;
    default:
      for (double& w : col) w = rng.uniform(-1, 1) * std::ldexp(1.0, static_cast<int>(rng.uniform_int(-40, 10)));
      break;
  }
  if (rng.uniform_int(0, 20) == 0) std::fill(col.begin(), col.end(), 0.0);
  return col;
}

inline double random_bias(Rng& rng) {
  switch (rng.uniform_int(0, 3)) {
    case 0: return 0.0;
    case 1: return std::ldexp(1.0, static_cast<int>(rng.uniform_int(-10, 20))) * (rng.coin() ? 1 : -1);
    case 2: {
      const double p2 = std::ldexp(1.0, static_cast<int>(rng.uniform_int(-10, 20)));
      return std::nextafter(p2, rng.coin() ? 1e300 : 0.0);
    }
    default: return rng.normal(0.0, 1.0) * std::pow(10.0, rng.uniform(-4, 6));
  }
}

}  // namespace detq::oracle

#endif  // DETQ_TESTS_ORACLES_HPP

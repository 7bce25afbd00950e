// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <vector>

#include "detq/detq.hpp"

namespace detq {
namespace {

using Real = boost::multiprecision::cpp_bin_float_50;

Real phi(const Real& z) { return boost::math::erfc(-z / boost::multiprecision::sqrt(Real(2))) / 2; }

double phi_q16(double z) { return static_cast<double>(phi(Real(z)) * 65536); }

GmmParams single(std::int32_t mean, std::int32_t scale, int p = 10) {
  GmmParams g;
  g.weight = {kWeightOne, 0, 0};
  g.mean = {mean, mean, mean};
  g.scale = {scale, scale, scale};
  g.scale_exp = p;
  return g;
}

GmmParams random_params(Rng& rng) {
  GmmParams g;
  const std::int32_t a = static_cast<std::int32_t>(rng.uniform_int(0, kWeightOne));
  const std::int32_t b = static_cast<std::int32_t>(rng.uniform_int(0, kWeightOne - a));
  g.weight = {a, b, kWeightOne - a - b};
  for (int k = 0; k < 3; ++k) {
    g.mean[k] = static_cast<std::int32_t>(rng.uniform_int(-20 * 1024, 20 * 1024));
    g.scale[k] = static_cast<std::int32_t>(rng.uniform_int(64, 12 * 1024));
  }
  return g;
}

TEST(NormalCdfTable, EntriesMatchHighPrecisionErf) {
  for (int i = 0; i < 769; ++i) {
    const Real v = phi(Real(i - 384) / 64) * 65536;
    ASSERT_EQ(kNormalCdfQ16[i], static_cast<std::uint32_t>(boost::multiprecision::floor(v + Real(0.5))))
        << "entry " << i;
  }
}

TEST(NormalCdfTable, DigestMatchesCheckedInValue) {
  std::vector<std::uint8_t> bytes;
  for (std::uint32_t v : kNormalCdfQ16)
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  EXPECT_EQ(sha256_hex(bytes), kNormalCdfTableSha256);
  EXPECT_EQ(sha256_hex(bytes), "c2e83087636df7b751e16db63fd3aef45fe0cf6bf47363d8e90c2affa5a5fedc");
}

TEST(StdNormalCdfFixed, Examples) {
  EXPECT_EQ(std_normal_cdf_fixed(0), 32768u);
  EXPECT_EQ(std_normal_cdf_fixed(384), 65535u);
  EXPECT_EQ(std_normal_cdf_fixed(5000), 65535u);
  EXPECT_EQ(std_normal_cdf_fixed(-384), 0u);
  EXPECT_EQ(std_normal_cdf_fixed(-5000), 0u);
  EXPECT_NEAR(std_normal_cdf_fixed(32), phi_q16(0.5), 1.0);
}

TEST(NormalCdf, ExactlyAntisymmetric) {
  for (std::int64_t z = -30000; z <= 30000; ++z)
    ASSERT_EQ(normal_cdf_q16(z) + normal_cdf_q16(-z), 65536) << z;
}

TEST(NormalCdf, InterpolationAccuracy) {
  double worst = 0.0;
  for (std::int64_t z = -24576; z <= 24576; z += 7)
    worst = std::max(worst, std::abs(normal_cdf_q16(z) - phi_q16(z / 4096.0)));
  EXPECT_LE(worst, 2.0);
}

TEST(NormalCdf, Monotone) {
  for (std::int64_t z = -25000; z < 25000; ++z) ASSERT_LE(normal_cdf_q16(z), normal_cdf_q16(z + 1));
}

TEST(GmmPmf, StandardNormalCentralBin) {
  const double want = static_cast<double>((phi(Real(0.5)) - phi(Real(-0.5))) * 65536);
  EXPECT_NEAR(gmm_pmf(0, single(0, 1024)), want, 2.0);
}

TEST(GmmPmf, ZeroMeanIsSymmetric) {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    GmmParams g = random_params(rng);
    g.mean = {0, 0, 0};
    for (int v = 0; v <= 30; ++v) ASSERT_EQ(gmm_pmf(v, g), gmm_pmf(-v, g));
  }
}

TEST(GmmPmf, DegenerateMixtureIsSingleGaussian) {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const std::int32_t mu = static_cast<std::int32_t>(rng.uniform_int(-8000, 8000));
    const std::int32_t sigma = static_cast<std::int32_t>(rng.uniform_int(64, 8000));
    GmmParams g = random_params(rng);
    g.weight = {kWeightOne, 0, 0};
    g.mean[0] = mu;
    g.scale[0] = sigma;
    for (int v = -20; v <= 20; ++v) {
      const std::int64_t hi = normal_cdf_q16(z_score_q12(2 * v + 1, mu, sigma, 10));
      const std::int64_t lo = normal_cdf_q16(z_score_q12(2 * v - 1, mu, sigma, 10));
      ASSERT_EQ(gmm_pmf(v, g), static_cast<std::uint32_t>(hi - lo));
      ASSERT_EQ(gmm_pmf(v, g), gmm_pmf(v, single(mu, sigma)));
    }
  }
}

TEST(GmmPmf, MixtureIsLinearInWeights) {
  Rng rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const GmmParams base = random_params(rng);
    const std::int32_t a = static_cast<std::int32_t>(rng.uniform_int(0, kWeightOne));
    GmmParams mix = base;
    mix.weight = {a, kWeightOne - a, 0};
    GmmParams c0 = base, c1 = base;
    c0.weight = {kWeightOne, 0, 0};
    c1.weight = {0, kWeightOne, 0};
    for (int v = -24; v <= 24; ++v) {
      const double lin = (static_cast<double>(a) * gmm_pmf(v, c0) +
                          static_cast<double>(kWeightOne - a) * gmm_pmf(v, c1)) /
                         kWeightOne;
      ASSERT_NEAR(gmm_pmf(v, mix), lin, 1.0);
    }
  }
}

TEST(GmmPmf, UnimodalSingleComponent) {
  for (std::int32_t mu : {-3000, 0, 1500, 5120})
    for (std::int32_t sigma : {300, 1024, 4000}) {
      const GmmParams g = single(mu, sigma);
      int v = -24;
      while (v < 24 && gmm_pmf(v + 1, g) >= gmm_pmf(v, g)) ++v;
      while (v < 24 && gmm_pmf(v + 1, g) <= gmm_pmf(v, g)) ++v;
      EXPECT_EQ(v, 24) << "mu=" << mu << " sigma=" << sigma;
    }
}

TEST(CdfTable, SingleSymbol) {
  Rng rng(44);
  const CdfTable t = build_cdf_table(random_params(rng), 3, 3);
  EXPECT_EQ(t.cf, (std::vector<std::uint32_t>{0, 65536}));
}

TEST(CdfTable, NormalizedAndStrictlyIncreasing) {
  Rng rng(45);
  for (int trial = 0; trial < 300; ++trial) {
    const GmmParams g = random_params(rng);
    const int vmin = static_cast<int>(rng.uniform_int(-40, 0));
    const int vmax = vmin + static_cast<int>(rng.uniform_int(0, 80));
    const CdfTable t = build_cdf_table(g, vmin, vmax);
    ASSERT_EQ(t.cf.front(), 0u);
    ASSERT_EQ(t.cf.back(), 65536u);
    for (std::size_t i = 0; i + 1 < t.cf.size(); ++i) ASSERT_LT(t.cf[i], t.cf[i + 1]);
  }
}

TEST(CdfTable, FrequenciesTrackMixtureMass) {
  Rng rng(46);
  for (int trial = 0; trial < 50; ++trial) {
    const GmmParams g = random_params(rng);
    const CdfTable t = build_cdf_table(g, -24, 24);
    const GmmParamsF r = to_real(g);
    auto cdf = [&](double x) {
      Real c = 0;
      for (int k = 0; k < 3; ++k) c += Real(r.weight[k]) * phi((Real(x) - r.mean[k]) / r.scale[k]);
      return c;
    };
    for (int v = -24; v <= 24; ++v) {
      const Real lo = v == -24 ? Real(0) : cdf(v - 0.5);
      const Real hi = v == 24 ? Real(1) : cdf(v + 0.5);
      const double want = static_cast<double>((hi - lo) * (65536 - 49)) + 1;
      // Per bin edge: table interpolation (< 1.26) plus Q12 z rounding
      // (phi(0) * 2^-13 * 2^16 < 3.2); two edges and one apportionment unit.
      ASSERT_NEAR(t.freq(v), want, 10.0) << "v=" << v;
    }
  }
}

TEST(CdfTable, ZeroMeanTablesMirrorUpToTheTieRule) {
  // Symmetric masses give mirrored shares; tied remainders across the two
  // halves are resolved toward the lower symbol, so freq(-v) - freq(v) is 0
  // or 1.
  for (std::int32_t sigma = 64; sigma <= 8000; sigma += 13) {
    const CdfTable t = build_cdf_table(single(0, sigma), -8, 8);
    for (int v = 1; v <= 8; ++v) {
      const int d = static_cast<int>(t.freq(-v)) - static_cast<int>(t.freq(v));
      ASSERT_TRUE(d == 0 || d == 1) << "sigma=" << sigma << " v=" << v;
    }
  }
  for (std::int32_t sigma : {512, 1024, 2048}) {
    const CdfTable t = build_cdf_table(single(0, sigma), -8, 8);
    const std::size_t S = t.cf.size() - 1;
    for (std::size_t i = 0; i <= S; ++i) EXPECT_EQ(t.cf[i] + t.cf[S - i], 65536u) << sigma;
  }
}

TEST(CdfTable, SymbolLookupInvertsCumulative) {
  Rng rng(47);
  const CdfTable t = build_cdf_table(random_params(rng), -10, 10);
  for (int v = -10; v <= 10; ++v) {
    EXPECT_EQ(t.symbol_for(t.cum(v)), v);
    EXPECT_EQ(t.symbol_for(t.cum(v) + t.freq(v) - 1), v);
  }
}

TEST(CdfTable, Errors) {
  Rng rng(48);
  const GmmParams g = random_params(rng);
  EXPECT_THROW(build_cdf_table(g, 1, 0), Error);
  EXPECT_THROW(build_cdf_table(g, 0, 65536), Error);
  EXPECT_NO_THROW(build_cdf_table(g, 0, 65535));
  GmmParams bad = g;
  bad.weight[0] += 1;
  EXPECT_THROW(build_cdf_table(bad, -4, 4), Error);
  bad = g;
  bad.scale[1] = 0;
  EXPECT_THROW(build_cdf_table(bad, -4, 4), Error);
}

TEST(CdfTable, FloatTablesAreNormalized) {
  Rng rng(49);
  for (int trial = 0; trial < 100; ++trial) {
    const GmmParams g = random_params(rng);
    const CdfTable tf = build_cdf_table(to_real(g), -24, 24);
    const CdfTable ti = build_cdf_table(g, -24, 24);
    ASSERT_EQ(tf.cf.back(), 65536u);
    for (int v = -24; v <= 24; ++v) {
      ASSERT_GE(tf.freq(v), 1u);
      ASSERT_NEAR(tf.freq(v), ti.freq(v), 8.0);
    }
  }
}

}  // namespace
}  // namespace detq

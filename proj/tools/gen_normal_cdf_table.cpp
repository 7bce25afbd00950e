// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Regenerates include/detq/normal_cdf_table.hpp.
//
//   gen_normal_cdf_table > include/detq/normal_cdf_table.hpp
//
// Entry i holds round(Phi((i - 384) / 64) * 2^16), evaluated with 50 decimal
// digits, for z in [-6, 6] on a 1/64 grid. The SHA-256 of the entries
// (little-endian uint32) is emitted alongside so drift is caught by tests.

#include <openssl/evp.h>

#include <array>
#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cstdint>
#include <cstdio>
#include <string>

namespace {

using Real = boost::multiprecision::cpp_bin_float_50;

constexpr int kEntries = 769;
constexpr int kCenter = 384;
constexpr int kGridBits = 6;

std::uint32_t phi_q16(int i) {
  const Real z = Real(i - kCenter) / Real(1 << kGridBits);
  const Real phi = boost::math::erfc(-z / boost::multiprecision::sqrt(Real(2))) / 2;
  const Real scaled = phi * 65536;
  return static_cast<std::uint32_t>(boost::multiprecision::floor(scaled + Real(0.5)));
}

std::string sha256_hex(const std::array<std::uint32_t, kEntries>& table) {
  std::array<unsigned char, kEntries * 4> bytes{};
  for (int i = 0; i < kEntries; ++i)
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<unsigned char>(table[i] >> (8 * b));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace

int main() {
  std::array<std::uint32_t, kEntries> table{};
  for (int i = 0; i < kEntries; ++i) table[i] = phi_q16(i);

  std::printf(
      "// Copyright 2026 The detq Authors\n"
      "// SPDX-License-Identifier: Apache-2.0\n"
      "//\n"
      "// Generated by tools/gen_normal_cdf_table.cpp. Do not edit.\n"
      "// Entry i = round(Phi((i - 384) / 64) * 65536).\n\n"
      "#ifndef DETQ_NORMAL_CDF_TABLE_HPP\n"
      "#define DETQ_NORMAL_CDF_TABLE_HPP\n\n"
      "#include <array>\n"
      "#include <cstdint>\n\n"
      "namespace detq {\n\n"
      "inline constexpr int kCdfTableCenter = %d;\n"
      "inline constexpr int kCdfGridBits = %d;\n"
      "/// SHA-256 of the entries as little-endian uint32.\n"
      "inline constexpr const char* kNormalCdfTableSha256 =\n"
      "    \"%s\";\n\n"
      "inline constexpr std::array<std::uint32_t, %d> kNormalCdfQ16 = {\n",
      kCenter, kGridBits, sha256_hex(table).c_str(), kEntries);
  for (int i = 0; i < kEntries; ++i) {
    if (i % 8 == 0) std::printf("   ");
    std::printf(" %u,", table[i]);
    if (i % 8 == 7 || i + 1 == kEntries) std::printf("\n");
  }
  std::printf("};\n\n}  // namespace detq\n\n#endif  // DETQ_NORMAL_CDF_TABLE_HPP\n");
  return 0;
}

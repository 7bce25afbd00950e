// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Carry-less range coder (Subbotin construction) over 2^16-total CdfTables.
//
// State: low, range (uint32). Per symbol with cumulative c and frequency f:
//   r = range >> 16; low += c * r; range = f * r
// then renormalize while the top byte of low is settled or range < 2^16:
//   if (low ^ (low + range)) >= 2^24 and range < 2^16: range = -low & 0xFFFF
//   emit low >> 24; low <<= 8; range <<= 8
// The encoder flushes the 4 bytes of low. The decoder mirrors the state and
// reads one byte per shift, so it consumes exactly the encoder's output.
//
// Stream layout (big-endian):
//   "DETQ" | version u8 | symbol count u32 | C u32 | H u32 | W u32 | payload

#ifndef DETQ_RANGE_CODEC_HPP
#define DETQ_RANGE_CODEC_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "detq/entropy_model.hpp"
#include "detq/errors.hpp"
#include "detq/tensor.hpp"

namespace detq {

inline constexpr std::uint8_t kBitstreamVersion = 1;
inline constexpr std::size_t kBitstreamHeaderBytes = 4 + 1 + 4 * 4;

class RangeEncoder {
 public:
  void encode(std::uint32_t cum, std::uint32_t freq) {
    range_ >>= kCdfTotalBits;
    low_ += cum * range_;
    range_ *= freq;
    normalize();
  }

  std::vector<std::uint8_t> finish() {
    for (int i = 0; i < 4; ++i) {
      out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
      low_ <<= 8;
    }
    return std::move(out_);
  }

 private:
  void normalize() {
    for (;;) {
      if ((low_ ^ (low_ + range_)) >= kTop) {
        if (range_ >= kBot) break;
        range_ = (0u - low_) & (kBot - 1);
      }
      out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
      low_ <<= 8;
      range_ <<= 8;
    }
  }

  static constexpr std::uint32_t kTop = 1u << 24;
  static constexpr std::uint32_t kBot = 1u << 16;
  std::uint32_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> in) : in_(in) {
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
  }

  /// Cumulative-frequency target in [0, 2^16). Must be followed by consume().
  std::uint32_t target() {
    range_ >>= kCdfTotalBits;
    const std::uint32_t t = (code_ - low_) / range_;
    if (t >= kCdfTotal) throw FormatError("range decoder: corrupt payload");
    return t;
  }

  void consume(std::uint32_t cum, std::uint32_t freq) {
    low_ += cum * range_;
    range_ *= freq;
    for (;;) {
      if ((low_ ^ (low_ + range_)) >= kTop) {
        if (range_ >= kBot) break;
        range_ = (0u - low_) & (kBot - 1);
      }
      code_ = (code_ << 8) | next_byte();
      low_ <<= 8;
      range_ <<= 8;
    }
  }

  std::size_t consumed() const { return pos_; }

 private:
  std::uint32_t next_byte() {
    if (pos_ >= in_.size()) throw FormatError("range decoder: truncated payload");
    return in_[pos_++];
  }

  static constexpr std::uint32_t kTop = 1u << 24;
  static constexpr std::uint32_t kBot = 1u << 16;
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint32_t low_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

struct Bitstream {
  std::uint32_t symbol_count = 0;
  Shape3 shape;  // latent shape the symbols belong to
  std::vector<std::uint8_t> payload;

  std::vector<std::uint8_t> to_bytes() const {
    std::vector<std::uint8_t> b{'D', 'E', 'T', 'Q', kBitstreamVersion};
    auto put = [&b](std::uint32_t v) {
      for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
    };
    put(symbol_count);
    put(static_cast<std::uint32_t>(shape.channels));
    put(static_cast<std::uint32_t>(shape.height));
    put(static_cast<std::uint32_t>(shape.width));
    b.insert(b.end(), payload.begin(), payload.end());
    return b;
  }

  static Bitstream from_bytes(std::span<const std::uint8_t> b) {
    if (b.size() < kBitstreamHeaderBytes) throw FormatError("bitstream shorter than header");
    if (b[0] != 'D' || b[1] != 'E' || b[2] != 'T' || b[3] != 'Q')
      throw FormatError("bad bitstream magic");
    if (b[4] != kBitstreamVersion)
      throw FormatError("unsupported bitstream version " + std::to_string(b[4]));
    auto get = [&b](std::size_t off) {
      return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
             (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
    };
    Bitstream s;
    s.symbol_count = get(5);
    s.shape = {static_cast<int>(get(9)), static_cast<int>(get(13)), static_cast<int>(get(17))};
    s.payload.assign(b.begin() + kBitstreamHeaderBytes, b.end());
    if (s.symbol_count == 0 && !s.payload.empty())
      throw FormatError("payload present for an empty stream");
    return s;
  }
};

/// Encodes symbols[i] with tables[i]. An empty sequence has no payload.
inline Bitstream rc_encode(std::span<const std::int32_t> symbols,
                           std::span<const CdfTable> tables, Shape3 shape = {}) {
  if (symbols.size() != tables.size())
    throw Error("rc_encode: need exactly one table per symbol");
  Bitstream s;
  s.symbol_count = static_cast<std::uint32_t>(symbols.size());
  s.shape = shape;
  if (symbols.empty()) return s;
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const CdfTable& t = tables[i];
    if (!t.contains(symbols[i]))
      throw Error("rc_encode: symbol " + std::to_string(symbols[i]) + " at index " +
                  std::to_string(i) + " outside table range [" + std::to_string(t.symbol_min) +
                  "," + std::to_string(t.symbol_max) + "]");
    enc.encode(t.cum(symbols[i]), t.freq(symbols[i]));
  }
  s.payload = enc.finish();
  return s;
}

/// Supplies the table for symbol i, given the symbols decoded so far.
using TableSupplier =
    std::function<const CdfTable&(std::size_t i, std::span<const std::int32_t> decoded)>;

namespace detail {

inline void rc_decode_into(const Bitstream& s, const TableSupplier& tables, std::size_t n,
                           std::vector<std::int32_t>& out) {
  if (n == 0) return;
  if (n > s.symbol_count)
    throw FormatError("rc_decode: stream holds " + std::to_string(s.symbol_count) +
                      " symbols, " + std::to_string(n) + " requested");
  out.reserve(n);
  RangeDecoder dec(s.payload);
  for (std::size_t i = 0; i < n; ++i) {
    const CdfTable& t = tables(i, out);
    const std::int32_t v = t.symbol_for(dec.target());
    dec.consume(t.cum(v), t.freq(v));
    out.push_back(v);
  }
}

}  // namespace detail

inline std::vector<std::int32_t> rc_decode(const Bitstream& s, const TableSupplier& tables,
                                           std::size_t n) {
  std::vector<std::int32_t> out;
  detail::rc_decode_into(s, tables, n, out);
  return out;
}

/// Like rc_decode, but a FormatError ends decoding early instead of
/// propagating; returns the symbols decoded up to that point.
inline std::vector<std::int32_t> rc_decode_prefix(const Bitstream& s, const TableSupplier& tables,
                                                  std::size_t n) {
  std::vector<std::int32_t> out;
  try {
    detail::rc_decode_into(s, tables, n, out);
  } catch (const FormatError&) {
  }
  return out;
}

inline std::vector<std::int32_t> rc_decode(const Bitstream& s, std::span<const CdfTable> tables,
                                           std::size_t n) {
  if (tables.size() < n) throw Error("rc_decode: fewer tables than symbols");
  return rc_decode(
      s, [&](std::size_t i, std::span<const std::int32_t>) -> const CdfTable& { return tables[i]; },
      n);
}

}  // namespace detq

#endif  // DETQ_RANGE_CODEC_HPP

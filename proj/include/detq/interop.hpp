// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Cross-device experiments. A "device" is modeled as an accumulation order
// (sequential, reversed, pairwise tree) combined with an arithmetic mode:
// float mode runs the unquantized stack in 32-bit floats, integer mode runs
// the quantized stack. Encoding on one backend and decoding on another shows
// whether priors agree bit-exactly.
//
// Symbols are coded position by position in raster order, all latent
// channels of a position together. The decoder regenerates priors for each
// position from the symbols decoded so far (undecoded positions are zero),
// which the causal context mask makes identical to the encoder's one-pass
// priors.

#ifndef DETQ_INTEROP_HPP
#define DETQ_INTEROP_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "detq/entropy_model.hpp"
#include "detq/float_stack.hpp"
#include "detq/int_infer.hpp"
#include "detq/range_codec.hpp"

namespace detq {

enum class PriorMode { floating, integer };

inline const char* to_string(PriorMode m) { return m == PriorMode::integer ? "int" : "float"; }

struct BackendVariant {
  std::string id;
  AccumulationOrder order = AccumulationOrder::sequential;
  PriorMode mode = PriorMode::integer;
};

inline BackendVariant make_variant(AccumulationOrder order, PriorMode mode) {
  return {std::string(to_string(mode)) + "-" + to_string(order), order, mode};
}

inline constexpr AccumulationOrder kAllOrders[] = {
    AccumulationOrder::sequential, AccumulationOrder::reversed, AccumulationOrder::pairwise_tree};

struct StackPair {
  FloatEntropyStack float_stack;
  EntropyStack int_stack;

  static StackPair from_float(FloatEntropyStack f) {
    EntropyStack q = quantize_stack(f);
    return {std::move(f), std::move(q)};
  }
};

struct LatentSample {
  IntTensor latent;
  IntTensor hyper;
};

/// Priors from one backend: an integer field or a float field.
struct BackendPriors {
  PriorMode mode = PriorMode::integer;
  GmmField int_field;
  GmmFieldF float_field;

  std::vector<std::uint8_t> bytes() const {
    if (mode == PriorMode::integer) return serialize(int_field);
    std::vector<std::uint8_t> out(float_field.elems.size() * sizeof(GmmParamsF));
    std::memcpy(out.data(), float_field.elems.data(), out.size());
    return out;
  }
  GmmFieldF real() const { return mode == PriorMode::integer ? to_real(int_field) : float_field; }

  CdfTable table(std::size_t elem, const HeadConfig& h) const {
    return mode == PriorMode::integer
               ? build_cdf_table(int_field.elems[elem], h.symbol_min, h.symbol_max)
               : build_cdf_table(float_field.elems[elem], h.symbol_min, h.symbol_max);
  }
};

/// Largest relative difference over weights, means and scales.
inline double max_relative_difference(const GmmFieldF& a, const GmmFieldF& b) {
  if (!(a.shape == b.shape)) throw ShapeError("prior fields differ in shape");
  double worst = 0.0;
  auto upd = [&worst](double x, double y) {
    const double m = std::max(std::abs(x), std::abs(y));
    if (m > 0.0) worst = std::max(worst, std::abs(x - y) / m);
  };
  for (std::size_t i = 0; i < a.elems.size(); ++i)
    for (int k = 0; k < kMixtureComponents; ++k) {
      upd(a.elems[i].weight[k], b.elems[i].weight[k]);
      upd(a.elems[i].mean[k], b.elems[i].mean[k]);
      upd(a.elems[i].scale[k], b.elems[i].scale[k]);
    }
  return worst;
}

/// Priors for a fixed hyper-latent under one backend variant.
class PriorEngine {
 public:
  PriorEngine(const StackPair& stacks, const IntTensor& hyper, BackendVariant v)
      : s_(stacks), v_(std::move(v)) {
    if (v_.mode == PriorMode::integer) {
      s_.int_stack.validate();
      hyper_int_ = hyper_forward(
          s_.int_stack, quantize_symbols(hyper, s_.int_stack.hyper.front().spec.activation()),
          v_.order);
    } else {
      hyper_float_ =
          float_chain<float>(to_float(hyper), s_.float_stack.hyper, v_.order, true);
    }
  }

  const HeadConfig& head() const { return s_.int_stack.head; }
  const BackendVariant& variant() const { return v_; }

  BackendPriors full(const IntTensor& latent) const {
    BackendPriors p;
    p.mode = v_.mode;
    if (v_.mode == PriorMode::integer) {
      const QTensor c = context_forward(s_.int_stack, quantize_latent(latent), v_.order);
      const QTensor g = run_chain(concat_channels(hyper_int_, c), s_.int_stack.gather,
                                  v_.order, false);
      p.int_field = head_params(g, head());
    } else {
      const FloatTensor c =
          float_chain<float>(to_float(latent), s_.float_stack.context, v_.order, true);
      const FloatTensor g = float_chain<float>(concat_channels(hyper_float_, c),
                                               s_.float_stack.gather, v_.order, false);
      p.float_field = float_head<float>(g, head());
    }
    return p;
  }

  /// Tables for every latent channel at (y, x), from a latent whose positions
  /// at or after (y, x) in raster order are not yet known.
  std::vector<CdfTable> tables_at(const IntTensor& partial, int y, int x) const {
    const int C = head().latent_channels;
    std::vector<CdfTable> out;
    out.reserve(C);
    if (v_.mode == PriorMode::integer) {
      const QTensor c = context_forward(s_.int_stack, quantize_latent(partial), v_.order);
      const QTensor col{column_at(concat_channels(hyper_int_, c).values, y, x),
                        c.scale_exp, c.bit_depth};
      const QTensor g = run_chain(col, s_.int_stack.gather, v_.order, false);
      GmmField f({C, 1, 1});
      head_params_at(g, head(), 0, 0, f, 0, 0);
      for (int ch = 0; ch < C; ++ch)
        out.push_back(build_cdf_table(f.at(ch, 0, 0), head().symbol_min, head().symbol_max));
    } else {
      const FloatTensor c =
          float_chain<float>(to_float(partial), s_.float_stack.context, v_.order, true);
      const FloatTensor col = column_at(concat_channels(hyper_float_, c), y, x);
      const FloatTensor g = float_chain<float>(col, s_.float_stack.gather, v_.order, false);
      for (int ch = 0; ch < C; ++ch)
        out.push_back(build_cdf_table(float_head_at<float>(g, head(), ch, 0, 0),
                                      head().symbol_min, head().symbol_max));
    }
    return out;
  }

 private:
  QTensor quantize_latent(const IntTensor& latent) const {
    return quantize_symbols(latent, s_.int_stack.context.front().spec.activation());
  }

  const StackPair& s_;
  BackendVariant v_;
  QTensor hyper_int_;
  FloatTensor hyper_float_;
};

/// Priors of the whole latent under `variant` (one pass).
inline BackendPriors run_backend(const StackPair& stacks, const LatentSample& in,
                                 const BackendVariant& variant) {
  return PriorEngine(stacks, in.hyper, variant).full(in.latent);
}

/// Element index (into fields / tensors) of the i-th coded symbol.
inline std::size_t coding_element(const Shape3& s, std::size_t i) {
  const std::size_t C = s.channels, plane = s.plane();
  const std::size_t pos = i / C, c = i % C;
  return c * plane + pos;
}

inline std::vector<std::int32_t> symbols_in_coding_order(const IntTensor& latent) {
  std::vector<std::int32_t> out(latent.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = latent.data()[coding_element(latent.shape(), i)];
  return out;
}

struct InteropReport {
  bool decoded_equal = false;
  std::optional<std::size_t> first_mismatch;
  double prior_max_reldiff = 0.0;
  std::size_t symbols = 0;
  std::size_t payload_bytes = 0;
  std::optional<std::size_t> perturbed_index;
  std::string encoder;
  std::string decoder;

  std::string to_text() const {
    auto opt = [](const std::optional<std::size_t>& v) {
      return v ? std::to_string(*v) : std::string("none");
    };
    char rel[64];
    std::snprintf(rel, sizeof rel, "%.17g", prior_max_reldiff);
    std::ostringstream os;
    os << "encoder=" << encoder << "\n"
       << "decoder=" << decoder << "\n"
       << "decoded_equal=" << (decoded_equal ? "true" : "false") << "\n"
       << "first_mismatch=" << opt(first_mismatch) << "\n"
       << "prior_max_reldiff=" << rel << "\n"
       << "symbols=" << symbols << "\n"
       << "payload_bytes=" << payload_bytes << "\n"
       << "perturbed_index=" << opt(perturbed_index) << "\n";
    return os.str();
  }
};

namespace detail {

/// Decodes `stream` with `engine`, regenerating priors per position.
/// Returns the symbols decoded before any decoder error.
inline std::vector<std::int32_t> autoregressive_decode(const Bitstream& stream,
                                                       const PriorEngine& engine,
                                                       const Shape3& shape) {
  IntTensor partial(shape);
  std::vector<CdfTable> cache;
  const std::size_t C = shape.channels;
  const TableSupplier supplier = [&](std::size_t i,
                                     std::span<const std::int32_t> decoded) -> const CdfTable& {
    const std::size_t pos = i / C;
    if (i % C == 0) {
      // Positions before `pos` are complete; publish them to the partial latent.
      for (std::size_t j = (pos == 0 ? 0 : (pos - 1) * C); j < i; ++j)
        partial.data()[coding_element(shape, j)] = decoded[j];
      cache = engine.tables_at(partial, static_cast<int>(pos / shape.width),
                               static_cast<int>(pos % shape.width));
    }
    return cache[i % C];
  };
  // After a prior mismatch the decoder state may be corrupt; the caller sees
  // a short result.
  return rc_decode_prefix(stream, supplier, stream.symbol_count);
}

}  // namespace detail

/// Encode on `enc`, decode on `dec`, compare symbols.
inline InteropReport roundtrip_experiment(const StackPair& stacks, const LatentSample& data,
                                          const BackendVariant& enc, const BackendVariant& dec) {
  const HeadConfig& h = stacks.int_stack.head;
  if (data.latent.channels() != h.latent_channels)
    throw ShapeError("latent channels do not match the stack");
  const PriorEngine enc_engine(stacks, data.hyper, enc);
  const PriorEngine dec_engine(stacks, data.hyper, dec);

  const BackendPriors enc_priors = enc_engine.full(data.latent);
  const std::vector<std::int32_t> symbols = symbols_in_coding_order(data.latent);
  std::vector<CdfTable> tables;
  tables.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i)
    tables.push_back(enc_priors.table(coding_element(data.latent.shape(), i), h));
  const Bitstream stream = rc_encode(symbols, tables, data.latent.shape());
  const Bitstream received = Bitstream::from_bytes(stream.to_bytes());

  const std::vector<std::int32_t> decoded =
      detail::autoregressive_decode(received, dec_engine, data.latent.shape());

  InteropReport r;
  r.encoder = enc.id;
  r.decoder = dec.id;
  r.symbols = symbols.size();
  r.payload_bytes = stream.payload.size();
  for (std::size_t i = 0; i < symbols.size(); ++i)
    if (i >= decoded.size() || decoded[i] != symbols[i]) {
      r.first_mismatch = i;
      break;
    }
  r.decoded_equal = !r.first_mismatch.has_value();
  r.prior_max_reldiff =
      max_relative_difference(enc_priors.real(), dec_engine.full(data.latent).real());
  return r;
}

inline InteropReport roundtrip_experiment(const StackPair& stacks, const LatentSample& data,
                                          AccumulationOrder enc_order,
                                          AccumulationOrder dec_order, PriorMode mode) {
  return roundtrip_experiment(stacks, data, make_variant(enc_order, mode),
                              make_variant(dec_order, mode));
}

/// Float stack whose first hyper layer computes 2^24 * z0 + z1 - 2^24 * z2
/// for output channel 0 (1x1 kernel, three hyper channels). With z = 1 a
/// 32-bit float sum is 0 in sequential order and 1 in reversed order, so
/// priors differ across orders. Not quantizable; float mode only.
inline FloatEntropyStack make_cancellation_stack(Rng& rng) {
  Topology t;
  t.hyper_channels = 3;
  t.hyper_kernels = {1};
  FloatEntropyStack f = make_random_float_stack(t, rng);
  ConvLayerF& h = f.hyper[0].conv;
  h.weights[h.weight_index(0, 0, 0, 0)] = 16777216.0;
  h.weights[h.weight_index(1, 0, 0, 0)] = 1.0;
  h.weights[h.weight_index(2, 0, 0, 0)] = -16777216.0;
  h.bias[0] = 0.0;
  return f;
}

/// Hyper-latent of ones matching make_cancellation_stack.
inline IntTensor cancellation_hyper_latent() {
  const Topology t;
  IntTensor z({3, t.height, t.width});
  for (auto& v : z.data()) v = 1;
  return z;
}

// ---------------------------------------------------------------------------
// Rate measurements.

/// Bits to code `latent` under integer priors from `q`.
inline double integer_cross_entropy_bits(const EntropyStack& q, const LatentSample& s) {
  const GmmField f = run_entropy_stack(s.latent, s.hyper, q);
  double bits = 0.0;
  for (std::size_t e = 0; e < f.elems.size(); ++e)
    bits += build_cdf_table(f.elems[e], q.head.symbol_min, q.head.symbol_max)
                .bits(s.latent.data()[e]);
  return bits;
}

/// Bits to code `latent` under double-precision float priors.
inline double float_cross_entropy_bits(const FloatEntropyStack& f, const LatentSample& s) {
  const GmmFieldF p = run_float_stack<double>(f, s.latent, s.hyper);
  double bits = 0.0;
  for (std::size_t e = 0; e < p.elems.size(); ++e)
    bits += build_cdf_table(p.elems[e], f.head.symbol_min, f.head.symbol_max)
                .bits(s.latent.data()[e]);
  return bits;
}

/// Draws a latent from the float model's own priors, autoregressively.
inline IntTensor sample_latent(const FloatEntropyStack& f, const IntTensor& hyper, Rng& rng) {
  const int C = f.head.latent_channels, H = hyper.height(), W = hyper.width();
  IntTensor latent({C, H, W});
  const FloatTensor h = float_chain<double>(to_float(hyper), f.hyper,
                                            AccumulationOrder::sequential, true);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const FloatTensor c = float_chain<double>(to_float(latent), f.context,
                                                AccumulationOrder::sequential, true);
      const FloatTensor g = float_chain<double>(column_at(concat_channels(h, c), y, x),
                                                f.gather, AccumulationOrder::sequential, false);
      for (int ch = 0; ch < C; ++ch) {
        const CdfTable t = build_cdf_table(float_head_at<double>(g, f.head, ch, 0, 0),
                                           f.head.symbol_min, f.head.symbol_max);
        latent.at(ch, y, x) =
            t.symbol_for(static_cast<std::uint32_t>(rng.uniform_int(0, kCdfTotal - 1)));
      }
    }
  return latent;
}

inline LatentSample make_sample(const FloatEntropyStack& f, const Topology& t, Rng& rng) {
  LatentSample s;
  s.hyper = random_hyper_latent(t, rng);
  s.latent = sample_latent(f, s.hyper, rng);
  return s;
}

// ---------------------------------------------------------------------------
// Calibration.

/// Candidate input shifts per layer, in topological order.
using CalibrationGrid = std::vector<std::vector<int>>;

/// p in {6..12} per layer, except the first context layer whose input is
/// integer latent symbols and which searches {0..8}.
inline CalibrationGrid default_grid(const FloatEntropyStack& f) {
  CalibrationGrid g;
  for (const LayerRef& r : f.layer_refs()) {
    if (r.subnet == Subnet::context && r.index == 0)
      g.push_back({0, 1, 2, 3, 4, 5, 6, 7, 8});
    else
      g.push_back({6, 7, 8, 9, 10, 11, 12});
  }
  return g;
}

inline CalibrationGrid uniform_grid(const FloatEntropyStack& f, std::vector<int> candidates) {
  return CalibrationGrid(f.layer_refs().size(), std::move(candidates));
}

struct CalibrationTraceEntry {
  int pass = 0;
  std::string layer;
  int p = 0;
  double objective = 0.0;
};

struct CalibrationLayerChoice {
  std::string layer;
  int p = 0;
  int input_bits = 0;
  double objective = 0.0;
};

struct CalibrationReport {
  std::vector<CalibrationLayerChoice> layers;
  std::vector<CalibrationTraceEntry> trace;
  /// Objective before the first pass and after each pass.
  std::vector<double> pass_objectives;
  double final_objective = 0.0;

  std::string to_text() const {
    std::ostringstream os;
    char buf[64];
    auto num = [&buf](double v) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return std::string(buf);
    };
    for (const auto& l : layers)
      os << "layer=" << l.layer << " p=" << l.p << " input_bits=" << l.input_bits
         << " objective=" << num(l.objective) << "\n";
    for (std::size_t i = 0; i < pass_objectives.size(); ++i)
      os << "pass=" << i << " objective=" << num(pass_objectives[i]) << "\n";
    for (const auto& t : trace)
      os << "trace pass=" << t.pass << " layer=" << t.layer << " p=" << t.p
         << " objective=" << num(t.objective) << "\n";
    os << "final_objective=" << num(final_objective) << "\n";
    return os.str();
  }
};

struct CalibrationResult {
  CalibrationReport report;
  FloatEntropyStack stack;  // input stack with the chosen shifts
};

inline constexpr int kCalibrationPasses = 2;

/// Total integer-prior bits over the calibration set; +inf if the plan
/// cannot be quantized.
inline double calibration_objective(const FloatEntropyStack& f,
                                    std::span<const LatentSample> calib) {
  EntropyStack q;
  try {
    q = quantize_stack(f);
  } catch (const RepresentabilityError&) {
    return std::numeric_limits<double>::infinity();
  }
  double bits = 0.0;
  for (const LatentSample& s : calib) bits += integer_cross_entropy_bits(q, s);
  return bits;
}

/// Coordinate descent over layer input shifts in topological order, fixed
/// pass count, ties to the smaller shift.
inline CalibrationResult calibrate_shifts(FloatEntropyStack f,
                                          std::span<const LatentSample> calib,
                                          const CalibrationGrid& grid) {
  if (calib.empty()) throw Error("calibrate_shifts: empty calibration set");
  const std::vector<LayerRef> refs = f.layer_refs();
  if (grid.size() != refs.size())
    throw Error("calibrate_shifts: grid has " + std::to_string(grid.size()) +
                " entries for " + std::to_string(refs.size()) + " layers");
  for (const auto& g : grid)
    if (g.empty()) throw Error("calibrate_shifts: empty candidate list");

  // Start from the current plan, snapped to the nearest grid value.
  for (std::size_t l = 0; l < refs.size(); ++l) {
    int& p = f.layer(refs[l]).p_in;
    int best = grid[l].front();
    for (int c : grid[l])
      if (std::abs(c - p) < std::abs(best - p) || (std::abs(c - p) == std::abs(best - p) && c < best))
        best = c;
    p = best;
  }

  CalibrationResult res;
  std::vector<double> layer_objective(refs.size(), 0.0);
  double current = calibration_objective(f, calib);
  res.report.pass_objectives.push_back(current);
  for (int pass = 1; pass <= kCalibrationPasses; ++pass) {
    for (std::size_t l = 0; l < refs.size(); ++l) {
      int& p = f.layer(refs[l]).p_in;
      std::vector<int> cands = grid[l];
      std::sort(cands.begin(), cands.end());
      int best_p = p;
      double best_obj = current;
      for (int c : cands) {
        p = c;
        const double obj = calibration_objective(f, calib);
        res.report.trace.push_back({pass, refs[l].name(), c, obj});
        if (obj < best_obj || (obj == best_obj && c < best_p)) {
          best_obj = obj;
          best_p = c;
        }
      }
      p = best_p;
      current = best_obj;
      layer_objective[l] = best_obj;
    }
    res.report.pass_objectives.push_back(current);
  }
  for (std::size_t l = 0; l < refs.size(); ++l) {
    const FloatLayer& fl = f.layer(refs[l]);
    res.report.layers.push_back({refs[l].name(), fl.p_in, fl.input_bits, layer_objective[l]});
  }
  res.report.final_objective = current;
  res.stack = std::move(f);
  return res;
}

// ---------------------------------------------------------------------------
// Boundary failure demonstration.

namespace detail {

inline constexpr int kDemoElements = 64;
inline constexpr std::size_t kDemoBoundary = 16;
inline constexpr int kDemoSymbolMin = -16;
inline constexpr int kDemoSymbolMax = 16;
inline constexpr int kDemoScaleExp = 10;

inline GmmParamsF demo_params(int i) {
  GmmParamsF g;
  g.weight = {0.5, 0.25, 0.25};
  const double m = ((i * 7) % 9 - 4) * 0.5;
  g.mean = {m, m + 1.5, m - 2.0};
  g.scale = {1.0 + 0.25 * (i % 5), 2.0, 3.5};
  return g;
}

inline CdfTable demo_table(const GmmParamsF& g) {
  return build_cdf_table(g, kDemoSymbolMin, kDemoSymbolMax);
}

inline GmmParams demo_to_fixed(const GmmParamsF& g) {
  GmmParams q;
  q.scale_exp = kDemoScaleExp;
  for (int k = 0; k < kMixtureComponents; ++k) {
    q.weight[k] = static_cast<std::int32_t>(round_half_away(g.weight[k] * kWeightOne));
    q.mean[k] = static_cast<std::int32_t>(round_half_away(std::ldexp(g.mean[k], kDemoScaleExp)));
    q.scale[k] = static_cast<std::int32_t>(round_half_away(std::ldexp(g.scale[k], kDemoScaleExp)));
  }
  return q;
}

/// A scale s such that the float table at s and at nextafter(s) differ.
inline double find_boundary_scale(GmmParamsF g) {
  double lo = 1.0, hi = 1.25;
  g.scale[0] = lo;
  const CdfTable t_lo = demo_table(g);
  for (;;) {
    const double mid = lo + (hi - lo) / 2;
    if (mid <= lo || mid >= hi) break;
    g.scale[0] = mid;
    if (demo_table(g) == t_lo)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace detail

/// One element's scale is placed 1 ulp below a float CdfTable apportionment
/// boundary; the "decoder device" sees it `perturb_ulps` ulps higher.
/// Float priors then disagree on that element's table; integer priors, which
/// quantize both scales to the same fixed-point value, do not.
inline InteropReport boundary_failure_demo(PriorMode mode, int perturb_ulps = 1) {
  using namespace detail;
  std::vector<GmmParamsF> enc(kDemoElements);
  for (int i = 0; i < kDemoElements; ++i) enc[i] = demo_params(i);
  enc[kDemoBoundary].scale[0] = find_boundary_scale(enc[kDemoBoundary]);
  std::vector<GmmParamsF> dec = enc;
  for (int u = 0; u < perturb_ulps; ++u)
    dec[kDemoBoundary].scale[0] =
        std::nextafter(dec[kDemoBoundary].scale[0], std::numeric_limits<double>::infinity());

  std::vector<CdfTable> enc_tables, dec_tables;
  for (int i = 0; i < kDemoElements; ++i) {
    if (mode == PriorMode::integer) {
      enc_tables.push_back(build_cdf_table(demo_to_fixed(enc[i]), kDemoSymbolMin, kDemoSymbolMax));
      dec_tables.push_back(build_cdf_table(demo_to_fixed(dec[i]), kDemoSymbolMin, kDemoSymbolMax));
    } else {
      enc_tables.push_back(demo_table(enc[i]));
      dec_tables.push_back(demo_table(dec[i]));
    }
  }

  // Symbols drawn from the encoder's tables; at the boundary element pick the
  // first symbol whose interval moved.
  Rng rng(0x5EED);
  std::vector<std::int32_t> symbols(kDemoElements);
  for (int i = 0; i < kDemoElements; ++i)
    symbols[i] = enc_tables[i].symbol_for(static_cast<std::uint32_t>(rng.uniform_int(0, kCdfTotal - 1)));
  {
    const CdfTable& a = enc_tables[kDemoBoundary];
    const CdfTable& b = dec_tables[kDemoBoundary];
    for (int v = a.symbol_min; v <= a.symbol_max; ++v)
      if (a.cum(v) != b.cum(v) || a.freq(v) != b.freq(v)) {
        symbols[kDemoBoundary] = v;
        break;
      }
  }

  const Bitstream stream = rc_encode(symbols, enc_tables, {1, 1, kDemoElements});
  const std::vector<std::int32_t> decoded = rc_decode_prefix(
      stream,
      [&](std::size_t i, std::span<const std::int32_t>) -> const CdfTable& {
        return dec_tables[i];
      },
      symbols.size());

  InteropReport r;
  r.encoder = std::string(to_string(mode)) + "-device-a";
  r.decoder = std::string(to_string(mode)) + "-device-b";
  r.symbols = symbols.size();
  r.payload_bytes = stream.payload.size();
  r.perturbed_index = kDemoBoundary;
  for (std::size_t i = 0; i < symbols.size(); ++i)
    if (i >= decoded.size() || decoded[i] != symbols[i]) {
      r.first_mismatch = i;
      break;
    }
  r.decoded_equal = !r.first_mismatch.has_value();
  GmmFieldF fa({1, 1, kDemoElements}), fb({1, 1, kDemoElements});
  for (int i = 0; i < kDemoElements; ++i) {
    fa.elems[i] = mode == PriorMode::integer ? to_real(demo_to_fixed(enc[i])) : enc[i];
    fb.elems[i] = mode == PriorMode::integer ? to_real(demo_to_fixed(dec[i])) : dec[i];
  }
  r.prior_max_reldiff = max_relative_difference(fa, fb);
  return r;
}

}  // namespace detq

#endif  // DETQ_INTEROP_HPP

// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Model manifests and latent data files.
//
// A model is a text manifest plus a binary blob next to it. The manifest
// names the blob and its SHA-256, and lists layers in topological order
// (hyper, context, gather). The blob holds, per layer in that order, the
// weights in (m, K, K, n) order followed by the biases, little-endian:
//   float model:     float32 weights, float32 biases
//   quantized model: int16 weights,   int32 biases
// See docs/manifest.md for the grammar.

#ifndef DETQ_MODEL_IO_HPP
#define DETQ_MODEL_IO_HPP

#include <openssl/evp.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "detq/errors.hpp"
#include "detq/float_stack.hpp"
#include "detq/int_infer.hpp"
#include "detq/interop.hpp"

namespace detq {

inline constexpr const char* kManifestMagic = "detq-manifest";
inline constexpr int kManifestVersion = 1;
inline constexpr const char* kDataMagic = "detq-data";

inline std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s.push_back(hex[md[i] >> 4]);
    s.push_back(hex[md[i] & 15]);
  }
  return s;
}

inline const char* to_string(MaskType m) {
  switch (m) {
    case MaskType::none: return "none";
    case MaskType::exclusive: return "exclusive";
    case MaskType::inclusive: return "inclusive";
  }
  return "?";
}

inline MaskType parse_mask(const std::string& s) {
  if (s == "none") return MaskType::none;
  if (s == "exclusive") return MaskType::exclusive;
  if (s == "inclusive") return MaskType::inclusive;
  throw FormatError("unknown mask '" + s + "'");
}

enum class ModelKind { floating, quantized };

/// A loaded model. A quantized model also carries its dequantized weights
/// as the float form; a float model leaves int_stack empty.
struct Model {
  ModelKind kind = ModelKind::floating;
  FloatEntropyStack float_stack;
  EntropyStack int_stack;
};

namespace detail {

inline void put_le(std::vector<std::uint8_t>& b, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_le(std::span<const std::uint8_t> b, std::size_t& off, int bytes) {
  if (off + bytes > b.size()) throw FormatError("blob shorter than the manifest shapes require");
  std::uint32_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint32_t{b[off + i]} << (8 * i);
  off += bytes;
  return v;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, std::span<const std::uint8_t> b) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw Error("write failed: " + p.string());
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  write_file(p, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

/// Blob file name for a manifest path: "<stem>.bin" in the same directory.
inline std::filesystem::path blob_path(const std::filesystem::path& manifest) {
  std::filesystem::path b = manifest;
  b.replace_extension(".bin");
  return b;
}

struct LayerHeader {
  std::string name;
  int in = 0, kernel = 1, out = 0;
  MaskType mask = MaskType::none;
  int input_bits = 16, p_in = 8, p_out = 8;
  std::vector<int> weight_shift;
};

inline std::map<std::string, std::string> parse_fields(std::istringstream& ls) {
  std::map<std::string, std::string> f;
  std::string tok;
  while (ls >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw FormatError("expected key=value, got '" + tok + "'");
    f[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return f;
}

inline int to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("bad integer for " + what + ": '" + s + "'");
  }
}

inline const std::string& field(const std::map<std::string, std::string>& f, const char* key) {
  const auto it = f.find(key);
  if (it == f.end()) throw FormatError(std::string("missing field '") + key + "'");
  return it->second;
}

inline void write_manifest(const std::filesystem::path& path, ModelKind kind,
                           const HeadConfig& head, const std::vector<LayerHeader>& layers,
                           std::span<const std::uint8_t> blob) {
  const std::filesystem::path bp = blob_path(path);
  std::ostringstream os;
  os << kManifestMagic << " " << kManifestVersion << "\n"
     << "kind " << (kind == ModelKind::floating ? "float" : "quantized") << "\n"
     << "accumulator_bits " << kAccumulatorBits << "\n"
     << "latent_channels " << head.latent_channels << "\n"
     << "head_scale_exp " << head.scale_exp << "\n"
     << "symbol_range " << head.symbol_min << " " << head.symbol_max << "\n"
     << "blob " << bp.filename().string() << "\n"
     << "blob_bytes " << blob.size() << "\n"
     << "blob_sha256 " << sha256_hex(blob) << "\n";
  for (const LayerHeader& l : layers) {
    os << "layer " << l.name << " in=" << l.in << " kernel=" << l.kernel << " out=" << l.out
       << " mask=" << to_string(l.mask) << " input_bits=" << l.input_bits << " p_in=" << l.p_in;
    if (kind == ModelKind::quantized) {
      os << " p_out=" << l.p_out << " weight_shift=";
      for (std::size_t j = 0; j < l.weight_shift.size(); ++j)
        os << (j ? "," : "") << l.weight_shift[j];
    }
    os << "\n";
  }
  write_file(bp, blob);
  write_text(path, os.str());
}

}  // namespace detail

inline void save_float_model(const FloatEntropyStack& f, const std::filesystem::path& path) {
  std::vector<detail::LayerHeader> headers;
  std::vector<std::uint8_t> blob;
  for (const LayerRef& r : f.layer_refs()) {
    const FloatLayer& l = f.layer(r);
    headers.push_back({r.name(), l.conv.in_channels, l.conv.kernel, l.conv.out_channels,
                       l.conv.mask, l.input_bits, l.p_in, f.p_out(r), {}});
    for (double w : l.conv.weights)
      detail::put_le(blob, std::bit_cast<std::uint32_t>(static_cast<float>(w)), 4);
    for (double b : l.conv.bias)
      detail::put_le(blob, std::bit_cast<std::uint32_t>(static_cast<float>(b)), 4);
  }
  detail::write_manifest(path, ModelKind::floating, f.head, headers, blob);
}

inline void save_quantized_model(const EntropyStack& q, const std::filesystem::path& path) {
  std::vector<detail::LayerHeader> headers;
  std::vector<std::uint8_t> blob;
  auto add = [&](const std::vector<QConvLayer>& net, const char* name) {
    for (std::size_t i = 0; i < net.size(); ++i) {
      const QConvLayer& l = net[i];
      headers.push_back({std::string(name) + "." + std::to_string(i), l.in_channels, l.kernel,
                         l.out_channels, l.mask, l.spec.input_bits, l.spec.p_in, l.spec.p_out,
                         l.spec.weight_shift});
      for (std::int16_t w : l.weights)
        detail::put_le(blob, static_cast<std::uint16_t>(w), 2);
      for (std::int32_t b : l.bias) detail::put_le(blob, static_cast<std::uint32_t>(b), 4);
    }
  };
  add(q.hyper, "hyper");
  add(q.context, "context");
  add(q.gather, "gather");
  detail::write_manifest(path, ModelKind::quantized, q.head, headers, blob);
}

/// Parses a manifest and its blob; throws FormatError on any inconsistency.
inline Model load_model(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> text = detail::read_file(path);
  if (text.empty()) throw FormatError("empty manifest " + path.string());
  std::istringstream in(std::string(text.begin(), text.end()));
  std::string line;
  Model m;
  std::string blob_name, digest;
  std::size_t blob_bytes = 0;
  int acc_bits = 0;
  bool have_magic = false, have_kind = false;
  std::vector<detail::LayerHeader> layers;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == kManifestMagic) {
      int v = 0;
      ls >> v;
      if (v != kManifestVersion) throw FormatError("unsupported manifest version");
      have_magic = true;
    } else if (!have_magic) {
      throw FormatError("manifest must start with '" + std::string(kManifestMagic) + "'");
    } else if (key == "kind") {
      std::string k;
      ls >> k;
      if (k == "float") m.kind = ModelKind::floating;
      else if (k == "quantized") m.kind = ModelKind::quantized;
      else throw FormatError("unknown model kind '" + k + "'");
      have_kind = true;
    } else if (key == "accumulator_bits") {
      ls >> acc_bits;
    } else if (key == "latent_channels") {
      ls >> m.float_stack.head.latent_channels;
    } else if (key == "head_scale_exp") {
      ls >> m.float_stack.head.scale_exp;
    } else if (key == "symbol_range") {
      ls >> m.float_stack.head.symbol_min >> m.float_stack.head.symbol_max;
    } else if (key == "blob") {
      ls >> blob_name;
    } else if (key == "blob_bytes") {
      ls >> blob_bytes;
    } else if (key == "blob_sha256") {
      ls >> digest;
    } else if (key == "layer") {
      detail::LayerHeader h;
      ls >> h.name;
      const auto f = detail::parse_fields(ls);
      h.in = detail::to_int(detail::field(f, "in"), h.name + " in");
      h.kernel = detail::to_int(detail::field(f, "kernel"), h.name + " kernel");
      h.out = detail::to_int(detail::field(f, "out"), h.name + " out");
      h.mask = parse_mask(detail::field(f, "mask"));
      h.input_bits = detail::to_int(detail::field(f, "input_bits"), h.name + " input_bits");
      h.p_in = detail::to_int(detail::field(f, "p_in"), h.name + " p_in");
      if (h.in <= 0 || h.out <= 0 || h.kernel <= 0 || h.in > 4096 || h.out > 4096 ||
          h.kernel > 15)
        throw FormatError("layer " + h.name + ": implausible geometry");
      if (m.kind == ModelKind::quantized) {
        h.p_out = detail::to_int(detail::field(f, "p_out"), h.name + " p_out");
        std::istringstream ks(detail::field(f, "weight_shift"));
        std::string tok;
        while (std::getline(ks, tok, ',')) h.weight_shift.push_back(detail::to_int(tok, h.name + " weight_shift"));
        if (static_cast<int>(h.weight_shift.size()) != h.out)
          throw FormatError("layer " + h.name + ": weight_shift count != out");
      }
      layers.push_back(std::move(h));
    } else {
      throw FormatError("unknown manifest key '" + key + "'");
    }
    if (ls.fail() && key != "layer") throw FormatError("malformed manifest line: " + line);
  }
  if (!have_magic || !have_kind) throw FormatError("manifest missing header lines");
  if (acc_bits != kAccumulatorBits) throw FormatError("only 32-bit accumulators are supported");
  if (blob_name.empty() || digest.empty()) throw FormatError("manifest missing blob fields");

  const std::vector<std::uint8_t> blob = detail::read_file(path.parent_path() / blob_name);
  if (blob.size() != blob_bytes) throw FormatError("blob length does not match manifest");
  if (sha256_hex(blob) != digest) throw FormatError("blob digest mismatch");

  std::size_t expect = 0;
  for (const auto& h : layers) {
    const std::size_t nw = static_cast<std::size_t>(h.in) * h.kernel * h.kernel * h.out;
    expect += m.kind == ModelKind::floating ? 4 * (nw + h.out) : 2 * nw + 4 * h.out;
  }
  if (expect != blob.size()) throw FormatError("manifest shapes inconsistent with blob length");

  HeadConfig head = m.float_stack.head;
  std::size_t off = 0;
  for (const auto& h : layers) {
    const auto dot = h.name.find('.');
    const std::string net = h.name.substr(0, dot);
    Subnet s;
    if (net == "hyper") s = Subnet::hyper;
    else if (net == "context") s = Subnet::context;
    else if (net == "gather") s = Subnet::gather;
    else throw FormatError("unknown subnetwork in layer name '" + h.name + "'");
    const std::size_t nw = static_cast<std::size_t>(h.in) * h.kernel * h.kernel * h.out;
    if (m.kind == ModelKind::floating) {
      FloatLayer l;
      l.conv = {h.in, h.kernel, h.out, h.mask, std::vector<double>(nw), std::vector<double>(h.out)};
      for (double& w : l.conv.weights)
        w = std::bit_cast<float>(detail::get_le(blob, off, 4));
      for (double& b : l.conv.bias) b = std::bit_cast<float>(detail::get_le(blob, off, 4));
      l.input_bits = h.input_bits;
      l.p_in = h.p_in;
      m.float_stack.subnet(s).push_back(std::move(l));
    } else {
      QConvLayer l;
      l.in_channels = h.in;
      l.kernel = h.kernel;
      l.out_channels = h.out;
      l.mask = h.mask;
      l.weights.resize(nw);
      l.bias.resize(h.out);
      for (auto& w : l.weights)
        w = static_cast<std::int16_t>(static_cast<std::uint16_t>(detail::get_le(blob, off, 2)));
      for (auto& b : l.bias) b = static_cast<std::int32_t>(detail::get_le(blob, off, 4));
      l.spec = {h.input_bits, h.p_in, h.p_out, kAccumulatorBits, h.weight_shift};
      std::vector<QConvLayer>& dst =
          s == Subnet::hyper ? m.int_stack.hyper
                             : (s == Subnet::context ? m.int_stack.context : m.int_stack.gather);
      dst.push_back(std::move(l));
    }
  }
  if (m.kind == ModelKind::quantized) {
    m.int_stack.head = head;
    try {
      m.int_stack.validate();
    } catch (const Error& e) {
      throw FormatError(std::string("invalid quantized model: ") + e.what());
    }
    m.float_stack = dequantize_stack(m.int_stack);
  } else {
    for (const LayerRef& r : m.float_stack.layer_refs()) {
      try {
        m.float_stack.layer(r).conv.validate();
      } catch (const Error& e) {
        throw FormatError("layer " + r.name() + ": " + e.what());
      }
    }
    if (m.float_stack.hyper.empty() || m.float_stack.context.empty() ||
        m.float_stack.gather.empty())
      throw FormatError("float model is missing a subnetwork");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Latent data files: text, one sample per "sample" block.
//
//   detq-data 1
//   samples <N>
//   latent_shape <C> <H> <W>
//   hyper_shape <C> <H> <W>
//   sample
//   latent <C*H*W integers>
//   hyper <C*H*W integers>

inline std::string format_samples(std::span<const LatentSample> samples) {
  if (samples.empty()) throw Error("no samples to write");
  std::ostringstream os;
  const Shape3 ls = samples.front().latent.shape(), hs = samples.front().hyper.shape();
  os << kDataMagic << " 1\n"
     << "samples " << samples.size() << "\n"
     << "latent_shape " << ls.channels << " " << ls.height << " " << ls.width << "\n"
     << "hyper_shape " << hs.channels << " " << hs.height << " " << hs.width << "\n";
  for (const LatentSample& s : samples) {
    if (!(s.latent.shape() == ls) || !(s.hyper.shape() == hs))
      throw ShapeError("samples must share shapes");
    os << "sample\nlatent";
    for (std::int32_t v : s.latent.data()) os << " " << v;
    os << "\nhyper";
    for (std::int32_t v : s.hyper.data()) os << " " << v;
    os << "\n";
  }
  return os.str();
}

inline void save_samples(std::span<const LatentSample> samples, const std::filesystem::path& p) {
  detail::write_text(p, format_samples(samples));
}

inline std::vector<LatentSample> load_samples(const std::filesystem::path& p) {
  const std::vector<std::uint8_t> bytes = detail::read_file(p);
  if (bytes.empty()) throw FormatError("empty data file " + p.string());
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string word;
  int version = 0;
  std::size_t count = 0;
  Shape3 ls, hs;
  if (!(in >> word >> version) || word != kDataMagic || version != 1)
    throw FormatError("not a detq data file: " + p.string());
  auto expect = [&in](const char* w) {
    std::string got;
    if (!(in >> got) || got != w) throw FormatError(std::string("expected '") + w + "'");
  };
  expect("samples");
  in >> count;
  expect("latent_shape");
  in >> ls.channels >> ls.height >> ls.width;
  expect("hyper_shape");
  in >> hs.channels >> hs.height >> hs.width;
  if (!in || count == 0 || ls.channels <= 0 || ls.height <= 0 || ls.width <= 0 ||
      hs.channels <= 0 || hs.height <= 0 || hs.width <= 0)
    throw FormatError("bad data file header");
  std::vector<LatentSample> out;
  for (std::size_t n = 0; n < count; ++n) {
    LatentSample s{IntTensor(ls), IntTensor(hs)};
    expect("sample");
    expect("latent");
    for (auto& v : s.latent.data())
      if (!(in >> v)) throw FormatError("truncated latent in sample " + std::to_string(n));
    expect("hyper");
    for (auto& v : s.hyper.data())
      if (!(in >> v)) throw FormatError("truncated hyper-latent in sample " + std::to_string(n));
    out.push_back(std::move(s));
  }
  if (in >> word) throw FormatError("trailing data after last sample");
  return out;
}

}  // namespace detq

#endif  // DETQ_MODEL_IO_HPP

// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0
//
// detq command-line tool. Exit codes: 0 success, 1 verification or
// roundtrip failure, 2 usage, input or format error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "detq/detq.hpp"

namespace {

using namespace detq;

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kBadInput = 2;

/// Prints `text` and, when `out` is set, writes it there too.
void emit(const std::string& text, const std::string& out) {
  std::cout << text;
  if (!out.empty()) detail::write_text(out, text);
}

AccumulationOrder parse_order(const std::string& s) {
  for (AccumulationOrder o : kAllOrders)
    if (s == to_string(o)) return o;
  throw CLI::ValidationError("--variant", "unknown order '" + s + "' (seq, rev, tree)");
}

PriorMode parse_mode(const std::string& s) {
  if (s == "int") return PriorMode::integer;
  if (s == "float") return PriorMode::floating;
  throw CLI::ValidationError("--mode", "unknown mode '" + s + "' (float, int)");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

/// The integer stack of a model, quantizing a float model on the fly.
EntropyStack int_stack_of(const Model& m) {
  return m.kind == ModelKind::quantized ? m.int_stack : quantize_stack(m.float_stack);
}

Topology topology_of(const FloatEntropyStack& f, int height, int width) {
  Topology t;
  t.latent_channels = f.head.latent_channels;
  t.hyper_channels = f.hyper.front().conv.in_channels;
  t.height = height;
  t.width = width;
  t.symbol_min = f.head.symbol_min;
  t.symbol_max = f.head.symbol_max;
  t.head_scale_exp = f.head.scale_exp;
  return t;
}

std::string shift_summary(const EntropyStack& q) {
  std::ostringstream os;
  auto net = [&os](const std::vector<QConvLayer>& ls, const char* name) {
    for (std::size_t i = 0; i < ls.size(); ++i) {
      const auto& k = ls[i].spec.weight_shift;
      os << "layer=" << name << "." << i << " p_in=" << ls[i].spec.p_in
         << " p_out=" << ls[i].spec.p_out << " k=";
      for (std::size_t j = 0; j < k.size(); ++j) os << (j ? "," : "") << k[j];
      os << "\n";
    }
  };
  net(q.hyper, "hyper");
  net(q.context, "context");
  net(q.gather, "gather");
  return os.str();
}

CalibrationGrid parse_grid(const std::string& spec, const FloatEntropyStack& f) {
  if (spec == "default") return default_grid(f);
  std::vector<int> cands;
  for (const std::string& s : split(spec, ',')) {
    try {
      std::size_t used = 0;
      cands.push_back(std::stoi(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::logic_error&) {
      throw CLI::ValidationError("--grid", "not an integer list: '" + spec + "'");
    }
  }
  if (cands.empty()) throw CLI::ValidationError("--grid", "empty candidate list");
  return uniform_grid(f, cands);
}

struct Options {
  std::uint64_t seed = 1;
  std::string out;
  std::string model;
  std::string data;
  std::string kind = "random";
  std::string variant = "seq";
  std::string mode = "int";
  std::string grid = "default";
  std::string model_out;
  int count = 4;
  int height = 6;
  int width = 6;
  int samples = 4;
};

int cmd_gen_model(const Options& o) {
  Rng rng(o.seed);
  FloatEntropyStack f = make_random_float_stack(Topology{}, rng);
  if (o.kind == "zero") {
    for (const LayerRef& r : f.layer_refs()) {
      ConvLayerF& c = f.layer(r).conv;
      std::fill(c.weights.begin(), c.weights.end(), 0.0);
      std::fill(c.bias.begin(), c.bias.end(), 0.0);
    }
  } else if (o.kind == "pathological") {
    // One weight far beyond what 16 bits hold at any non-negative shift.
    f.hyper.front().conv.weights.front() = 1.0e6;
  }
  save_float_model(f, o.out);
  std::cout << "wrote " << o.out << "\n";
  return kOk;
}

int cmd_gen_data(const Options& o) {
  const Model m = load_model(o.model);
  const Topology t = topology_of(m.float_stack, o.height, o.width);
  Rng rng(o.seed);
  std::vector<LatentSample> samples;
  for (int i = 0; i < o.count; ++i) samples.push_back(make_sample(m.float_stack, t, rng));
  save_samples(samples, o.out);
  std::cout << "wrote " << o.out << " samples=" << samples.size() << "\n";
  return kOk;
}

int cmd_quantize(const Options& o) {
  const Model m = load_model(o.model);
  if (m.kind != ModelKind::floating) throw FormatError(o.model + " is already quantized");
  const EntropyStack q = quantize_stack(m.float_stack);
  save_quantized_model(q, o.out);
  std::cout << shift_summary(q);
  return kOk;
}

int cmd_calibrate(const Options& o) {
  const Model m = load_model(o.model);
  const std::vector<LatentSample> data = load_samples(o.data);
  const CalibrationResult r =
      calibrate_shifts(m.float_stack, data, parse_grid(o.grid, m.float_stack));
  emit(r.report.to_text(), o.out);
  if (!o.model_out.empty()) save_float_model(r.stack, o.model_out);
  return kOk;
}

int cmd_verify(const Options& o) {
  const Model m = load_model(o.model);
  const VerifyReport r = verify_stack(int_stack_of(m), o.seed, o.samples, o.height, o.width);
  emit(r.to_text(), o.out);
  return r.passed() ? kOk : kFailed;
}

int cmd_roundtrip(const Options& o) {
  const Model m = load_model(o.model);
  const std::vector<LatentSample> data = load_samples(o.data);
  const std::vector<std::string> names = split(o.variant, ',');
  if (names.empty() || names.size() > 2)
    throw CLI::ValidationError("--variant", "expected ENC or ENC,DEC");
  const PriorMode mode = parse_mode(o.mode);
  const BackendVariant enc = make_variant(parse_order(names.front()), mode);
  const BackendVariant dec = make_variant(parse_order(names.back()), mode);
  const StackPair stacks{m.float_stack, int_stack_of(m)};

  std::ostringstream os;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const InteropReport r = roundtrip_experiment(stacks, data[i], enc, dec);
    failures += !r.decoded_equal;
    os << "sample=" << i << "\n" << r.to_text();
  }
  os << "samples=" << data.size() << "\nfailures=" << failures << "\n";
  emit(os.str(), o.out);
  return failures == 0 ? kOk : kFailed;
}

int cmd_demo_failure(const Options& o) {
  const InteropReport f = boundary_failure_demo(PriorMode::floating);
  const InteropReport q = boundary_failure_demo(PriorMode::integer);
  const bool reproduced = !f.decoded_equal && q.decoded_equal;
  std::ostringstream os;
  os << "[float]\n" << f.to_text() << "[int]\n" << q.to_text()
     << "reproduced=" << (reproduced ? "true" : "false") << "\n";
  emit(os.str(), o.out);
  return reproduced ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"detq: deterministic integer entropy-model tools"};
  app.require_subcommand(1);
  Options o;
  int (*run)(const Options&) = nullptr;

  auto seed = [&o](CLI::App* c) { c->add_option("--seed", o.seed, "random seed"); };

  CLI::App* gm = app.add_subcommand("gen-model", "write a seeded random float model");
  seed(gm);
  gm->add_option("--out", o.out, "manifest path")->required();
  gm->add_option("--kind", o.kind, "random, zero or pathological")
      ->check(CLI::IsMember({"random", "zero", "pathological"}));
  gm->callback([&] { run = cmd_gen_model; });

  CLI::App* gd = app.add_subcommand("gen-data", "sample latents from a model's priors");
  seed(gd);
  gd->add_option("--model", o.model, "model manifest")->required()->check(CLI::ExistingFile);
  gd->add_option("--out", o.out, "data file")->required();
  gd->add_option("--count", o.count, "number of samples")->check(CLI::PositiveNumber);
  gd->add_option("--height", o.height)->check(CLI::PositiveNumber);
  gd->add_option("--width", o.width)->check(CLI::PositiveNumber);
  gd->callback([&] { run = cmd_gen_data; });

  CLI::App* qz = app.add_subcommand("quantize", "quantize a float model");
  qz->add_option("model", o.model, "float model manifest")->required()->check(CLI::ExistingFile);
  qz->add_option("--out", o.out, "quantized manifest")->required();
  qz->callback([&] { run = cmd_quantize; });

  CLI::App* cb = app.add_subcommand("calibrate", "search per-layer activation shifts");
  cb->add_option("model", o.model, "float model manifest")->required()->check(CLI::ExistingFile);
  cb->add_option("data", o.data, "calibration data")->required()->check(CLI::ExistingFile);
  cb->add_option("--grid", o.grid, "'default' or comma-separated shifts for every layer");
  cb->add_option("--out", o.out, "report path");
  cb->add_option("--model-out", o.model_out, "float manifest with the chosen shifts");
  cb->callback([&] { run = cmd_calibrate; });

  CLI::App* vf = app.add_subcommand("verify", "overflow and order-invariance audit");
  seed(vf);
  vf->add_option("model", o.model, "model manifest")->required()->check(CLI::ExistingFile);
  vf->add_option("--samples", o.samples, "random inputs for the order check")
      ->check(CLI::NonNegativeNumber);
  vf->add_option("--height", o.height)->check(CLI::PositiveNumber);
  vf->add_option("--width", o.width)->check(CLI::PositiveNumber);
  vf->add_option("--out", o.out, "report path");
  vf->callback([&] { run = cmd_verify; });

  CLI::App* rt = app.add_subcommand("roundtrip", "encode and decode every sample");
  rt->add_option("model", o.model, "model manifest")->required()->check(CLI::ExistingFile);
  rt->add_option("data", o.data, "data file")->required()->check(CLI::ExistingFile);
  rt->add_option("--variant", o.variant, "encoder order, or ENC,DEC (seq, rev, tree)");
  rt->add_option("--mode", o.mode, "prior arithmetic: float or int")
      ->check(CLI::IsMember({"float", "int"}));
  rt->add_option("--out", o.out, "report path");
  rt->callback([&] { run = cmd_roundtrip; });

  CLI::App* dm = app.add_subcommand("demo-failure", "float priors fail at a table boundary");
  dm->add_option("--out", o.out, "report path");
  dm->callback([&] { run = cmd_demo_failure; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadInput;
  }

  try {
    return run(o);
  } catch (const CLI::ParseError& e) {
    std::cerr << "detq: " << e.what() << "\n";
    return kBadInput;
  } catch (const RepresentabilityError& e) {
    std::cerr << "detq: not representable: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "detq: " << e.what() << "\n";
    return kBadInput;
  }
}

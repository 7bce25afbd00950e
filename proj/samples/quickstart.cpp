// Copyright 2026 The detq Authors
// SPDX-License-Identifier: Apache-2.0
//
// Quantize a random entropy model, code one latent with integer priors on
// a "device" that sums in sequential order, and decode it on one that sums
// as a pairwise tree.

#include <cstdio>

#include "detq/detq.hpp"

int main() {
  using namespace detq;

  Rng rng(42);
  const Topology topo;
  const StackPair stacks = StackPair::from_float(make_random_float_stack(topo, rng));
  const LatentSample sample = make_sample(stacks.float_stack, topo, rng);

  const InteropReport r =
      roundtrip_experiment(stacks, sample, AccumulationOrder::sequential,
                           AccumulationOrder::pairwise_tree, PriorMode::integer);
  std::printf("%s", r.to_text().c_str());

  const double bits = integer_cross_entropy_bits(stacks.int_stack, sample);
  std::printf("ideal_bits=%.1f coded_bits=%zu\n", bits, 8 * r.payload_bytes);
  return r.decoded_equal ? 0 : 1;
}

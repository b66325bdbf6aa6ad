#pragma once

// Random small problem instances shared by unit and acceptance tests.

#include "sfc/environment.hpp"
#include "sfc/topology.hpp"

namespace sfc::testing {

struct SmallCase {
  Topology topology;
  SfcRequest request;
};

// N in [3, max_nodes], a few extra edges, K = 3 types with 0..2 instances
// each (so some requests are infeasible), chain length 1..max_chain.
inline SmallCase random_small_case(Rng& rng, int max_nodes = 8, int max_chain = 3) {
  const int n = uniform_int(rng, 3, max_nodes);
  const int max_edges = n * (n - 1) / 2;
  const int m = uniform_int(rng, n - 1, std::min(max_edges, n + 3));
  Topology g = random_topology(n, m, 1, 10, 3, rng);
  std::vector<VnfInstance> inst;
  for (int k = 0; k < 3; ++k) {
    const int copies = uniform_int(rng, 0, 2);
    for (int c = 0; c < copies; ++c) {
      inst.push_back({uniform_int(rng, 0, n - 1), k, uniform_int(rng, 1, 5)});
    }
  }
  Topology t(n, g.edges(), std::move(inst), 3);
  SfcRequest req;
  req.source = uniform_int(rng, 0, n - 1);
  req.destination = uniform_int(rng, 0, n - 1);
  const int len = uniform_int(rng, 1, max_chain);
  for (int i = 0; i < len; ++i) req.chain.push_back(uniform_int(rng, 0, 2));
  return {std::move(t), std::move(req)};
}

// Every simple (node, layer) walk fits in N * (L + 1) steps.
inline int brute_force_budget(const SmallCase& c) {
  return c.topology.node_count() * (static_cast<int>(c.request.chain.size()) + 1);
}

}  // namespace sfc::testing

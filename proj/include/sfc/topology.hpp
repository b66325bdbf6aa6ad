#pragma once

// Network topologies carrying VNF instances: data model, file format,
// the bundled fixture, random generation and the CS1/CS2 mutation strategies.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sfc/common.hpp"

namespace sfc {

struct Edge {
  int u = 0;
  int v = 0;
  int delay = 1;  // ms
  bool operator==(const Edge&) const = default;
};

struct VnfInstance {
  int node = 0;
  int vnf_type = 0;
  int proc_delay = 1;  // ms
  bool operator==(const VnfInstance&) const = default;
  auto operator<=>(const VnfInstance&) const = default;
};

struct Neighbor {
  int node;
  int edge;  // index into Topology::edges()
};

namespace detail {

inline bool connected(int node_count, std::span<const Edge> edges, int skip_edge = -1,
                      int* unreached = nullptr) {
  if (node_count <= 0) return false;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(node_count));
  for (int i = 0; i < static_cast<int>(edges.size()); ++i) {
    if (i == skip_edge) continue;
    adj[edges[i].u].push_back(edges[i].v);
    adj[edges[i].v].push_back(edges[i].u);
  }
  std::vector<char> seen(static_cast<std::size_t>(node_count), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
    }
  }
  for (int u = 0; u < node_count; ++u) {
    if (!seen[u]) {
      if (unreached) *unreached = u;
      return false;
    }
  }
  return true;
}

}  // namespace detail

// Undirected, connected, simple graph G=(N,E,M). Immutable once built; the
// constructor enforces every invariant and throws ValidationError otherwise.
class Topology {
 public:
  Topology(int node_count, std::vector<Edge> edges, std::vector<VnfInstance> instances,
           int vnf_type_count)
      : node_count_(node_count),
        edges_(std::move(edges)),
        instances_(std::move(instances)),
        vnf_type_count_(vnf_type_count) {
    validate();
    adjacency_.assign(static_cast<std::size_t>(node_count_), {});
    for (int i = 0; i < static_cast<int>(edges_.size()); ++i) {
      adjacency_[edges_[i].u].push_back({edges_[i].v, i});
      adjacency_[edges_[i].v].push_back({edges_[i].u, i});
    }
    for (auto& list : adjacency_) {
      std::sort(list.begin(), list.end(),
                [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
    }
    hosted_.assign(static_cast<std::size_t>(node_count_), {});
    for (int i = 0; i < static_cast<int>(instances_.size()); ++i) {
      hosted_[instances_[i].node].push_back(i);
    }
  }

  int node_count() const { return node_count_; }
  int vnf_type_count() const { return vnf_type_count_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<VnfInstance>& instances() const { return instances_; }

  std::span<const Neighbor> neighbors(int u) const { return adjacency_.at(u); }
  int degree(int u) const { return static_cast<int>(adjacency_.at(u).size()); }

  std::optional<int> edge_between(int u, int v) const {
    for (const auto& n : adjacency_.at(u)) {
      if (n.node == v) return n.edge;
    }
    return std::nullopt;
  }

  // Instance indices hosted at node u.
  std::span<const int> instances_at(int u) const { return hosted_.at(u); }

  // Cheapest instance of the given type at u, if any. Ties keep the lower index.
  std::optional<int> best_instance(int u, int vnf_type) const {
    std::optional<int> best;
    for (int i : hosted_.at(u)) {
      const auto& inst = instances_[i];
      if (inst.vnf_type != vnf_type) continue;
      if (!best || inst.proc_delay < instances_[*best].proc_delay) best = i;
    }
    return best;
  }

  bool hosts_type(int u, int vnf_type) const { return best_instance(u, vnf_type).has_value(); }

  int instance_count_of_type(int vnf_type) const {
    return static_cast<int>(std::count_if(instances_.begin(), instances_.end(), [&](const auto& m) {
      return m.vnf_type == vnf_type;
    }));
  }

  bool operator==(const Topology& o) const {
    return node_count_ == o.node_count_ && edges_ == o.edges_ && instances_ == o.instances_ &&
           vnf_type_count_ == o.vnf_type_count_;
  }

 private:
  void validate() const {
    if (node_count_ < 2) {
      throw ValidationError("topology needs at least 2 nodes, got " + std::to_string(node_count_));
    }
    if (vnf_type_count_ < 1) {
      throw ValidationError("vnf_type_count must be >= 1, got " + std::to_string(vnf_type_count_));
    }
    std::vector<std::pair<int, int>> seen;
    seen.reserve(edges_.size());
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const auto& e = edges_[i];
      const std::string where = "edge " + std::to_string(i) + " (" + std::to_string(e.u) + "," +
                                std::to_string(e.v) + ")";
      if (e.u < 0 || e.u >= node_count_ || e.v < 0 || e.v >= node_count_) {
        throw ValidationError(where + ": references a missing node");
      }
      if (e.u == e.v) throw ValidationError(where + ": self-loop");
      if (e.delay <= 0) throw ValidationError(where + ": nonpositive delay");
      seen.emplace_back(std::min(e.u, e.v), std::max(e.u, e.v));
    }
    std::sort(seen.begin(), seen.end());
    if (auto dup = std::adjacent_find(seen.begin(), seen.end()); dup != seen.end()) {
      throw ValidationError("duplicate edge (" + std::to_string(dup->first) + "," +
                            std::to_string(dup->second) + ")");
    }
    for (std::size_t i = 0; i < instances_.size(); ++i) {
      const auto& m = instances_[i];
      const std::string where = "instance " + std::to_string(i);
      if (m.node < 0 || m.node >= node_count_) {
        throw ValidationError(where + ": references missing node " + std::to_string(m.node));
      }
      if (m.vnf_type < 0 || m.vnf_type >= vnf_type_count_) {
        throw ValidationError(where + ": type " + std::to_string(m.vnf_type) + " outside 0.." +
                              std::to_string(vnf_type_count_ - 1));
      }
      if (m.proc_delay <= 0) throw ValidationError(where + ": nonpositive processing delay");
    }
    int unreached = -1;
    if (!detail::connected(node_count_, edges_, -1, &unreached)) {
      throw ValidationError("graph is disconnected: node " + std::to_string(unreached) +
                            " is unreachable from node 0");
    }
  }

  int node_count_;
  std::vector<Edge> edges_;
  std::vector<VnfInstance> instances_;
  int vnf_type_count_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::vector<std::vector<int>> hosted_;
};

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json topology_to_json(const Topology& t) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : t.edges()) edges.push_back({e.u, e.v, e.delay});
  nlohmann::json inst = nlohmann::json::array();
  for (const auto& m : t.instances()) inst.push_back({m.node, m.vnf_type, m.proc_delay});
  return {{"nodes", t.node_count()},
          {"edges", std::move(edges)},
          {"instances", std::move(inst)},
          {"vnf_type_count", t.vnf_type_count()}};
}

inline Topology topology_from_json(const nlohmann::json& doc) {
  auto triple = [](const nlohmann::json& item, const std::string& what) {
    if (!item.is_array() || item.size() != 3 || !item[0].is_number_integer() ||
        !item[1].is_number_integer() || !item[2].is_number_integer()) {
      throw ParseError(what + ": expected [int, int, int], got " + item.dump());
    }
    return std::array<int, 3>{item[0].get<int>(), item[1].get<int>(), item[2].get<int>()};
  };
  if (!doc.is_object()) throw ParseError("topology document must be an object");
  for (const char* key : {"nodes", "edges", "instances", "vnf_type_count"}) {
    if (!doc.contains(key)) throw ParseError(std::string("missing key '") + key + "'");
  }
  if (!doc["nodes"].is_number_integer()) throw ParseError("'nodes' must be an integer count");
  if (!doc["vnf_type_count"].is_number_integer()) {
    throw ParseError("'vnf_type_count' must be an integer");
  }
  if (!doc["edges"].is_array()) throw ParseError("'edges' must be a list");
  if (!doc["instances"].is_array()) throw ParseError("'instances' must be a list");
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < doc["edges"].size(); ++i) {
    auto [u, v, d] = triple(doc["edges"][i], "edge " + std::to_string(i));
    edges.push_back({u, v, d});
  }
  std::vector<VnfInstance> instances;
  for (std::size_t i = 0; i < doc["instances"].size(); ++i) {
    auto [n, k, d] = triple(doc["instances"][i], "instance " + std::to_string(i));
    instances.push_back({n, k, d});
  }
  return Topology(doc["nodes"].get<int>(), std::move(edges), std::move(instances),
                  doc["vnf_type_count"].get<int>());
}

// One edge/instance per line so the files diff cleanly.
inline std::string save_topology(const Topology& t) {
  std::ostringstream os;
  os << "{\n  \"nodes\": " << t.node_count() << ",\n  \"vnf_type_count\": " << t.vnf_type_count()
     << ",\n  \"edges\": [";
  for (std::size_t i = 0; i < t.edges().size(); ++i) {
    const auto& e = t.edges()[i];
    os << (i ? ",\n    " : "\n    ") << "[" << e.u << ", " << e.v << ", " << e.delay << "]";
  }
  os << (t.edges().empty() ? "],\n" : "\n  ],\n") << "  \"instances\": [";
  for (std::size_t i = 0; i < t.instances().size(); ++i) {
    const auto& m = t.instances()[i];
    os << (i ? ",\n    " : "\n    ") << "[" << m.node << ", " << m.vnf_type << ", "
       << m.proc_delay << "]";
  }
  os << (t.instances().empty() ? "]\n}\n" : "\n  ]\n}\n");
  return os.str();
}

inline Topology load_topology(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed topology document: ") + e.what());
  }
  return topology_from_json(doc);
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline Topology load_topology_file(const std::filesystem::path& path) {
  return load_topology(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Bundled fixture: a 12-node internet2-sized topology with K=5 VNF types,
// generated once by `sfcrl topo generate --nodes 12 --edges 16 --per-type 2 --seed 2020`
// and frozen here (also shipped as data/internet2.json).

inline constexpr std::string_view kInternet2Fixture = R"({
  "nodes": 12,
  "vnf_type_count": 5,
  "edges": [
    [1, 0, 9],
    [2, 0, 7],
    [3, 0, 1],
    [4, 0, 5],
    [5, 1, 2],
    [6, 0, 8],
    [7, 6, 1],
    [8, 4, 4],
    [9, 4, 3],
    [10, 0, 1],
    [11, 10, 9],
    [8, 2, 1],
    [8, 5, 1],
    [1, 9, 10],
    [2, 4, 3],
    [7, 8, 2]
  ],
  "instances": [
    [2, 0, 4],
    [6, 0, 2],
    [4, 1, 3],
    [7, 1, 3],
    [2, 2, 5],
    [4, 2, 1],
    [9, 3, 1],
    [1, 3, 3],
    [11, 4, 5],
    [4, 4, 4]
  ]
}
)";

inline Topology internet2_fixture() { return load_topology(kInternet2Fixture); }

// ---------------------------------------------------------------------------

// Square 0/1 matrix, row-major, A[u*N+v] = 1 iff (u,v) is an edge.
inline std::vector<int> adjacency_matrix(const Topology& t) {
  const int n = t.node_count();
  std::vector<int> a(static_cast<std::size_t>(n * n), 0);
  for (const auto& e : t.edges()) {
    a[e.u * n + e.v] = 1;
    a[e.v * n + e.u] = 1;
  }
  return a;
}

struct MutationParams {
  double node_add_prob = 0.1;
  int node_add_trials = 12;
  double edge_add_prob = 0.3;
  int edge_add_trials = 15;
  double edge_remove_prob = 0.3;
  int edge_remove_trials = 30;
  int new_edge_delay_min = 1;
  int new_edge_delay_max = 10;

  static MutationParams none() { return {0, 0, 0, 0, 0, 0, 1, 10}; }

  void validate() const {
    for (double p : {node_add_prob, edge_add_prob, edge_remove_prob}) {
      if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("mutation probability outside [0,1]");
    }
    if (node_add_trials < 0 || edge_add_trials < 0 || edge_remove_trials < 0) {
      throw ValidationError("mutation trial counts must be >= 0");
    }
    if (new_edge_delay_min <= 0 || new_edge_delay_max < new_edge_delay_min) {
      throw ValidationError("invalid new-edge delay range");
    }
  }
};

// Bookkeeping of one mutation, used by the statistical tests.
struct MutationStats {
  int nodes_added = 0;
  int edge_add_fired = 0;     // Bernoulli successes, before pair dismissal
  int edges_added = 0;
  int edge_remove_fired = 0;
  int edges_removed = 0;
  int removals_dismissed = 0;
};

enum class Strategy { CS1, CS2 };

inline std::string to_string(Strategy s) { return s == Strategy::CS1 ? "cs1" : "cs2"; }

inline Strategy parse_strategy(std::string_view name) {
  if (name == "cs1" || name == "CS1") return Strategy::CS1;
  if (name == "cs2" || name == "CS2") return Strategy::CS2;
  throw ValidationError("unknown change strategy '" + std::string(name) + "'");
}

// CS1: random node additions (each wired to two distinct existing nodes), then
// random edge additions between non-adjacent pairs, then random edge removals
// that are dismissed when they would disconnect the graph. Instances untouched.
inline Topology mutate_cs1(const Topology& t, Rng& rng, const MutationParams& p,
                           MutationStats* stats = nullptr) {
  p.validate();
  MutationStats local;
  MutationStats& st = stats ? *stats : local;
  st = {};
  int n = t.node_count();
  std::vector<Edge> edges = t.edges();
  auto new_delay = [&] { return uniform_int(rng, p.new_edge_delay_min, p.new_edge_delay_max); };
  auto adjacent = [&](int a, int b) {
    return std::any_of(edges.begin(), edges.end(), [&](const Edge& e) {
      return (e.u == a && e.v == b) || (e.u == b && e.v == a);
    });
  };

  for (int trial = 0; trial < p.node_add_trials; ++trial) {
    if (!bernoulli(rng, p.node_add_prob)) continue;
    int a = uniform_int(rng, 0, n - 1);
    int b = uniform_int(rng, 0, n - 2);
    if (b >= a) ++b;
    const int fresh = n++;
    edges.push_back({a, fresh, new_delay()});
    edges.push_back({b, fresh, new_delay()});
    ++st.nodes_added;
  }

  for (int trial = 0; trial < p.edge_add_trials; ++trial) {
    if (!bernoulli(rng, p.edge_add_prob)) continue;
    ++st.edge_add_fired;
    int a = uniform_int(rng, 0, n - 1);
    int b = uniform_int(rng, 0, n - 1);
    const int d = new_delay();
    if (a == b || adjacent(a, b)) continue;  // dismissed
    edges.push_back({a, b, d});
    ++st.edges_added;
  }

  for (int trial = 0; trial < p.edge_remove_trials; ++trial) {
    if (!bernoulli(rng, p.edge_remove_prob)) continue;
    ++st.edge_remove_fired;
    const int victim = uniform_int(rng, 0, static_cast<int>(edges.size()) - 1);
    if (!detail::connected(n, edges, victim)) {
      ++st.removals_dismissed;
      continue;
    }
    edges.erase(edges.begin() + victim);
    ++st.edges_removed;
  }

  return Topology(n, std::move(edges), t.instances(), t.vnf_type_count());
}

// Moves every instance to a uniformly chosen node; types and delays are kept.
inline Topology relocate_instances(const Topology& t, Rng& rng) {
  std::vector<VnfInstance> moved = t.instances();
  for (auto& m : moved) m.node = uniform_int(rng, 0, t.node_count() - 1);
  return Topology(t.node_count(), t.edges(), std::move(moved), t.vnf_type_count());
}

// CS2: CS1 followed by relocation of every VNF instance.
inline Topology mutate_cs2(const Topology& t, Rng& rng, const MutationParams& p,
                           MutationStats* stats = nullptr) {
  Topology mutated = mutate_cs1(t, rng, p, stats);
  return relocate_instances(mutated, rng);
}

inline Topology mutate(const Topology& t, Strategy s, Rng& rng, const MutationParams& p) {
  return s == Strategy::CS1 ? mutate_cs1(t, rng, p) : mutate_cs2(t, rng, p);
}

// Places per_type_count instances of each of K types on distinct uniformly
// chosen nodes (distinct within a type). Existing instances are replaced.
inline Topology deploy_vnfs(const Topology& t, int per_type_count, int proc_delay_min,
                            int proc_delay_max, int vnf_type_count, Rng& rng) {
  if (proc_delay_min <= 0 || proc_delay_max < proc_delay_min) {
    throw ValidationError("invalid processing delay range [" + std::to_string(proc_delay_min) +
                          ", " + std::to_string(proc_delay_max) + "]");
  }
  if (per_type_count < 0 || per_type_count > t.node_count()) {
    throw ValidationError("per_type_count " + std::to_string(per_type_count) +
                          " exceeds node count " + std::to_string(t.node_count()));
  }
  std::vector<VnfInstance> instances;
  std::vector<int> nodes(static_cast<std::size_t>(t.node_count()));
  for (int k = 0; k < vnf_type_count; ++k) {
    std::iota(nodes.begin(), nodes.end(), 0);
    // partial Fisher-Yates
    for (int i = 0; i < per_type_count; ++i) {
      int j = uniform_int(rng, i, t.node_count() - 1);
      std::swap(nodes[i], nodes[j]);
      instances.push_back({nodes[i], k, uniform_int(rng, proc_delay_min, proc_delay_max)});
    }
  }
  return Topology(t.node_count(), t.edges(), std::move(instances), vnf_type_count);
}

// Random connected simple graph: a random spanning tree (each node attaches to
// an earlier one) plus extra edges between non-adjacent pairs. No instances
// are placed; instance-free topologies still need vnf_type_count >= 1.
inline Topology random_topology(int node_count, int edge_count, int delay_min, int delay_max,
                                int vnf_type_count, Rng& rng) {
  const int max_edges = node_count * (node_count - 1) / 2;
  if (node_count < 2 || edge_count < node_count - 1 || edge_count > max_edges) {
    throw ValidationError("cannot build a connected simple graph with " +
                          std::to_string(node_count) + " nodes and " + std::to_string(edge_count) +
                          " edges");
  }
  std::vector<Edge> edges;
  std::vector<std::vector<char>> adj(node_count, std::vector<char>(node_count, 0));
  for (int v = 1; v < node_count; ++v) {
    int u = uniform_int(rng, 0, v - 1);
    edges.push_back({v, u, uniform_int(rng, delay_min, delay_max)});
    adj[u][v] = adj[v][u] = 1;
  }
  while (static_cast<int>(edges.size()) < edge_count) {
    int a = uniform_int(rng, 0, node_count - 1);
    int b = uniform_int(rng, 0, node_count - 1);
    if (a == b || adj[a][b]) continue;
    edges.push_back({a, b, uniform_int(rng, delay_min, delay_max)});
    adj[a][b] = adj[b][a] = 1;
  }
  return Topology(node_count, std::move(edges), {}, vnf_type_count);
}

// ---------------------------------------------------------------------------
// Pools

struct TopologyPool {
  Topology base;
  std::vector<Topology> variants;
  Strategy strategy = Strategy::CS1;
  std::uint64_t seed = 0;
};

// Variant i is mutate(base) under an RNG derived from (seed, i).
inline TopologyPool generate_pool(const Topology& base, Strategy strategy, int pool_size,
                                  std::uint64_t seed, const MutationParams& p = {}) {
  if (pool_size < 1) throw ValidationError("pool_size must be >= 1");
  TopologyPool pool{base, {}, strategy, seed};
  pool.variants.reserve(static_cast<std::size_t>(pool_size));
  for (int i = 0; i < pool_size; ++i) {
    Rng rng = derive_rng(seed, static_cast<std::uint64_t>(i));
    pool.variants.push_back(mutate(base, strategy, rng, p));
  }
  return pool;
}

inline std::string topology_hash(const Topology& t) {
  std::ostringstream os;
  os << std::hex << fnv1a(save_topology(t));
  return os.str();
}

inline std::string pool_member_name(std::size_t i) {
  std::ostringstream os;
  os << "topo_" << std::setw(3) << std::setfill('0') << i << ".json";
  return os.str();
}

inline void save_pool(const TopologyPool& pool, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "base.json", save_topology(pool.base));
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t i = 0; i < pool.variants.size(); ++i) {
    write_text_file(dir / pool_member_name(i), save_topology(pool.variants[i]));
    files.push_back(pool_member_name(i));
  }
  nlohmann::ordered_json manifest;
  manifest["base_hash"] = topology_hash(pool.base);
  manifest["strategy"] = to_string(pool.strategy);
  manifest["seed"] = pool.seed;
  manifest["pool_size"] = pool.variants.size();
  manifest["files"] = files;
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline TopologyPool load_pool(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) {
    throw std::runtime_error("missing pool manifest " + manifest_path.string());
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed pool manifest: ") + e.what());
  }
  TopologyPool pool{load_topology_file(dir / "base.json"), {},
                    parse_strategy(manifest.at("strategy").get<std::string>()),
                    manifest.at("seed").get<std::uint64_t>()};
  if (topology_hash(pool.base) != manifest.at("base_hash").get<std::string>()) {
    throw ValidationError("pool base.json does not match the manifest base_hash");
  }
  for (const auto& f : manifest.at("files")) {
    pool.variants.push_back(load_topology_file(dir / f.get<std::string>()));
  }
  return pool;
}

}  // namespace sfc

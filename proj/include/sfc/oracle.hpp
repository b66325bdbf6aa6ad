#pragma once

// Exact delay-optimal SFC solver over the layered product graph
// (node x chain-progress), expressed in the environment's action vocabulary,
// plus an exhaustive search used to cross-check it.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <queue>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "sfc/environment.hpp"
#include "sfc/topology.hpp"

namespace sfc {

struct OracleResult {
  bool feasible = false;
  long optimal_delay = 0;
  std::vector<Action> actions;
  PathResult path;
};

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Cost {
  long delay = std::numeric_limits<long>::max();
  int steps = std::numeric_limits<int>::max();
  bool finite() const { return delay != std::numeric_limits<long>::max(); }
  auto operator<=>(const Cost&) const = default;
};

inline Cost plus(Cost c, long delay) { return {c.delay + delay, c.steps + 1}; }

// Rebuilds the PathResult of an action sequence without the step budget.
inline PathResult trace_actions(const Topology& t, const SfcRequest& req,
                                std::span<const Action> actions) {
  PathResult p;
  p.walk.push_back(req.source);
  int node = req.source;
  std::size_t k = 0;
  for (const auto& a : actions) {
    const int e = *t.edge_between(node, a.next_node);
    p.edge_uses.push_back(e);
    p.total_delay += t.edges()[e].delay;
    node = a.next_node;
    p.walk.push_back(node);
    if (a.process) {
      const int m = *t.best_instance(node, req.chain[k++]);
      p.instance_uses.push_back(m);
      p.total_delay += t.instances()[m].proc_delay;
    }
  }
  p.success = node == req.destination && k == req.chain.size();
  return p;
}

}  // namespace detail

// Layered states are (node, layer) with layer = chain entries processed.
// A transition is one environment action: move u->v (cost d_uv, same layer),
// or move u->v and process chain[layer] at v (cost d_uv + cheapest d_m, layer+1).
// Among equal-delay optima the fewest-step path wins, then the
// lexicographically smallest node sequence.
inline OracleResult solve_optimal(const Topology& t, const SfcRequest& req) {
  validate_request(t, req, true);
  using detail::Cost;
  const int n = t.node_count();
  const int layers = static_cast<int>(req.chain.size());
  const int states = n * (layers + 1);
  auto id = [n](int node, int layer) { return layer * n + node; };
  const int goal = id(req.destination, layers);
  const int start = id(req.source, 0);

  // proc[layer][v]: cheapest processing delay of chain[layer] at v, or -1
  std::vector<std::vector<long>> proc(static_cast<std::size_t>(layers),
                                      std::vector<long>(static_cast<std::size_t>(n), -1));
  for (int k = 0; k < layers; ++k) {
    for (int v = 0; v < n; ++v) {
      if (auto m = t.best_instance(v, req.chain[k])) proc[k][v] = t.instances()[*m].proc_delay;
    }
  }

  // Reverse Dijkstra: cost-to-goal for every layered state.
  std::vector<Cost> to_goal(static_cast<std::size_t>(states));
  using Item = std::tuple<long, int, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  to_goal[goal] = {0, 0};
  heap.emplace(0, 0, goal);
  while (!heap.empty()) {
    auto [d, s, sid] = heap.top();
    heap.pop();
    if (Cost{d, s} != to_goal[sid]) continue;
    const int v = sid % n;
    const int k = sid / n;
    auto relax = [&](int pred, long w) {
      Cost c = detail::plus(to_goal[sid], w);
      if (c < to_goal[pred]) {
        to_goal[pred] = c;
        heap.emplace(c.delay, c.steps, pred);
      }
    };
    for (const auto& nb : t.neighbors(v)) {
      const long d_uv = t.edges()[nb.edge].delay;
      relax(id(nb.node, k), d_uv);
      if (k >= 1 && proc[k - 1][v] >= 0) relax(id(nb.node, k - 1), d_uv + proc[k - 1][v]);
    }
  }

  OracleResult result;
  if (!to_goal[start].finite()) return result;
  result.feasible = true;
  result.optimal_delay = to_goal[start].delay;

  // Forward walk over the set of states reachable by the lexicographically
  // smallest optimal prefix; all optimal paths share the same step count.
  struct Back {
    int prev;
    Action action;
  };
  std::vector<std::map<int, Back>> frontier_back;
  std::vector<int> frontier{start};
  while (frontier.front() != goal) {
    int best_node = std::numeric_limits<int>::max();
    std::map<int, Back> next;
    for (int sid : frontier) {
      const int u = sid % n;
      const int k = sid / n;
      for (const auto& nb : t.neighbors(u)) {
        const long d_uv = t.edges()[nb.edge].delay;
        auto consider = [&](int target, long w, bool process) {
          if (!to_goal[target].finite()) return;
          if (detail::plus(to_goal[target], w) != to_goal[sid]) return;
          if (nb.node < best_node) {
            best_node = nb.node;
            next.clear();
          }
          if (nb.node == best_node) next.try_emplace(target, Back{sid, {nb.node, process}});
        };
        consider(id(nb.node, k), d_uv, false);
        if (k < layers && proc[k][nb.node] >= 0) {
          consider(id(nb.node, k + 1), d_uv + proc[k][nb.node], true);
        }
      }
    }
    frontier.clear();
    for (const auto& [sid, back] : next) frontier.push_back(sid);
    frontier_back.push_back(std::move(next));
  }
  int cur = goal;
  result.actions.resize(frontier_back.size());
  for (std::size_t i = frontier_back.size(); i-- > 0;) {
    const Back& b = frontier_back[i].at(cur);
    result.actions[i] = b.action;
    cur = b.prev;
  }
  result.path = detail::trace_actions(t, req, result.actions);
  return result;
}

// Exhaustive depth-first enumeration of action sequences up to walk_budget
// steps. Walks that revisit a (node, layer) state or cannot beat the best
// delay found so far are cut. Throws BudgetExceeded after max_expansions.
inline OracleResult brute_force_optimal(const Topology& t, const SfcRequest& req, int walk_budget,
                                        std::int64_t max_expansions = 50'000'000) {
  validate_request(t, req, true);
  const int n = t.node_count();
  const int layers = static_cast<int>(req.chain.size());
  OracleResult best;
  if (req.source == req.destination && layers == 0) {
    best.feasible = true;
    best.path = detail::trace_actions(t, req, {});
    return best;
  }
  long best_delay = std::numeric_limits<long>::max();
  std::vector<Action> stack;
  std::vector<char> on_path(static_cast<std::size_t>(n * (layers + 1)), 0);
  std::int64_t expansions = 0;

  auto dfs = [&](auto&& self, int u, int k, long delay) -> void {
    if (++expansions > max_expansions) {
      throw BudgetExceeded("brute force exceeded " + std::to_string(max_expansions) +
                           " expansions");
    }
    if (static_cast<int>(stack.size()) >= walk_budget) return;
    for (const auto& nb : t.neighbors(u)) {
      const long d_uv = t.edges()[nb.edge].delay;
      for (int process = 0; process <= 1; ++process) {
        long d = delay + d_uv;
        int k2 = k;
        if (process) {
          if (k >= layers) continue;
          auto m = t.best_instance(nb.node, req.chain[k]);
          if (!m) continue;
          d += t.instances()[*m].proc_delay;
          ++k2;
        }
        if (d >= best_delay) continue;
        const int sid = k2 * n + nb.node;
        if (on_path[sid]) continue;
        stack.push_back({nb.node, process == 1});
        if (nb.node == req.destination && k2 == layers) {
          best_delay = d;
          best.actions = stack;
        } else {
          on_path[sid] = 1;
          self(self, nb.node, k2, d);
          on_path[sid] = 0;
        }
        stack.pop_back();
      }
    }
  };
  on_path[req.source] = 1;
  dfs(dfs, req.source, 0, 0);
  if (best_delay == std::numeric_limits<long>::max()) return best;
  best.feasible = true;
  best.optimal_delay = best_delay;
  best.path = detail::trace_actions(t, req, best.actions);
  return best;
}

// ---------------------------------------------------------------------------
// Labeled datasets

struct LabeledEntry {
  int topology_id = 0;
  SfcRequest request;
  std::vector<Action> actions;
  long optimal_delay = 0;
};

struct LabeledDataset {
  std::vector<LabeledEntry> entries;
  int dropped = 0;  // infeasible, or optimum longer than the step budget
};

struct TopologyRequest {
  int topology_id = 0;
  SfcRequest request;
};

inline LabeledDataset label_dataset(std::span<const Topology> topologies,
                                    std::span<const TopologyRequest> requests) {
  LabeledDataset ds;
  for (const auto& item : requests) {
    const Topology& t = topologies[static_cast<std::size_t>(item.topology_id)];
    OracleResult r = solve_optimal(t, item.request);
    if (!r.feasible ||
        static_cast<int>(r.actions.size()) > default_max_steps(t, item.request)) {
      ++ds.dropped;
      continue;
    }
    ds.entries.push_back({item.topology_id, item.request, std::move(r.actions), r.optimal_delay});
  }
  return ds;
}

inline LabeledDataset label_dataset(const Topology& t, std::span<const SfcRequest> requests) {
  std::vector<TopologyRequest> items;
  for (const auto& r : requests) items.push_back({0, r});
  return label_dataset(std::span<const Topology>(&t, 1), items);
}

// Each request picks its topology uniformly from the pool.
inline std::vector<TopologyRequest> generate_pool_requests(std::span<const Topology> topologies,
                                                           int count, ChainLengthRange lengths,
                                                           Rng& rng) {
  std::vector<TopologyRequest> out;
  for (int i = 0; i < count; ++i) {
    const int id = uniform_int(rng, 0, static_cast<int>(topologies.size()) - 1);
    auto one = generate_requests(topologies[id], 1, lengths, rng);
    out.push_back({id, std::move(one.front())});
  }
  return out;
}

inline std::string save_dataset(const LabeledDataset& ds) {
  std::string out;
  for (const auto& e : ds.entries) {
    nlohmann::ordered_json j;
    j["topology_id"] = e.topology_id;
    j["request"] = {{"source", e.request.source},
                    {"destination", e.request.destination},
                    {"chain", e.request.chain}};
    nlohmann::json acts = nlohmann::json::array();
    for (const auto& a : e.actions) acts.push_back({a.next_node, a.process ? 1 : 0});
    j["action_sequence"] = acts;
    j["optimal_delay"] = e.optimal_delay;
    out += j.dump() + "\n";
  }
  return out;
}

inline LabeledDataset load_dataset(std::string_view text) {
  LabeledDataset ds;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      LabeledEntry e;
      e.topology_id = j.at("topology_id").get<int>();
      e.request = request_from_json(j.at("request"));
      for (const auto& a : j.at("action_sequence")) {
        e.actions.push_back({a.at(0).get<int>(), a.at(1).get<int>() != 0});
      }
      e.optimal_delay = j.at("optimal_delay").get<long>();
      ds.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return ds;
}

}  // namespace sfc

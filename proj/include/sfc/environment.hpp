#pragma once

// Episode semantics of SFC path generation: requests, masked actions,
// delay accounting and the sparse terminal reward.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfc/common.hpp"
#include "sfc/topology.hpp"

namespace sfc {

struct SfcRequest {
  int source = 0;
  int destination = 0;
  std::vector<int> chain;  // V_all, in processing order
  bool operator==(const SfcRequest&) const = default;
};

struct Action {
  int next_node = 0;
  bool process = false;
  bool operator==(const Action&) const = default;
  auto operator<=>(const Action&) const = default;
};

struct PathResult {
  std::vector<int> walk;           // visited nodes, source first
  std::vector<int> edge_uses;      // edge indices, with multiplicity
  std::vector<int> instance_uses;  // instance indices, in processing order
  long total_delay = 0;
  bool success = false;
  bool operator==(const PathResult&) const = default;
};

struct RewardConfig {
  double success_base = 10000.0;
  double lambda = 0.0;
};

struct EnvState {
  SfcRequest request;
  int current_node = 0;
  int chain_index = 0;
  int steps_taken = 0;
  int max_steps = 0;
  PathResult path;
  bool done = false;

  bool chain_complete() const { return chain_index >= static_cast<int>(request.chain.size()); }
  // Top-priority VNF type, or -1 once the chain is processed.
  int v_now() const { return chain_complete() ? -1 : request.chain[chain_index]; }
};

struct StepResult {
  EnvState state;
  double reward = 0.0;
  bool done = false;
};

// Step budget when the caller does not choose one: a few graph diameters
// worth of detours plus two moves per chain entry.
inline int default_max_steps(const Topology& t, const SfcRequest& req) {
  return 3 * t.node_count() + 2 * static_cast<int>(req.chain.size());
}

inline void validate_request(const Topology& t, const SfcRequest& req, bool allow_empty_chain) {
  auto bad_node = [&](int u) { return u < 0 || u >= t.node_count(); };
  if (bad_node(req.source)) {
    throw ValidationError("request source " + std::to_string(req.source) + " is not a node");
  }
  if (bad_node(req.destination)) {
    throw ValidationError("request destination " + std::to_string(req.destination) +
                          " is not a node");
  }
  if (req.chain.empty() && !allow_empty_chain) {
    throw ValidationError("request chain must contain at least one VNF type");
  }
  for (int k : req.chain) {
    if (k < 0 || k >= t.vnf_type_count()) {
      throw ValidationError("request chain type " + std::to_string(k) + " outside 0.." +
                            std::to_string(t.vnf_type_count() - 1));
    }
  }
}

inline EnvState reset(const Topology& t, const SfcRequest& req, int max_steps) {
  validate_request(t, req, false);
  if (max_steps < 1) throw ValidationError("max_steps must be >= 1");
  EnvState s;
  s.request = req;
  s.current_node = req.source;
  s.max_steps = max_steps;
  s.path.walk.push_back(req.source);
  return s;
}

inline EnvState reset(const Topology& t, const SfcRequest& req) {
  return reset(t, req, default_max_steps(t, req));
}

// Every neighbor without processing, plus processing at neighbors hosting V_now.
// Ordered by (node, process).
inline std::vector<Action> valid_actions(const EnvState& s, const Topology& t) {
  if (s.done) throw std::logic_error("valid_actions called on a finished episode");
  std::vector<Action> out;
  const int want = s.v_now();
  for (const auto& n : t.neighbors(s.current_node)) {
    out.push_back({n.node, false});
    if (want >= 0 && t.hosts_type(n.node, want)) out.push_back({n.node, true});
  }
  return out;
}

inline bool is_valid_action(const EnvState& s, const Topology& t, const Action& a) {
  if (s.done || !t.edge_between(s.current_node, a.next_node)) return false;
  if (!a.process) return true;
  return s.v_now() >= 0 && t.hosts_type(a.next_node, s.v_now());
}

inline StepResult step(const EnvState& s, const Action& a, const Topology& t,
                       const RewardConfig& cfg) {
  if (!is_valid_action(s, t, a)) {
    throw std::logic_error("invalid action (" + std::to_string(a.next_node) +
                           (a.process ? ", process" : ", forward") + ") from node " +
                           std::to_string(s.current_node));
  }
  StepResult r{s, 0.0, false};
  EnvState& n = r.state;
  const int edge = *t.edge_between(s.current_node, a.next_node);
  n.path.edge_uses.push_back(edge);
  n.path.total_delay += t.edges()[edge].delay;
  n.current_node = a.next_node;
  n.path.walk.push_back(a.next_node);
  if (a.process) {
    const int inst = *t.best_instance(a.next_node, s.v_now());
    n.path.instance_uses.push_back(inst);
    n.path.total_delay += t.instances()[inst].proc_delay;
    ++n.chain_index;
  }
  ++n.steps_taken;
  if (n.current_node == n.request.destination && n.chain_complete()) {
    n.done = true;
    n.path.success = true;
    r.reward = cfg.success_base - cfg.lambda * static_cast<double>(n.path.total_delay);
  } else if (n.steps_taken >= n.max_steps) {
    n.done = true;
  }
  r.done = n.done;
  return r;
}

// Delay of a path recomputed from its indicators: sum of traversed edge delays
// (with multiplicity) plus processed instance delays.
inline long total_delay(const PathResult& p, const Topology& t) {
  long sum = 0;
  for (int e : p.edge_uses) {
    if (e < 0 || e >= static_cast<int>(t.edges().size())) {
      throw ValidationError("path references missing edge " + std::to_string(e));
    }
    sum += t.edges()[e].delay;
  }
  for (int m : p.instance_uses) {
    if (m < 0 || m >= static_cast<int>(t.instances().size())) {
      throw ValidationError("path references missing instance " + std::to_string(m));
    }
    sum += t.instances()[m].proc_delay;
  }
  return sum;
}

struct ChainLengthRange {
  int min = 1;
  int max = 4;
};

// Uniform distinct (source, destination) pairs; chain entries uniform over the
// types that have at least one instance in t.
inline std::vector<SfcRequest> generate_requests(const Topology& t, int count,
                                                 ChainLengthRange lengths, Rng& rng) {
  if (lengths.min < 1 || lengths.max < lengths.min) {
    throw ValidationError("invalid chain length range");
  }
  std::vector<int> present;
  for (int k = 0; k < t.vnf_type_count(); ++k) {
    if (t.instance_count_of_type(k) > 0) present.push_back(k);
  }
  if (present.empty() && count > 0) {
    throw ValidationError("topology has no deployed VNF type to request");
  }
  std::vector<SfcRequest> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    SfcRequest r;
    r.source = uniform_int(rng, 0, t.node_count() - 1);
    r.destination = uniform_int(rng, 0, t.node_count() - 2);
    if (r.destination >= r.source) ++r.destination;
    const int len = uniform_int(rng, lengths.min, lengths.max);
    for (int j = 0; j < len; ++j) {
      r.chain.push_back(present[uniform_int(rng, 0, static_cast<int>(present.size()) - 1)]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

inline nlohmann::json request_to_json(const SfcRequest& r) {
  return {{"source", r.source}, {"destination", r.destination}, {"chain", r.chain}};
}

inline SfcRequest request_from_json(const nlohmann::json& j) {
  try {
    return {j.at("source").get<int>(), j.at("destination").get<int>(),
            j.at("chain").get<std::vector<int>>()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed request record: ") + e.what());
  }
}

inline std::string save_requests(const std::vector<SfcRequest>& reqs) {
  std::string out = "[\n";
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    out += "  " + request_to_json(reqs[i]).dump() + (i + 1 < reqs.size() ? ",\n" : "\n");
  }
  return out + "]\n";
}

inline std::vector<SfcRequest> load_requests(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed request file: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("request file must be a list");
  std::vector<SfcRequest> out;
  for (const auto& j : doc) out.push_back(request_from_json(j));
  return out;
}

// Debug log, one JSON object per transition.
class EpisodeLog {
 public:
  explicit EpisodeLog(std::ostream& os) : os_(os) {}

  void record(const StepResult& r, const Action& a) {
    nlohmann::ordered_json j;
    j["step"] = r.state.steps_taken;
    j["node"] = r.state.current_node;
    j["action"] = {{"next_node", a.next_node}, {"process", a.process}};
    j["reward"] = r.reward;
    j["cumulative_delay"] = r.state.path.total_delay;
    os_ << j.dump() << '\n';
  }

 private:
  std::ostream& os_;
};

}  // namespace sfc

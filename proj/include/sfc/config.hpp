#pragma once

// JSON documents for hyperparameters, architecture, mutation parameters and
// the command configs built from them. Unknown keys are rejected so a typo
// cannot silently fall back to a default.

#include <initializer_list>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "sfc/policy.hpp"
#include "sfc/topology.hpp"
#include "sfc/training.hpp"

namespace sfc {

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                           const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  const std::set<std::string> names(known.begin(), known.end());
  for (const auto& [key, _] : j.items()) {
    if (!names.contains(key)) throw ParseError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(where + ": bad value for '" + key + "'");
  }
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const HyperParams& hp) {
  nlohmann::ordered_json j;
  j["alpha_sl"] = hp.alpha_sl;
  j["alpha_rl"] = hp.alpha_rl;
  j["gamma"] = hp.gamma;
  j["epsilon"] = hp.epsilon;
  j["lambda"] = hp.lambda;
  j["episodes"] = hp.episodes;
  j["sl_epochs"] = hp.sl_epochs;
  j["seed"] = hp.seed;
  j["rolling_window"] = hp.rolling_window;
  j["chain_min"] = hp.chain_lengths.min;
  j["chain_max"] = hp.chain_lengths.max;
  j["normalize_reward"] = hp.normalize_reward;
  return j;
}

inline HyperParams hyperparams_from_json(const nlohmann::json& j, HyperParams hp = {}) {
  const std::string where = "hyperparams";
  detail::reject_unknown(j,
                         {"alpha_sl", "alpha_rl", "gamma", "epsilon", "lambda", "episodes",
                          "sl_epochs", "seed", "rolling_window", "chain_min", "chain_max",
                          "normalize_reward"},
                         where);
  detail::read_opt(j, "alpha_sl", hp.alpha_sl, where);
  detail::read_opt(j, "alpha_rl", hp.alpha_rl, where);
  detail::read_opt(j, "gamma", hp.gamma, where);
  detail::read_opt(j, "epsilon", hp.epsilon, where);
  detail::read_opt(j, "lambda", hp.lambda, where);
  detail::read_opt(j, "episodes", hp.episodes, where);
  detail::read_opt(j, "sl_epochs", hp.sl_epochs, where);
  detail::read_opt(j, "seed", hp.seed, where);
  detail::read_opt(j, "rolling_window", hp.rolling_window, where);
  detail::read_opt(j, "chain_min", hp.chain_lengths.min, where);
  detail::read_opt(j, "chain_max", hp.chain_lengths.max, where);
  detail::read_opt(j, "normalize_reward", hp.normalize_reward, where);
  hp.validate();
  return hp;
}

inline nlohmann::ordered_json to_json(const PolicyConfig& c) {
  nlohmann::ordered_json j;
  j["K"] = c.vnf_types;
  j["hidden_dim"] = c.hidden_dim;
  j["decoder_dim"] = c.decoder_dim;
  j["scorer_dim"] = c.scorer_dim;
  j["propagation_steps"] = c.prop_steps;
  return j;
}

inline PolicyConfig policy_config_from_json(const nlohmann::json& j, PolicyConfig c = {}) {
  const std::string where = "policy";
  detail::reject_unknown(j, {"K", "hidden_dim", "decoder_dim", "scorer_dim", "propagation_steps"},
                         where);
  detail::read_opt(j, "K", c.vnf_types, where);
  detail::read_opt(j, "hidden_dim", c.hidden_dim, where);
  detail::read_opt(j, "decoder_dim", c.decoder_dim, where);
  detail::read_opt(j, "scorer_dim", c.scorer_dim, where);
  detail::read_opt(j, "propagation_steps", c.prop_steps, where);
  c.validate();
  return c;
}

inline nlohmann::ordered_json to_json(const MutationParams& p) {
  nlohmann::ordered_json j;
  j["node_add_prob"] = p.node_add_prob;
  j["node_add_trials"] = p.node_add_trials;
  j["edge_add_prob"] = p.edge_add_prob;
  j["edge_add_trials"] = p.edge_add_trials;
  j["edge_remove_prob"] = p.edge_remove_prob;
  j["edge_remove_trials"] = p.edge_remove_trials;
  j["new_edge_delay_min"] = p.new_edge_delay_min;
  j["new_edge_delay_max"] = p.new_edge_delay_max;
  return j;
}

inline MutationParams mutation_params_from_json(const nlohmann::json& j, MutationParams p = {}) {
  const std::string where = "mutation";
  detail::reject_unknown(j,
                         {"node_add_prob", "node_add_trials", "edge_add_prob", "edge_add_trials",
                          "edge_remove_prob", "edge_remove_trials", "new_edge_delay_min",
                          "new_edge_delay_max"},
                         where);
  detail::read_opt(j, "node_add_prob", p.node_add_prob, where);
  detail::read_opt(j, "node_add_trials", p.node_add_trials, where);
  detail::read_opt(j, "edge_add_prob", p.edge_add_prob, where);
  detail::read_opt(j, "edge_add_trials", p.edge_add_trials, where);
  detail::read_opt(j, "edge_remove_prob", p.edge_remove_prob, where);
  detail::read_opt(j, "edge_remove_trials", p.edge_remove_trials, where);
  detail::read_opt(j, "new_edge_delay_min", p.new_edge_delay_min, where);
  detail::read_opt(j, "new_edge_delay_max", p.new_edge_delay_max, where);
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// `train sl|rl` configs

struct TrainConfig {
  HyperParams hp;
  PolicyConfig policy;
  std::string topology;  // empty: the built-in fixture
  std::string pool;      // rl: draw episodes from this pool directory instead
  std::string dataset;   // sl: labeled dataset path
  int heldout_requests = 500;
  std::uint64_t heldout_seed = 99;
};

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["hyperparams"] = to_json(c.hp);
  j["policy"] = to_json(c.policy);
  j["topology"] = c.topology;
  j["pool"] = c.pool;
  j["dataset"] = c.dataset;
  j["heldout_requests"] = c.heldout_requests;
  j["heldout_seed"] = c.heldout_seed;
  return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  const std::string where = "train config";
  detail::reject_unknown(j,
                         {"hyperparams", "policy", "topology", "pool", "dataset",
                          "heldout_requests", "heldout_seed"},
                         where);
  TrainConfig c;
  if (j.contains("hyperparams")) c.hp = hyperparams_from_json(j.at("hyperparams"));
  if (j.contains("policy")) c.policy = policy_config_from_json(j.at("policy"));
  detail::read_opt(j, "topology", c.topology, where);
  detail::read_opt(j, "pool", c.pool, where);
  detail::read_opt(j, "dataset", c.dataset, where);
  detail::read_opt(j, "heldout_requests", c.heldout_requests, where);
  detail::read_opt(j, "heldout_seed", c.heldout_seed, where);
  if (c.heldout_requests < 0) throw ValidationError("heldout_requests must be >= 0");
  return c;
}

inline nlohmann::json parse_json_document(std::string_view text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("malformed " + what + ": " + e.what());
  }
}

}  // namespace sfc

#pragma once

// GG-RNN policy. A gated graph network encodes the topology into per-node
// embeddings; a GRU decoder consumes the remaining chain (V_all), the next
// type to process (V_now) and the current node's embedding, then scores every
// node with a shared additive scorer. Forward passes keep a tape so that the
// log-probability of an episode can be differentiated by hand.

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfc/environment.hpp"
#include "sfc/nn.hpp"
#include "sfc/topology.hpp"

namespace sfc {

using nn::GradSet;
using nn::ParamSet;
using nn::Tensor;

struct PolicyConfig {
  int vnf_types = 5;
  int hidden_dim = 32;   // encoder width (annotation padded to this)
  int decoder_dim = 32;
  int scorer_dim = 32;
  int prop_steps = 5;

  int annotation_width() const { return vnf_types + 3; }
  int decoder_input_dim() const { return 2 * vnf_types + hidden_dim; }

  void validate() const {
    if (vnf_types < 1 || hidden_dim < 1 || decoder_dim < 1 || scorer_dim < 1 || prop_steps < 0) {
      throw ValidationError("policy dimensions must be positive");
    }
    if (annotation_width() > hidden_dim) {
      throw ValidationError("hidden_dim " + std::to_string(hidden_dim) +
                            " is narrower than the annotation width " +
                            std::to_string(annotation_width()));
    }
  }

  bool operator==(const PolicyConfig&) const = default;
};

struct Policy {
  PolicyConfig config;
  ParamSet params;
};

inline Tensor uniform_init(int rows, int cols, int fan_in, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = (2.0 * uniform_real(rng) - 1.0) * s;
  return t;
}

// Weights uniform in +-1/sqrt(fan_in), biases zero.
inline Policy init_policy(const PolicyConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  Policy pol{cfg, {}};
  auto& p = pol.params;
  nn::add_gru_params(p, "enc.", cfg.hidden_dim, cfg.hidden_dim, rng);
  nn::add_gru_params(p, "dec.", cfg.decoder_input_dim(), cfg.decoder_dim, rng);
  p.add("score.W1", uniform_init(cfg.hidden_dim, cfg.scorer_dim, cfg.hidden_dim, rng));
  p.add("score.W2", uniform_init(cfg.decoder_dim, cfg.scorer_dim, cfg.decoder_dim, rng));
  p.add("score.b1", Tensor::Zero(1, cfg.scorer_dim));
  p.add("score.w", uniform_init(cfg.scorer_dim, 1, cfg.scorer_dim, rng));
  p.add("proc.w", uniform_init(cfg.scorer_dim, 1, cfg.scorer_dim, rng));
  p.add("proc.b", Tensor::Zero(1, 1));
  return pol;
}

// ---------------------------------------------------------------------------
// Encoder

// Row u: [availability of each type at u (K), is-source, is-destination,
// hosts-V_now, zero padding up to hidden_dim].
inline Tensor annotate(const Topology& t, const SfcRequest& req, int chain_index,
                       const PolicyConfig& cfg) {
  if (t.vnf_type_count() > cfg.vnf_types) {
    throw ValidationError("topology has " + std::to_string(t.vnf_type_count()) +
                          " VNF types but the policy was built for " +
                          std::to_string(cfg.vnf_types));
  }
  const int k_types = cfg.vnf_types;
  Tensor a = Tensor::Zero(t.node_count(), cfg.hidden_dim);
  for (const auto& m : t.instances()) a(m.node, m.vnf_type) = 1.0;
  a(req.source, k_types) = 1.0;
  a(req.destination, k_types + 1) = 1.0;
  if (chain_index < static_cast<int>(req.chain.size())) {
    const int now = req.chain[chain_index];
    for (const auto& m : t.instances()) {
      if (m.vnf_type == now) a(m.node, k_types + 2) = 1.0;
    }
  }
  return a;
}

inline Tensor adjacency_tensor(const Topology& t) {
  const int n = t.node_count();
  Tensor a = Tensor::Zero(n, n);
  for (const auto& e : t.edges()) a(e.u, e.v) = a(e.v, e.u) = 1.0;
  return a;
}

struct EncoderTape {
  std::vector<nn::GruCache> steps;
};

// h(0) = annotation; h_in(t) = A h(t-1); h(t) = GRU(h(t-1), h_in(t)).
inline Tensor encode(const Tensor& annotations, const Tensor& adjacency, int prop_steps,
                     const ParamSet& p, EncoderTape* tape = nullptr) {
  nn::check_shape(adjacency.rows() == annotations.rows() && adjacency.cols() == adjacency.rows(),
                  "encode: adjacency must be N x N with N annotation rows");
  Tensor h = annotations;
  if (tape) tape->steps.assign(static_cast<std::size_t>(prop_steps), {});
  for (int s = 0; s < prop_steps; ++s) {
    Tensor msg = adjacency * h;
    h = nn::gru_cell(h, msg, p, "enc.", tape ? &tape->steps[s] : nullptr);
  }
  return h;
}

// Returns d/d annotations; parameter gradients accumulate into g.
inline Tensor encode_backward(const Tensor& grad_out, const EncoderTape& tape,
                              const Tensor& adjacency, const ParamSet& p, GradSet& g) {
  Tensor gh = grad_out;
  for (std::size_t s = tape.steps.size(); s-- > 0;) {
    auto in = nn::gru_cell_backward(gh, tape.steps[s], p, "enc.", g);
    gh = in.h_prev + adjacency.transpose() * in.x;
  }
  return gh;
}

// ---------------------------------------------------------------------------
// Decoder

struct ActionDistribution {
  std::vector<double> node_probs;    // zero outside the neighbor mask
  std::vector<double> process_prob;  // zero where processing is invalid
  std::vector<char> node_mask;
  std::vector<char> process_mask;
};

struct DecodeTape {
  nn::GruCache gru;
  Tensor scorer_pre;  // tanh(E W1 + d W2 + b1), N x S
  Tensor d_new;
  int current_node = 0;
  ActionDistribution dist;
};

// Decoder input x = [V_all multi-hot of remaining types, V_now one-hot,
// embedding of the current node].
inline Tensor decoder_input(const SfcRequest& req, int chain_index, const Tensor& enc,
                            int current_node, const PolicyConfig& cfg) {
  Tensor x = Tensor::Zero(1, cfg.decoder_input_dim());
  for (std::size_t i = static_cast<std::size_t>(chain_index); i < req.chain.size(); ++i) {
    x(0, req.chain[i]) = 1.0;
  }
  if (chain_index < static_cast<int>(req.chain.size())) {
    x(0, cfg.vnf_types + req.chain[chain_index]) = 1.0;
  }
  x.block(0, 2 * cfg.vnf_types, 1, cfg.hidden_dim) = enc.row(current_node);
  return x;
}

// One decoding step: advance the decoder GRU, score every node against the
// new hidden state, mask to valid moves and normalize.
inline ActionDistribution decode_step(const Tensor& enc, const Tensor& d_prev, const Tensor& x,
                                      std::vector<char> node_mask, std::vector<char> process_mask,
                                      const ParamSet& p, Tensor& d_new,
                                      DecodeTape* tape = nullptr) {
  const auto n = static_cast<std::size_t>(enc.rows());
  nn::check_shape(node_mask.size() == n && process_mask.size() == n, "decode_step mask length");
  nn::GruCache cache;
  d_new = nn::gru_cell(d_prev, x, p, "dec.", &cache);
  Tensor pre = enc * p["score.W1"];
  pre.rowwise() += (d_new * p["score.W2"] + p["score.b1"]).row(0);
  pre = pre.array().tanh().matrix();
  const Tensor logits = pre * p["score.w"];
  const Tensor plog = (pre * p["proc.w"]).array() + p["proc.b"](0, 0);

  ActionDistribution dist;
  dist.node_probs = nn::masked_softmax(std::span<const double>(logits.data(), n), node_mask);
  dist.process_prob.assign(n, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    if (process_mask[u]) dist.process_prob[u] = nn::sigmoid(plog(static_cast<Eigen::Index>(u), 0));
  }
  dist.node_mask = std::move(node_mask);
  dist.process_mask = std::move(process_mask);
  if (tape) {
    tape->gru = std::move(cache);
    tape->scorer_pre = std::move(pre);
    tape->d_new = d_new;
    tape->dist = dist;
  }
  return dist;
}

// log pi(a) = log node_probs[v] + log(p_v or 1 - p_v); the process factor is
// 1 where processing is invalid.
inline double action_log_prob(const ActionDistribution& dist, const Action& a) {
  const auto v = static_cast<std::size_t>(a.next_node);
  if (v >= dist.node_probs.size() || !dist.node_mask[v]) {
    throw std::invalid_argument("action_log_prob: node " + std::to_string(a.next_node) +
                                " is masked");
  }
  if (a.process && !dist.process_mask[v]) {
    throw std::invalid_argument("action_log_prob: processing is masked at node " +
                                std::to_string(a.next_node));
  }
  double lp = std::log(dist.node_probs[v]);
  if (dist.process_mask[v]) {
    lp += a.process ? std::log(dist.process_prob[v]) : std::log1p(-dist.process_prob[v]);
  }
  return lp;
}

// Backward of weight * log pi(a) through one decode step. Accumulates into g
// and grad_enc; returns d/d d_prev. grad_d_new carries gradient from later steps.
inline Tensor decode_step_backward(const DecodeTape& tape, const Action& a, double weight,
                                   const Tensor& grad_d_new, const ParamSet& p, GradSet& g,
                                   Tensor& grad_enc, const Tensor& enc, int vnf_types,
                                   int hidden_dim) {
  const auto n = static_cast<Eigen::Index>(tape.dist.node_probs.size());
  const auto v = static_cast<std::size_t>(a.next_node);
  Tensor g_logit = Tensor::Zero(n, 1);
  Tensor g_plog = Tensor::Zero(n, 1);
  const auto gl = nn::masked_log_softmax_grad(tape.dist.node_probs, tape.dist.node_mask, v);
  for (Eigen::Index u = 0; u < n; ++u) g_logit(u, 0) = weight * gl[static_cast<std::size_t>(u)];
  if (tape.dist.process_mask[v]) {
    const double pv = tape.dist.process_prob[v];
    g_plog(static_cast<Eigen::Index>(v), 0) = weight * (a.process ? 1.0 - pv : -pv);
  }
  const Tensor& pre = tape.scorer_pre;
  g["score.w"] += pre.transpose() * g_logit;
  g["proc.w"] += pre.transpose() * g_plog;
  g["proc.b"](0, 0) += g_plog.sum();
  Tensor g_pre = g_logit * p["score.w"].transpose() + g_plog * p["proc.w"].transpose();
  Tensor g_act = g_pre.cwiseProduct((1.0 - pre.array().square()).matrix());
  g["score.W1"] += enc.transpose() * g_act;
  grad_enc += g_act * p["score.W1"].transpose();
  const Tensor g_shared = g_act.colwise().sum();
  g["score.W2"] += tape.d_new.transpose() * g_shared;
  g["score.b1"] += g_shared;
  Tensor g_d = grad_d_new + g_shared * p["score.W2"].transpose();
  auto in = nn::gru_cell_backward(g_d, tape.gru, p, "dec.", g);
  grad_enc.row(tape.current_node) += in.x.block(0, 2 * vnf_types, 1, hidden_dim);
  return in.h_prev;
}

// ---------------------------------------------------------------------------
// Episode graph: the unrolled forward computation of one episode. The
// encoder re-runs whenever V_now changes.

class EpisodeGraph {
 public:
  EpisodeGraph(const Policy& policy, const Topology& t, const SfcRequest& req)
      : policy_(policy),
        topo_(t),
        req_(req),
        adjacency_(adjacency_tensor(t)),
        d_(Tensor::Zero(1, policy.config.decoder_dim)) {}

  // Distribution for the state reached so far; must be followed by commit().
  const ActionDistribution& next(const EnvState& s) {
    const auto& cfg = policy_.config;
    if (stages_.empty() || stages_.back().chain_index != s.chain_index) {
      Stage st;
      st.chain_index = s.chain_index;
      st.annotations = annotate(topo_, req_, s.chain_index, cfg);
      st.output = encode(st.annotations, adjacency_, cfg.prop_steps, policy_.params, &st.tape);
      stages_.push_back(std::move(st));
    }
    const Stage& st = stages_.back();
    const auto n = static_cast<std::size_t>(topo_.node_count());
    std::vector<char> node_mask(n, 0), process_mask(n, 0);
    const int now = s.v_now();
    for (const auto& nb : topo_.neighbors(s.current_node)) {
      node_mask[nb.node] = 1;
      if (now >= 0 && topo_.hosts_type(nb.node, now)) process_mask[nb.node] = 1;
    }
    Step step;
    step.stage = stages_.size() - 1;
    step.tape.current_node = s.current_node;
    const Tensor x = decoder_input(req_, s.chain_index, st.output, s.current_node, cfg);
    Tensor d_new;
    decode_step(st.output, d_, x, std::move(node_mask), std::move(process_mask), policy_.params,
                d_new, &step.tape);
    d_ = std::move(d_new);
    steps_.push_back(std::move(step));
    return steps_.back().tape.dist;
  }

  double commit(const Action& a) {
    Step& st = steps_.back();
    st.action = a;
    st.log_prob = action_log_prob(st.tape.dist, a);
    return st.log_prob;
  }

  std::size_t size() const { return steps_.size(); }
  double log_prob(std::size_t i) const { return steps_.at(i).log_prob; }
  double total_log_prob() const {
    double s = 0.0;
    for (const auto& st : steps_) s += st.log_prob;
    return s;
  }

  // Gradient of sum_t weights[t] * log pi(a_t | s_t), accumulated into g.
  void backward(std::span<const double> weights, GradSet& g) const {
    const auto& cfg = policy_.config;
    nn::check_shape(weights.size() == steps_.size(), "EpisodeGraph::backward weight count");
    std::vector<Tensor> grad_enc;
    for (const auto& st : stages_) grad_enc.push_back(Tensor::Zero(st.output.rows(), st.output.cols()));
    Tensor g_d = Tensor::Zero(1, cfg.decoder_dim);
    for (std::size_t i = steps_.size(); i-- > 0;) {
      const Step& st = steps_[i];
      g_d = decode_step_backward(st.tape, st.action, weights[i], g_d, policy_.params, g,
                                 grad_enc[st.stage], stages_[st.stage].output, cfg.vnf_types,
                                 cfg.hidden_dim);
    }
    for (std::size_t s = 0; s < stages_.size(); ++s) {
      encode_backward(grad_enc[s], stages_[s].tape, adjacency_, policy_.params, g);
    }
  }

 private:
  struct Stage {
    int chain_index = 0;
    Tensor annotations;
    Tensor output;
    EncoderTape tape;
  };
  struct Step {
    std::size_t stage = 0;
    DecodeTape tape;
    Action action;
    double log_prob = 0.0;
  };

  const Policy& policy_;
  const Topology& topo_;
  SfcRequest req_;
  Tensor adjacency_;
  Tensor d_;
  std::vector<Stage> stages_;
  std::vector<Step> steps_;
};

// ---------------------------------------------------------------------------
// Rollouts

enum class RolloutMode { Greedy, Sample, EpsilonGreedy };

struct RolloutOptions {
  RolloutMode mode = RolloutMode::Greedy;
  double epsilon = 0.0;
  RewardConfig reward;
  std::optional<int> max_steps;  // default_max_steps when empty
};

struct TraceStep {
  int node = 0;         // current node before the action
  int chain_index = 0;  // chain progress before the action
  Action action;
  double reward = 0.0;
  double log_prob = 0.0;
};

struct EpisodeTrace {
  SfcRequest request;
  std::vector<TraceStep> steps;
  PathResult result;

  std::vector<Action> actions() const {
    std::vector<Action> a;
    for (const auto& s : steps) a.push_back(s.action);
    return a;
  }
  std::vector<double> rewards() const {
    std::vector<double> r;
    for (const auto& s : steps) r.push_back(s.reward);
    return r;
  }
};

// Argmax node (lowest index on ties), process iff p >= 0.5.
inline Action greedy_action(const ActionDistribution& d) {
  std::size_t best = d.node_probs.size();
  for (std::size_t u = 0; u < d.node_probs.size(); ++u) {
    if (!d.node_mask[u]) continue;
    if (best == d.node_probs.size() || d.node_probs[u] > d.node_probs[best]) best = u;
  }
  return {static_cast<int>(best), d.process_mask[best] && d.process_prob[best] >= 0.5};
}

inline Action sample_action(const ActionDistribution& d, Rng& rng) {
  const double r = uniform_real(rng);
  double acc = 0.0;
  std::size_t pick = d.node_probs.size();
  for (std::size_t u = 0; u < d.node_probs.size(); ++u) {
    if (!d.node_mask[u]) continue;
    pick = u;
    acc += d.node_probs[u];
    if (r < acc) break;
  }
  const bool process = d.process_mask[pick] && uniform_real(rng) < d.process_prob[pick];
  return {static_cast<int>(pick), process};
}

// Uniform over the valid (node, process) pairs.
inline Action uniform_action(const ActionDistribution& d, Rng& rng) {
  std::vector<Action> all;
  for (std::size_t u = 0; u < d.node_mask.size(); ++u) {
    if (!d.node_mask[u]) continue;
    all.push_back({static_cast<int>(u), false});
    if (d.process_mask[u]) all.push_back({static_cast<int>(u), true});
  }
  return all[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(all.size()) - 1))];
}

inline Action choose_action(const ActionDistribution& d, const RolloutOptions& opt, Rng& rng) {
  switch (opt.mode) {
    case RolloutMode::Greedy:
      return greedy_action(d);
    case RolloutMode::Sample:
      return sample_action(d, rng);
    case RolloutMode::EpsilonGreedy:
      return uniform_real(rng) < opt.epsilon ? uniform_action(d, rng) : greedy_action(d);
  }
  return greedy_action(d);
}

inline EpisodeTrace rollout(const Policy& policy, const Topology& t, const SfcRequest& req,
                            const RolloutOptions& opt, Rng& rng) {
  EnvState s = reset(t, req, opt.max_steps.value_or(default_max_steps(t, req)));
  EpisodeGraph graph(policy, t, req);
  EpisodeTrace trace;
  trace.request = req;
  while (!s.done) {
    const ActionDistribution& dist = graph.next(s);
    const Action a = choose_action(dist, opt, rng);
    TraceStep ts{s.current_node, s.chain_index, a, 0.0, graph.commit(a)};
    StepResult r = step(s, a, t, opt.reward);
    ts.reward = r.reward;
    trace.steps.push_back(ts);
    s = std::move(r.state);
  }
  trace.result = s.path;
  return trace;
}

// Re-runs the forward pass of a recorded action sequence under `policy`.
// Throws std::logic_error if an action is invalid along the way.
inline EpisodeGraph replay(const Policy& policy, const Topology& t, const SfcRequest& req,
                           std::span<const Action> actions) {
  EnvState s = reset(t, req, std::max<int>(static_cast<int>(actions.size()), 1));
  EpisodeGraph graph(policy, t, req);
  for (const auto& a : actions) {
    graph.next(s);
    graph.commit(a);
    s = step(s, a, t, {}).state;
  }
  return graph;
}

// ---------------------------------------------------------------------------
// Checkpoints

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::string training_stage;  // "init", "sl", "rl"
  nlohmann::json extra = nlohmann::json::object();
};

inline std::string save_checkpoint(const Policy& pol, const CheckpointMeta& meta) {
  nlohmann::ordered_json j;
  j["format"] = "sfc-ggrnn-checkpoint/1";
  j["metadata"] = {{"hidden_dim", pol.config.hidden_dim},
                   {"decoder_dim", pol.config.decoder_dim},
                   {"scorer_dim", pol.config.scorer_dim},
                   {"K", pol.config.vnf_types},
                   {"propagation_steps", pol.config.prop_steps},
                   {"scorer_variant", "additive-tanh"},
                   {"seed", meta.seed},
                   {"training_stage", meta.training_stage},
                   {"extra", meta.extra}};
  j["params"] = nn::params_to_json(pol.params);
  return j.dump() + "\n";
}

inline Policy load_checkpoint(std::string_view text, CheckpointMeta* meta = nullptr) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
  try {
    const auto& m = j.at("metadata");
    Policy pol;
    pol.config.hidden_dim = m.at("hidden_dim").get<int>();
    pol.config.decoder_dim = m.at("decoder_dim").get<int>();
    pol.config.scorer_dim = m.at("scorer_dim").get<int>();
    pol.config.vnf_types = m.at("K").get<int>();
    pol.config.prop_steps = m.at("propagation_steps").get<int>();
    pol.config.validate();
    pol.params = nn::params_from_json(j.at("params"));
    const Policy fresh = init_policy(pol.config, 0);
    if (!fresh.params.same_layout(pol.params)) {
      throw ValidationError("checkpoint tensors do not match its metadata (hidden_dim, K, ...)");
    }
    if (meta) {
      meta->seed = m.at("seed").get<std::uint64_t>();
      meta->training_stage = m.at("training_stage").get<std::string>();
      meta->extra = m.value("extra", nlohmann::json::object());
    }
    return pol;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

// Names the first architecture field on which two configs disagree.
inline std::optional<std::string> config_mismatch(const PolicyConfig& a, const PolicyConfig& b) {
  if (a.hidden_dim != b.hidden_dim) return "hidden_dim";
  if (a.decoder_dim != b.decoder_dim) return "decoder_dim";
  if (a.scorer_dim != b.scorer_dim) return "scorer_dim";
  if (a.vnf_types != b.vnf_types) return "K";
  if (a.prop_steps != b.prop_steps) return "propagation_steps";
  return std::nullopt;
}

}  // namespace sfc

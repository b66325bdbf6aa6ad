#pragma once

// Supervised pre-training on oracle labels and REINFORCE fine-tuning over
// topology pools.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sfc/environment.hpp"
#include "sfc/oracle.hpp"
#include "sfc/policy.hpp"

namespace sfc {

struct HyperParams {
  double alpha_sl = 0.001;
  double alpha_rl = 5e-8;
  double gamma = 0.999;
  double epsilon = 0.01;
  double lambda = 0.0;
  int episodes = 10000;
  int sl_epochs = 10;
  std::uint64_t seed = 1;
  int rolling_window = 100;
  ChainLengthRange chain_lengths{1, 4};
  bool normalize_reward = false;  // divide returns by the success reward

  void validate() const {
    if (!(alpha_sl > 0) || !(alpha_rl > 0)) throw ValidationError("learning rates must be > 0");
    if (!(gamma > 0 && gamma <= 1)) throw ValidationError("gamma must be in (0, 1]");
    if (!(epsilon >= 0 && epsilon <= 1)) throw ValidationError("epsilon must be in [0, 1]");
    if (lambda < 0) throw ValidationError("lambda must be >= 0");
    if (episodes < 0 || sl_epochs < 0) throw ValidationError("episode/epoch counts must be >= 0");
    if (rolling_window < 1) throw ValidationError("rolling_window must be >= 1");
  }
};

// G_t = r_t + gamma * G_{t+1}, with G_T = r_T.
inline std::vector<double> compute_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> g(rewards.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    g[i] = acc;
  }
  return g;
}

struct UpdateReport {
  bool applied = false;
  bool skipped_nonfinite = false;
  double max_replay_deviation = 0.0;  // |replayed - recorded| log-prob
};

// theta += alpha_rl * sum_t G_t grad log pi(a_t | s_t), one step per episode.
inline UpdateReport reinforce_update(Policy& policy, const Topology& t, const EpisodeTrace& trace,
                                     const HyperParams& hp) {
  UpdateReport rep;
  auto returns = compute_returns(trace.rewards(), hp.gamma);
  if (hp.normalize_reward) {
    for (double& g : returns) g /= RewardConfig{}.success_base;
  }
  const auto actions = trace.actions();
  const EpisodeGraph graph = replay(policy, t, trace.request, actions);
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    rep.max_replay_deviation =
        std::max(rep.max_replay_deviation, std::abs(graph.log_prob(i) - trace.steps[i].log_prob));
  }
  if (std::all_of(returns.begin(), returns.end(), [](double g) { return g == 0.0; })) return rep;
  GradSet grads = policy.params.zeros_like();
  graph.backward(returns, grads);
  try {
    nn::sgd_update(policy.params, grads, hp.alpha_rl, nn::Direction::Ascend);
    rep.applied = true;
  } catch (const NumericError&) {
    rep.skipped_nonfinite = true;
  }
  return rep;
}

// Failure ratio of greedy rollouts over (topology, request) pairs.
inline double greedy_failure_ratio(const Policy& policy, std::span<const Topology> topologies,
                                   std::span<const TopologyRequest> requests) {
  if (requests.empty()) return 0.0;
  Rng unused(0);
  int failures = 0;
  for (const auto& item : requests) {
    auto tr = rollout(policy, topologies[static_cast<std::size_t>(item.topology_id)], item.request,
                      {}, unused);
    failures += tr.result.success ? 0 : 1;
  }
  return static_cast<double>(failures) / static_cast<double>(requests.size());
}

struct SlEpoch {
  int epoch = 0;
  double mean_loss = 0.0;
  double heldout_failure_ratio = 0.0;
  int skipped_updates = 0;
};

struct HeldOut {
  std::span<const Topology> topologies;
  std::span<const TopologyRequest> requests;
};

// Teacher-forced cross entropy along oracle label paths, shuffled each epoch,
// one SGD step per labeled episode.
inline std::vector<SlEpoch> train_sl(Policy& policy, std::span<const Topology> topologies,
                                     const LabeledDataset& data, const HyperParams& hp,
                                     std::optional<HeldOut> heldout = std::nullopt,
                                     const std::function<void(const SlEpoch&)>& on_epoch = {}) {
  hp.validate();
  std::vector<SlEpoch> history;
  if (hp.sl_epochs == 0) return history;
  if (data.entries.empty()) throw ValidationError("train_sl: empty dataset");
  Rng rng = derive_rng(hp.seed, 11);
  std::vector<std::size_t> order(data.entries.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= hp.sl_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    SlEpoch rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const auto& e = data.entries[idx];
      const Topology& t = topologies[static_cast<std::size_t>(e.topology_id)];
      const EpisodeGraph graph = replay(policy, t, e.request, e.actions);
      loss_sum -= graph.total_log_prob();
      // loss = -sum log pi  =>  dloss = -(d sum log pi)
      const std::vector<double> w(graph.size(), -1.0);
      GradSet grads = policy.params.zeros_like();
      graph.backward(w, grads);
      try {
        nn::sgd_update(policy.params, grads, hp.alpha_sl, nn::Direction::Descend);
      } catch (const NumericError&) {
        ++rec.skipped_updates;
      }
    }
    rec.mean_loss = loss_sum / static_cast<double>(data.entries.size());
    if (heldout) rec.heldout_failure_ratio = greedy_failure_ratio(policy, heldout->topologies,
                                                                  heldout->requests);
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

struct RlRecord {
  int episode = 0;
  double rolling_success = 0.0;
  double rolling_mean_delay = 0.0;  // over successes in the window
  bool success = false;
  long delay = 0;
  bool skipped_update = false;
};

// Per episode: draw a topology uniformly from the pool, draw a fresh request
// on it, roll out epsilon-greedily, then apply one REINFORCE step.
// Topology/request draws and per-episode exploration use separate streams, so
// runs that differ only in lambda see identical requests and exploration draws.
inline std::vector<RlRecord> train_rl(Policy& policy, std::span<const Topology> pool,
                                      const HyperParams& hp,
                                      const std::function<void(const RlRecord&)>& on_episode = {}) {
  hp.validate();
  if (pool.empty()) throw ValidationError("train_rl: empty topology pool");
  std::vector<RlRecord> history;
  Rng draw = derive_rng(hp.seed, 21);
  const std::uint64_t explore_seed = derive_rng(hp.seed, 22)();
  RolloutOptions opt;
  opt.mode = RolloutMode::EpsilonGreedy;
  opt.epsilon = hp.epsilon;
  opt.reward.lambda = hp.lambda;
  std::deque<std::pair<bool, long>> window;
  int window_success = 0;
  long window_delay = 0;
  for (int ep = 1; ep <= hp.episodes; ++ep) {
    const int id = uniform_int(draw, 0, static_cast<int>(pool.size()) - 1);
    const Topology& t = pool[static_cast<std::size_t>(id)];
    const SfcRequest req = generate_requests(t, 1, hp.chain_lengths, draw).front();
    Rng explore = derive_rng(explore_seed, static_cast<std::uint64_t>(ep));
    const EpisodeTrace trace = rollout(policy, t, req, opt, explore);
    const UpdateReport up = reinforce_update(policy, t, trace, hp);

    const bool ok = trace.result.success;
    window.emplace_back(ok, trace.result.total_delay);
    window_success += ok;
    window_delay += ok ? trace.result.total_delay : 0;
    if (static_cast<int>(window.size()) > hp.rolling_window) {
      window_success -= window.front().first;
      window_delay -= window.front().first ? window.front().second : 0;
      window.pop_front();
    }
    RlRecord rec;
    rec.episode = ep;
    rec.success = ok;
    rec.delay = trace.result.total_delay;
    rec.skipped_update = up.skipped_nonfinite;
    rec.rolling_success = static_cast<double>(window_success) / static_cast<double>(window.size());
    rec.rolling_mean_delay =
        window_success ? static_cast<double>(window_delay) / window_success : 0.0;
    history.push_back(rec);
    if (on_episode) on_episode(rec);
  }
  return history;
}

inline void write_sl_history_csv(std::ostream& os, std::span<const SlEpoch> h) {
  os << "epoch,success_rate,mean_delay,loss\n";
  for (const auto& r : h) {
    os << r.epoch << ',' << 1.0 - r.heldout_failure_ratio << ",," << r.mean_loss << '\n';
  }
}

inline void write_rl_history_csv(std::ostream& os, std::span<const RlRecord> h) {
  os << "episode,success_rate,mean_delay,loss\n";
  for (const auto& r : h) {
    os << r.episode << ',' << r.rolling_success << ',' << r.rolling_mean_delay << ",\n";
  }
}

}  // namespace sfc

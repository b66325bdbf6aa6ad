#include <gtest/gtest.h>

#include <sstream>

#include "../gradchecks.hpp"
#include "sfc/training.hpp"

using namespace sfc;
using sfc::testing::small_policy_config;
using sfc::testing::small_topology;

namespace {

// SL-pretrained small policy on the 5-node topology, shared by the RL tests.
const Policy& pretrained_small() {
  static const Policy pol = [] {
    const Topology t = small_topology();
    Policy p = init_policy(small_policy_config(), 21);
    Rng rng(22);
    const auto ds = label_dataset(t, generate_requests(t, 300, {1, 3}, rng));
    HyperParams hp;
    hp.sl_epochs = 15;
    hp.alpha_sl = 0.01;
    const std::vector<Topology> topos{t};
    train_sl(p, topos, ds, hp);
    return p;
  }();
  return pol;
}

}  // namespace

TEST(Returns, Examples) {
  EXPECT_EQ(compute_returns(std::vector<double>{0, 0, 10000}, 1.0),
            (std::vector<double>{10000, 10000, 10000}));
  const auto g = compute_returns(std::vector<double>{0, 10000}, 0.999);
  EXPECT_NEAR(g[0], 9990.0, 1e-9);
  EXPECT_EQ(g[1], 10000.0);
  EXPECT_EQ(compute_returns(std::vector<double>{0, 0, 0}, 0.5), (std::vector<double>{0, 0, 0}));
}

TEST(Returns, LinearInRewards) {
  Rng rng(1);
  std::vector<double> r(8), cr(8);
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = uniform_real(rng) * 100.0;
    cr[i] = 3.5 * r[i];
  }
  const auto a = compute_returns(r, 0.9);
  const auto b = compute_returns(cr, 0.9);
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(b[i], 3.5 * a[i], 1e-9);
}

TEST(HyperParams, Validation) {
  HyperParams hp;
  EXPECT_NO_THROW(hp.validate());
  EXPECT_DOUBLE_EQ(hp.gamma, 0.999);
  EXPECT_DOUBLE_EQ(hp.epsilon, 0.01);
  hp.gamma = 0.0;
  EXPECT_THROW(hp.validate(), ValidationError);
  hp = {};
  hp.alpha_rl = 0.0;
  EXPECT_THROW(hp.validate(), ValidationError);
  hp = {};
  hp.epsilon = 1.5;
  EXPECT_THROW(hp.validate(), ValidationError);
}

TEST(Reinforce, FailureEpisodeLeavesParamsUnchanged) {
  const Topology t = small_topology();
  Policy pol = init_policy(small_policy_config(), 4);
  const ParamSet before = pol.params;
  RolloutOptions opt;
  opt.mode = RolloutMode::Sample;
  opt.max_steps = 1;
  Rng rng(5);
  int failures = 0;
  for (const auto& req : generate_requests(t, 40, {2, 3}, rng)) {
    const auto tr = rollout(pol, t, req, opt, rng);
    ASSERT_FALSE(tr.result.success);  // a 2+ chain cannot finish in one step
    const auto rep = reinforce_update(pol, t, tr, {});
    EXPECT_FALSE(rep.applied);
    ++failures;
  }
  EXPECT_EQ(pol.params, before);
  EXPECT_EQ(failures, 40);
}

TEST(Reinforce, SingleStepSuccessFollowsScaledLogProbGradient) {
  // 0 - 1 with the only type-0 instance at 1: request 0 -> 1 [0] succeeds in
  // one step iff the policy processes on arrival.
  const Topology t(2, {{0, 1, 3}}, {{1, 0, 2}}, 3);
  const PolicyConfig cfg = small_policy_config();
  Policy pol = init_policy(cfg, 6);
  const SfcRequest req{0, 1, {0}};
  EpisodeTrace tr;
  RolloutOptions opt;
  opt.mode = RolloutMode::Sample;
  Rng rng(0);
  do {
    tr = rollout(pol, t, req, opt, rng);
  } while (!(tr.result.success && tr.steps.size() == 1));
  EXPECT_EQ(tr.steps[0].reward, 10000.0);

  HyperParams hp;
  hp.alpha_rl = 1e-7;
  const ParamSet before = pol.params;
  const auto rep = reinforce_update(pol, t, tr, hp);
  ASSERT_TRUE(rep.applied);
  EXPECT_LE(rep.max_replay_deviation, 1e-12);

  GradSet delta = before.zeros_like();
  // delta / (alpha * G) must equal grad log pi; comparing unscaled keeps the
  // finite-difference noise of the 10^4 factor out of the check
  for (const auto& [name, v] : before) {
    delta[name] = (pol.params[name] - v) / (hp.alpha_rl * 10000.0);
  }
  const auto acts = tr.actions();
  auto f = [&](const ParamSet& q) { return replay(Policy{cfg, q}, t, req, acts).total_log_prob(); };
  const auto check = nn::finite_diff_check(f, before, delta, 1e-5, 1e-5);
  EXPECT_TRUE(check.pass) << check.max_rel_err;
}

TEST(Reinforce, IdenticalTracesGiveIdenticalDeltas) {
  const Topology t = small_topology();
  Policy a = pretrained_small();
  Policy b = pretrained_small();
  Rng rng(7);
  const SfcRequest req = generate_requests(t, 1, {1, 2}, rng).front();
  Rng ra(1), rb(1);
  const auto ta = rollout(a, t, req, {}, ra);
  const auto tb = rollout(b, t, req, {}, rb);
  ASSERT_TRUE(ta.result.success);
  reinforce_update(a, t, ta, {});
  reinforce_update(b, t, tb, {});
  EXPECT_EQ(a.params, b.params);
}

TEST(Reinforce, NormalizedRewardScalesTheStep) {
  const Topology t = small_topology();
  Rng rng(8);
  const SfcRequest req = generate_requests(t, 1, {1, 2}, rng).front();
  Policy base = pretrained_small();
  Rng r0(1);
  const auto tr = rollout(base, t, req, {}, r0);
  ASSERT_TRUE(tr.result.success);
  Policy raw = base, norm = base;
  HyperParams hp;
  reinforce_update(raw, t, tr, hp);
  hp.normalize_reward = true;
  hp.alpha_rl *= 10000.0;
  reinforce_update(norm, t, tr, hp);
  for (const auto& [name, v] : base.params) {
    EXPECT_LE((raw.params[name] - norm.params[name]).cwiseAbs().maxCoeff(), 1e-12) << name;
  }
}

TEST(Sl, OverfitsOneShortPath) {
  const Topology t = small_topology();
  const SfcRequest req{0, 4, {2}};
  LabeledDataset ds = label_dataset(t, std::vector<SfcRequest>{req});
  ASSERT_EQ(ds.entries.size(), 1u);
  Policy pol = init_policy(small_policy_config(), 9);
  HyperParams hp;
  hp.sl_epochs = 200;
  hp.alpha_sl = 0.05;
  const std::vector<Topology> topos{t};
  train_sl(pol, topos, ds, hp);
  Rng rng(0);
  const auto tr = rollout(pol, t, req, {}, rng);
  EXPECT_TRUE(tr.result.success);
  EXPECT_EQ(tr.actions(), ds.entries[0].actions);
}

TEST(Sl, ZeroEpochsAndEmptyDataset) {
  Policy pol = init_policy(small_policy_config(), 10);
  const ParamSet before = pol.params;
  HyperParams hp;
  hp.sl_epochs = 0;
  const std::vector<Topology> topos{small_topology()};
  EXPECT_TRUE(train_sl(pol, topos, {}, hp).empty());
  EXPECT_EQ(pol.params, before);
  hp.sl_epochs = 1;
  EXPECT_THROW(train_sl(pol, topos, {}, hp), ValidationError);
}

TEST(Sl, LossDecreasesOnFixture) {
  const Topology f = internet2_fixture();
  Rng rng(11);
  const auto ds = label_dataset(f, generate_requests(f, 300, {1, 4}, rng));
  Policy pol = init_policy({}, 12);
  HyperParams hp;
  hp.sl_epochs = 20;
  const std::vector<Topology> topos{f};
  const auto hist = train_sl(pol, topos, ds, hp);
  ASSERT_EQ(hist.size(), 20u);
  EXPECT_GE(hist.front().mean_loss, hist.back().mean_loss);
  EXPECT_EQ(hist.back().skipped_updates, 0);
}

TEST(Rl, ZeroEpisodesAndEmptyPool) {
  Policy pol = pretrained_small();
  HyperParams hp;
  hp.episodes = 0;
  const std::vector<Topology> topos{small_topology()};
  EXPECT_TRUE(train_rl(pol, topos, hp).empty());
  EXPECT_EQ(pol.params, pretrained_small().params);
  EXPECT_THROW(train_rl(pol, std::vector<Topology>{}, hp), ValidationError);
}

TEST(Rl, Deterministic) {
  const std::vector<Topology> topos{small_topology()};
  HyperParams hp;
  hp.episodes = 200;
  hp.epsilon = 0.2;
  Policy a = pretrained_small(), b = pretrained_small();
  const auto ha = train_rl(a, topos, hp);
  const auto hb = train_rl(b, topos, hp);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(ha.size(), hb.size());
  for (std::size_t i = 0; i < ha.size(); ++i) EXPECT_EQ(ha[i].delay, hb[i].delay);
}

TEST(Rl, TinyTopologyConvergesAndLambdaShortensPaths) {
  const std::vector<Topology> topos{small_topology()};
  HyperParams hp;
  hp.episodes = 2000;
  hp.alpha_rl = 1e-7;
  Policy l0 = pretrained_small();
  const auto h0 = train_rl(l0, topos, hp);
  EXPECT_GE(h0.back().rolling_success, 0.95);
  hp.lambda = 1.0;
  Policy l1 = pretrained_small();
  const auto h1 = train_rl(l1, topos, hp);
  EXPECT_GE(h1.back().rolling_success, 0.95);

  // greedy mean success delay on a shared request set
  Rng rng(31);
  const auto reqs = generate_requests(topos[0], 500, hp.chain_lengths, rng);
  auto mean_delay = [&](const Policy& p) {
    long sum = 0;
    int ok = 0;
    for (const auto& r : reqs) {
      Rng unused(0);
      const auto tr = rollout(p, topos[0], r, {}, unused);
      if (tr.result.success) {
        sum += tr.result.total_delay;
        ++ok;
      }
    }
    return ok ? static_cast<double>(sum) / ok : 0.0;
  };
  EXPECT_LE(mean_delay(l1), mean_delay(l0));
}

TEST(History, CsvHeaders) {
  std::ostringstream sl, rl;
  write_sl_history_csv(sl, std::vector<SlEpoch>{{1, 2.5, 0.1, 0}});
  write_rl_history_csv(rl, std::vector<RlRecord>{{1, 1.0, 12.0, true, 12, false}});
  EXPECT_EQ(sl.str(), "epoch,success_rate,mean_delay,loss\n1,0.9,,2.5\n");
  EXPECT_EQ(rl.str(), "episode,success_rate,mean_delay,loss\n1,1,12,\n");
}

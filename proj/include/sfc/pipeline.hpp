#pragma once

// The desk-scale comparison experiment end to end: fixture -> pools ->
// labeled dataset -> SL pre-training -> six RL variants -> three-test report.
// Every random draw hangs off Table1Config::seed, so two runs with the same
// config write byte-identical reports.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sfc/config.hpp"
#include "sfc/evaluation.hpp"
#include "sfc/oracle.hpp"
#include "sfc/training.hpp"

namespace sfc {

struct Table1Config {
  std::uint64_t seed = 1;
  HyperParams hp;
  PolicyConfig policy;
  MutationParams mutation;
  std::string topology;  // empty: the built-in fixture
  int dataset_requests = 2000;
  int heldout_requests = 500;
  int train_pool_size = 100;
  int test_pool_size = 100;
  int test_requests = 1000;
  int jobs = 1;
};

inline nlohmann::ordered_json to_json(const Table1Config& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["hyperparams"] = to_json(c.hp);
  j["policy"] = to_json(c.policy);
  j["mutation"] = to_json(c.mutation);
  j["topology"] = c.topology;
  j["dataset_requests"] = c.dataset_requests;
  j["heldout_requests"] = c.heldout_requests;
  j["train_pool_size"] = c.train_pool_size;
  j["test_pool_size"] = c.test_pool_size;
  j["test_requests"] = c.test_requests;
  j["jobs"] = c.jobs;
  return j;
}

inline Table1Config table1_config_from_json(const nlohmann::json& j) {
  const std::string where = "exp config";
  detail::reject_unknown(j,
                         {"seed", "hyperparams", "policy", "mutation", "topology",
                          "dataset_requests", "heldout_requests", "train_pool_size",
                          "test_pool_size", "test_requests", "jobs"},
                         where);
  Table1Config c;
  detail::read_opt(j, "seed", c.seed, where);
  if (j.contains("hyperparams")) c.hp = hyperparams_from_json(j.at("hyperparams"));
  if (j.contains("policy")) c.policy = policy_config_from_json(j.at("policy"));
  if (j.contains("mutation")) c.mutation = mutation_params_from_json(j.at("mutation"));
  detail::read_opt(j, "topology", c.topology, where);
  detail::read_opt(j, "dataset_requests", c.dataset_requests, where);
  detail::read_opt(j, "heldout_requests", c.heldout_requests, where);
  detail::read_opt(j, "train_pool_size", c.train_pool_size, where);
  detail::read_opt(j, "test_pool_size", c.test_pool_size, where);
  detail::read_opt(j, "test_requests", c.test_requests, where);
  detail::read_opt(j, "jobs", c.jobs, where);
  if (c.dataset_requests < 1 || c.heldout_requests < 0 || c.train_pool_size < 1 ||
      c.test_pool_size < 1 || c.test_requests < 1 || c.jobs < 1) {
    throw ValidationError("exp config: sizes must be positive");
  }
  return c;
}

struct RlVariant {
  std::string name;
  double lambda = 0.0;
  std::optional<Strategy> strategy;  // nullopt: the fixed fixture
  Policy policy;
  std::vector<RlRecord> history;
};

struct Table1Result {
  Policy sl;
  std::vector<SlEpoch> sl_history;
  std::vector<RlVariant> rl;
  MetricsReport report;
  int dataset_size = 0;
  int dataset_dropped = 0;
  double sl_seconds = 0.0;  // wall time of labeling plus SL training
};

inline std::string rl_variant_name(double lambda, std::optional<Strategy> s) {
  std::ostringstream os;
  os << "RL(lambda=" << lambda << ")";
  if (s) os << "+" << (*s == Strategy::CS1 ? "CS1" : "CS2");
  return os.str();
}

// Seeds for each stage are derived from cfg.seed with fixed indices.
// RL variants share cfg.seed so lambda=0 and lambda=1 runs on the same pool
// see identical request and exploration streams.
inline Table1Result run_table1(const Table1Config& cfg, std::ostream* log = nullptr) {
  auto note = [&](const std::string& s) {
    if (log) *log << s << std::endl;
  };
  cfg.hp.validate();
  cfg.policy.validate();
  cfg.mutation.validate();
  const Topology fixture = cfg.topology.empty() ? internet2_fixture()
                                                : load_topology_file(cfg.topology);
  auto seed_of = [&](std::uint64_t idx) { return derive_rng(cfg.seed, idx)(); };

  const auto cs1_train =
      generate_pool(fixture, Strategy::CS1, cfg.train_pool_size, seed_of(101), cfg.mutation);
  const auto cs2_train =
      generate_pool(fixture, Strategy::CS2, cfg.train_pool_size, seed_of(102), cfg.mutation);
  const auto test_pool =
      generate_pool(fixture, Strategy::CS1, cfg.test_pool_size, seed_of(103), cfg.mutation);
  const auto test_relocated = relocate_all(test_pool.variants, seed_of(104));
  note("pools: " + std::to_string(cfg.train_pool_size) + " CS1 + " +
       std::to_string(cfg.train_pool_size) + " CS2 train, " +
       std::to_string(cfg.test_pool_size) + " test");

  Table1Result res;
  const auto sl_start = std::chrono::steady_clock::now();
  Rng data_rng(seed_of(105));
  const auto ds = label_dataset(
      fixture, generate_requests(fixture, cfg.dataset_requests, cfg.hp.chain_lengths, data_rng));
  res.dataset_size = static_cast<int>(ds.entries.size());
  res.dataset_dropped = ds.dropped;
  note("dataset: " + std::to_string(res.dataset_size) + " labeled, " +
       std::to_string(ds.dropped) + " dropped");

  const std::vector<Topology> fixed{fixture};
  Rng held_rng(seed_of(106));
  const auto held =
      generate_pool_requests(fixed, cfg.heldout_requests, cfg.hp.chain_lengths, held_rng);

  HyperParams hp = cfg.hp;
  hp.seed = cfg.seed;
  res.sl = init_policy(cfg.policy, seed_of(107));
  res.sl_history = train_sl(res.sl, fixed, ds, hp, HeldOut{fixed, held}, [&](const SlEpoch& e) {
    std::ostringstream os;
    os << "sl epoch " << e.epoch << " loss " << e.mean_loss << " heldout_failure "
       << e.heldout_failure_ratio;
    note(os.str());
  });
  res.sl_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - sl_start).count();

  for (double lambda : {0.0, 1.0}) {
    for (std::optional<Strategy> s :
         {std::optional<Strategy>{}, std::optional<Strategy>{Strategy::CS1},
          std::optional<Strategy>{Strategy::CS2}}) {
      RlVariant v{rl_variant_name(lambda, s), lambda, s, res.sl, {}};
      const std::span<const Topology> pool =
          !s ? std::span<const Topology>(fixed)
             : std::span<const Topology>(*s == Strategy::CS1 ? cs1_train.variants
                                                             : cs2_train.variants);
      HyperParams h = hp;
      h.lambda = lambda;
      v.history = train_rl(v.policy, pool, h);
      std::ostringstream os;
      os << v.name << " final rolling success "
         << (v.history.empty() ? 0.0 : v.history.back().rolling_success);
      note(os.str());
      res.rl.push_back(std::move(v));
    }
  }

  std::vector<NamedSolver> solvers{{"SL(Baseline)", greedy_solver(res.sl)}};
  for (const auto& v : res.rl) solvers.push_back({v.name, greedy_solver(v.policy)});
  ExperimentInputs in{fixture, test_pool.variants, test_relocated, cfg.test_requests,
                      seed_of(108), cfg.jobs};
  res.report = run_experiment(solvers, in);
  return res;
}

inline std::string report_table_text(const MetricsReport& rep) {
  std::ostringstream os;
  write_report_table(os, rep);
  return os.str();
}

inline std::string report_csv_text(const MetricsReport& rep) {
  std::ostringstream os;
  write_report_csv(os, rep);
  return os.str();
}

// Writes config echo, histories, checkpoints and the report under `dir`.
inline void write_table1_outputs(const Table1Config& cfg, const Table1Result& res,
                                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "config.json", to_json(cfg).dump(2) + "\n");
  {
    std::ostringstream os;
    write_sl_history_csv(os, res.sl_history);
    write_text_file(dir / "sl_history.csv", os.str());
  }
  write_text_file(dir / "sl.ckpt.json", save_checkpoint(res.sl, {cfg.seed, "sl", {}}));
  for (std::size_t i = 0; i < res.rl.size(); ++i) {
    const auto& v = res.rl[i];
    std::string stem = "rl_lambda" + std::to_string(static_cast<int>(v.lambda));
    if (v.strategy) stem += "_" + to_string(*v.strategy);
    std::ostringstream os;
    write_rl_history_csv(os, v.history);
    write_text_file(dir / (stem + "_history.csv"), os.str());
    nlohmann::json extra = {{"lambda", v.lambda},
                            {"pool", v.strategy ? to_string(*v.strategy) : "fixed"}};
    write_text_file(dir / (stem + ".ckpt.json"), save_checkpoint(v.policy, {cfg.seed, "rl", extra}));
  }
  write_text_file(dir / "report.csv", report_csv_text(res.report));
  write_text_file(dir / "report.txt", report_table_text(res.report));
}

}  // namespace sfc

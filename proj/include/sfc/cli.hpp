#pragma once

// `sfcrl` command line. run_cli() is the whole program minus main(), so tests
// can drive it in-process. Exit codes: 0 ok, 1 runtime failure, 2 usage error.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sfc/sfc.hpp"

namespace sfc::cli {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string summary(const Topology& t) {
  std::ostringstream os;
  os << "N=" << t.node_count() << " |E|=" << t.edges().size() << " |M|=" << t.instances().size()
     << " connected=" << (detail::connected(t.node_count(), t.edges()) ? "yes" : "no");
  return os.str();
}

inline Topology topology_or_fixture(const std::string& path) {
  return path.empty() ? internet2_fixture() : load_topology_file(path);
}

// A path naming an existing directory, or ending in '/', gets `default_name`.
inline fs::path output_file(const std::string& out, const std::string& default_name) {
  fs::path p(out);
  if (fs::is_directory(p) || (!out.empty() && out.back() == '/')) return p / default_name;
  return p;
}

inline void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

inline std::vector<int> parse_chain(const std::string& text) {
  std::vector<int> chain;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      chain.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--chain: '" + item + "' is not an integer");
    }
  }
  return chain;
}

inline std::string format_path(const SfcRequest& req, std::span<const Action> actions) {
  std::ostringstream os;
  os << req.source;
  for (const auto& a : actions) os << " -> " << a.next_node << (a.process ? "*" : "");
  return os.str();
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Service function chaining: oracle, GG-RNN policy training and evaluation",
               "sfcrl"};
  app.require_subcommand(1);
  const std::vector<std::string> strategies{"cs1", "cs2"};

  // topo -------------------------------------------------------------------
  auto* topo = app.add_subcommand("topo", "Fixture, random topologies, mutation and pools");
  topo->require_subcommand(1);

  std::string fixture_out = "internet2.json";
  auto* topo_fixture = topo->add_subcommand("fixture", "Write the built-in 12-node fixture");
  topo_fixture->add_option("--out", fixture_out, "Output file or directory");

  int gen_nodes = 12, gen_edges = 16, gen_per_type = 2, gen_types = 5;
  int gen_dmin = 1, gen_dmax = 10, gen_pmin = 1, gen_pmax = 5;
  std::uint64_t gen_seed = 2020;
  std::string gen_out = "topology.json";
  auto* topo_gen = topo->add_subcommand("generate", "Random connected topology with instances");
  topo_gen->add_option("--nodes", gen_nodes)->check(CLI::PositiveNumber);
  topo_gen->add_option("--edges", gen_edges)->check(CLI::NonNegativeNumber);
  topo_gen->add_option("--types", gen_types)->check(CLI::PositiveNumber);
  topo_gen->add_option("--per-type", gen_per_type, "Instances per VNF type")
      ->check(CLI::NonNegativeNumber);
  topo_gen->add_option("--delay-min", gen_dmin);
  topo_gen->add_option("--delay-max", gen_dmax);
  topo_gen->add_option("--proc-min", gen_pmin);
  topo_gen->add_option("--proc-max", gen_pmax);
  topo_gen->add_option("--seed", gen_seed);
  topo_gen->add_option("--out", gen_out);

  std::string mut_in, mut_out = "mutated.json", mut_strategy = "cs1", mut_params;
  std::uint64_t mut_seed = 1;
  auto* topo_mut = topo->add_subcommand("mutate", "Apply one CS1/CS2 mutation");
  topo_mut->add_option("--in", mut_in, "Input topology (default: fixture)");
  topo_mut->add_option("--strategy", mut_strategy)->check(CLI::IsMember(strategies));
  topo_mut->add_option("--seed", mut_seed);
  topo_mut->add_option("--mutation", mut_params, "Mutation parameter JSON file");
  topo_mut->add_option("--out", mut_out);

  std::string pool_in, pool_out = "pool", pool_strategy = "cs1", pool_params;
  int pool_count = 100;
  std::uint64_t pool_seed = 1;
  auto* topo_pool = topo->add_subcommand("pool", "Generate a pool of mutated topologies");
  topo_pool->add_option("--in", pool_in, "Base topology (default: fixture)");
  topo_pool->add_option("--strategy", pool_strategy)->check(CLI::IsMember(strategies));
  topo_pool->add_option("--count", pool_count)->check(CLI::PositiveNumber);
  topo_pool->add_option("--seed", pool_seed);
  topo_pool->add_option("--mutation", pool_params, "Mutation parameter JSON file");
  topo_pool->add_option("--out", pool_out, "Output directory");

  // dataset ----------------------------------------------------------------
  std::string ds_topology, ds_pool, ds_out = "dataset.jsonl";
  int ds_count = 2000, ds_chain_min = 1, ds_chain_max = 4;
  std::uint64_t ds_seed = 1;
  auto* dataset = app.add_subcommand("dataset", "Label random requests with the exact oracle");
  dataset->add_option("--topology", ds_topology, "Topology file (default: fixture)");
  dataset->add_option("--pool", ds_pool, "Pool directory; requests pick members uniformly");
  dataset->add_option("--count", ds_count)->check(CLI::NonNegativeNumber);
  dataset->add_option("--seed", ds_seed);
  dataset->add_option("--chain-min", ds_chain_min)->check(CLI::PositiveNumber);
  dataset->add_option("--chain-max", ds_chain_max)->check(CLI::PositiveNumber);
  dataset->add_option("--out", ds_out);

  // train ------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Supervised pre-training or REINFORCE fine-tuning");
  train->require_subcommand(1);
  std::string tr_config, tr_out = "run", tr_init;
  std::optional<double> tr_lambda;
  std::optional<int> tr_episodes, tr_epochs;
  std::optional<std::uint64_t> tr_seed;
  bool tr_scratch = false;
  auto* train_sl_cmd = train->add_subcommand("sl", "Teacher-forced training on oracle labels");
  auto* train_rl_cmd = train->add_subcommand("rl", "REINFORCE from an SL checkpoint");
  for (auto* c : {train_sl_cmd, train_rl_cmd}) {
    c->add_option("--config", tr_config, "Training config JSON")->check(CLI::ExistingFile);
    c->add_option("--out", tr_out, "Output directory");
    c->add_option("--seed", tr_seed);
  }
  train_sl_cmd->add_option("--epochs", tr_epochs);
  train_rl_cmd->add_option("--init", tr_init, "Initial checkpoint")->check(CLI::ExistingFile);
  train_rl_cmd->add_flag("--from-scratch", tr_scratch, "Start from fresh parameters");
  train_rl_cmd->add_option("--lambda", tr_lambda);
  train_rl_cmd->add_option("--episodes", tr_episodes);

  // eval -------------------------------------------------------------------
  std::vector<std::string> ev_ckpts;
  std::string ev_topology, ev_random, ev_random_vnfs, ev_out;
  int ev_requests = 1000, ev_jobs = 1;
  std::uint64_t ev_seed = 1, ev_relocate_seed = 0;
  bool ev_relocate = false;
  auto* eval = app.add_subcommand("eval", "Three-test evaluation of greedy checkpoints");
  eval->add_option("--checkpoint", ev_ckpts, "Checkpoint file (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--topology", ev_topology, "Original topology (default: fixture)");
  eval->add_option("--random-pool", ev_random, "Pool directory for the random-topology test");
  eval->add_option("--random-vnfs-pool", ev_random_vnfs,
                   "Pool directory for the random-topology+VNFs test");
  eval->add_flag("--relocate", ev_relocate,
                 "Build the random+VNFs test by relocating instances of --random-pool");
  eval->add_option("--relocate-seed", ev_relocate_seed);
  eval->add_option("--requests", ev_requests, "Requests per test")->check(CLI::PositiveNumber);
  eval->add_option("--seed", ev_seed);
  eval->add_option("--jobs", ev_jobs)->check(CLI::PositiveNumber);
  eval->add_option("--out", ev_out, "Directory for report.csv and the config echo");

  // solve ------------------------------------------------------------------
  std::string sv_topology, sv_chain;
  int sv_src = 0, sv_dst = 0;
  auto* solve = app.add_subcommand("solve", "Exact minimum-delay path for one request");
  solve->add_option("--topology", sv_topology, "Topology file (default: fixture)");
  solve->add_option("--src", sv_src)->required();
  solve->add_option("--dst", sv_dst)->required();
  solve->add_option("--chain", sv_chain, "Comma-separated VNF types, e.g. 1,3");

  // exp --------------------------------------------------------------------
  auto* exp = app.add_subcommand("exp", "Canned experiments");
  exp->require_subcommand(1);
  std::string ex_config, ex_out = "table1";
  std::optional<std::uint64_t> ex_seed;
  std::optional<int> ex_jobs;
  auto* table1 = exp->add_subcommand("table1", "Full desk-scale comparison pipeline");
  table1->add_option("--config", ex_config, "Experiment config JSON")->check(CLI::ExistingFile);
  table1->add_option("--seed", ex_seed);
  table1->add_option("--jobs", ex_jobs)->check(CLI::PositiveNumber);
  table1->add_option("--out", ex_out, "Output directory");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (topo_fixture->parsed()) {
      const fs::path p = output_file(fixture_out, "internet2.json");
      ensure_parent(p);
      write_text_file(p, kInternet2Fixture);
      out << "wrote " << p.string() << ": " << summary(internet2_fixture()) << '\n';
    } else if (topo_gen->parsed()) {
      Rng rng(gen_seed);
      Topology g = random_topology(gen_nodes, gen_edges, gen_dmin, gen_dmax, gen_types, rng);
      g = deploy_vnfs(g, gen_per_type, gen_pmin, gen_pmax, gen_types, rng);
      const fs::path p = output_file(gen_out, "topology.json");
      ensure_parent(p);
      write_text_file(p, save_topology(g));
      out << "wrote " << p.string() << ": " << summary(g) << '\n';
    } else if (topo_mut->parsed()) {
      const MutationParams mp =
          mut_params.empty()
              ? MutationParams{}
              : mutation_params_from_json(parse_json_document(read_text_file(mut_params), "mutation"));
      Rng rng(mut_seed);
      const Topology m = mutate(topology_or_fixture(mut_in), parse_strategy(mut_strategy), rng, mp);
      const fs::path p = output_file(mut_out, "mutated.json");
      ensure_parent(p);
      write_text_file(p, save_topology(m));
      out << "wrote " << p.string() << ": " << summary(m) << '\n';
    } else if (topo_pool->parsed()) {
      const MutationParams mp =
          pool_params.empty()
              ? MutationParams{}
              : mutation_params_from_json(parse_json_document(read_text_file(pool_params), "mutation"));
      const auto pool = generate_pool(topology_or_fixture(pool_in), parse_strategy(pool_strategy),
                                      pool_count, pool_seed, mp);
      save_pool(pool, pool_out);
      int connected = 0;
      for (const auto& t : pool.variants) connected += detail::connected(t.node_count(), t.edges());
      out << "wrote " << pool.variants.size() << " topologies + manifest to " << pool_out
          << " (" << connected << " connected)\n";
    } else if (dataset->parsed()) {
      if (!ds_topology.empty() && !ds_pool.empty()) {
        throw UsageError("--topology and --pool are mutually exclusive");
      }
      if (ds_chain_max < ds_chain_min) throw UsageError("--chain-max is below --chain-min");
      const std::vector<Topology> topologies =
          ds_pool.empty() ? std::vector<Topology>{topology_or_fixture(ds_topology)}
                          : load_pool(ds_pool).variants;
      Rng rng(ds_seed);
      const auto items =
          generate_pool_requests(topologies, ds_count, {ds_chain_min, ds_chain_max}, rng);
      const auto ds = label_dataset(topologies, items);
      const fs::path p = output_file(ds_out, "dataset.jsonl");
      ensure_parent(p);
      write_text_file(p, save_dataset(ds));
      out << "wrote " << ds.entries.size() << " labeled requests to " << p.string() << " ("
          << ds.dropped << " dropped as infeasible)\n";
    } else if (train_sl_cmd->parsed() || train_rl_cmd->parsed()) {
      const bool sl_mode = train_sl_cmd->parsed();
      TrainConfig cfg = tr_config.empty()
                            ? TrainConfig{}
                            : train_config_from_json(
                                  parse_json_document(read_text_file(tr_config), "train config"));
      if (tr_seed) cfg.hp.seed = *tr_seed;
      if (tr_lambda) cfg.hp.lambda = *tr_lambda;
      if (tr_episodes) cfg.hp.episodes = *tr_episodes;
      if (tr_epochs) cfg.hp.sl_epochs = *tr_epochs;
      cfg.hp.validate();
      const Topology base = topology_or_fixture(cfg.topology);
      fs::create_directories(tr_out);
      Policy policy;
      CheckpointMeta meta{cfg.hp.seed, sl_mode ? "sl" : "rl", {}};
      if (sl_mode) {
        if (cfg.dataset.empty()) throw UsageError("train sl: the config must name a dataset");
        const auto ds = load_dataset(read_text_file(cfg.dataset));
        std::vector<Topology> topologies;
        if (cfg.pool.empty()) {
          topologies.push_back(base);
        } else {
          topologies = load_pool(cfg.pool).variants;
        }
        for (const auto& e : ds.entries) {
          if (e.topology_id < 0 || e.topology_id >= static_cast<int>(topologies.size())) {
            throw ValidationError("dataset entry references topology " +
                                  std::to_string(e.topology_id) + " outside the configured set");
          }
        }
        Rng held_rng(cfg.heldout_seed);
        const auto held =
            generate_pool_requests(topologies, cfg.heldout_requests, cfg.hp.chain_lengths, held_rng);
        policy = init_policy(cfg.policy, derive_rng(cfg.hp.seed, 107)());
        std::optional<HeldOut> ho;
        if (!held.empty()) ho = HeldOut{topologies, held};
        const auto hist = train_sl(policy, topologies, ds, cfg.hp, ho, [&](const SlEpoch& e) {
          out << "epoch " << e.epoch << " loss " << e.mean_loss << " heldout_failure "
              << e.heldout_failure_ratio << std::endl;
        });
        std::ostringstream os;
        write_sl_history_csv(os, hist);
        write_text_file(fs::path(tr_out) / "history.csv", os.str());
      } else {
        if (tr_init.empty() == !tr_scratch) {
          throw UsageError("train rl: pass exactly one of --init or --from-scratch");
        }
        if (tr_scratch) {
          policy = init_policy(cfg.policy, derive_rng(cfg.hp.seed, 107)());
        } else {
          policy = load_checkpoint(read_text_file(tr_init));
          if (auto field = config_mismatch(policy.config, cfg.policy)) {
            throw ValidationError("checkpoint " + *field + " does not match the config " + *field);
          }
        }
        const std::vector<Topology> pool =
            cfg.pool.empty() ? std::vector<Topology>{base} : load_pool(cfg.pool).variants;
        const auto hist = train_rl(policy, pool, cfg.hp, [&](const RlRecord& r) {
          if (r.episode % 500 == 0) {
            out << "episode " << r.episode << " rolling_success " << r.rolling_success
                << " rolling_mean_delay " << r.rolling_mean_delay << std::endl;
          }
        });
        std::ostringstream os;
        write_rl_history_csv(os, hist);
        write_text_file(fs::path(tr_out) / "history.csv", os.str());
        meta.extra = {{"lambda", cfg.hp.lambda}, {"init", tr_scratch ? "scratch" : tr_init}};
      }
      write_text_file(fs::path(tr_out) / "config.json", to_json(cfg).dump(2) + "\n");
      write_text_file(fs::path(tr_out) / "checkpoint.json", save_checkpoint(policy, meta));
      out << "lambda=" << cfg.hp.lambda << " seed=" << cfg.hp.seed << '\n'
          << "wrote " << (fs::path(tr_out) / "checkpoint.json").string() << '\n';
    } else if (eval->parsed()) {
      if (ev_relocate && ev_random.empty()) throw UsageError("--relocate needs --random-pool");
      if (ev_relocate && !ev_random_vnfs.empty()) {
        throw UsageError("--relocate and --random-vnfs-pool are mutually exclusive");
      }
      std::vector<Policy> policies;
      std::vector<NamedSolver> solvers;
      policies.reserve(ev_ckpts.size());
      for (const auto& c : ev_ckpts) policies.push_back(load_checkpoint(read_text_file(c)));
      for (std::size_t i = 0; i < ev_ckpts.size(); ++i) {
        fs::path p(ev_ckpts[i]);
        std::string name = p.stem().string();
        if (name == "checkpoint" && p.has_parent_path()) name = p.parent_path().filename().string();
        solvers.push_back({name, greedy_solver(policies[i])});
      }
      ExperimentInputs in{topology_or_fixture(ev_topology), std::nullopt, std::nullopt,
                          ev_requests, ev_seed, ev_jobs};
      if (!ev_random.empty()) in.random_topologies = load_pool(ev_random).variants;
      if (ev_relocate) in.random_vnf_topologies = relocate_all(*in.random_topologies, ev_relocate_seed);
      if (!ev_random_vnfs.empty()) in.random_vnf_topologies = load_pool(ev_random_vnfs).variants;
      const auto rep = run_experiment(solvers, in);
      write_report_table(out, rep);
      if (!ev_out.empty()) {
        fs::create_directories(ev_out);
        write_text_file(fs::path(ev_out) / "report.csv", report_csv_text(rep));
        nlohmann::ordered_json echo;
        echo["checkpoints"] = ev_ckpts;
        echo["topology"] = ev_topology;
        echo["random_pool"] = ev_random;
        echo["random_vnfs_pool"] = ev_random_vnfs;
        echo["relocate"] = ev_relocate;
        echo["relocate_seed"] = ev_relocate_seed;
        echo["requests"] = ev_requests;
        echo["seed"] = ev_seed;
        write_text_file(fs::path(ev_out) / "config.json", echo.dump(2) + "\n");
      }
    } else if (solve->parsed()) {
      const Topology t = topology_or_fixture(sv_topology);
      const SfcRequest req{sv_src, sv_dst, parse_chain(sv_chain)};
      const OracleResult r = solve_optimal(t, req);
      if (!r.feasible) {
        out << "infeasible\n";
      } else {
        out << "path: " << format_path(req, r.actions) << '\n'
            << "delay: " << r.optimal_delay << '\n';
      }
    } else if (table1->parsed()) {
      Table1Config cfg = ex_config.empty()
                             ? Table1Config{}
                             : table1_config_from_json(
                                   parse_json_document(read_text_file(ex_config), "exp config"));
      if (ex_seed) cfg.seed = *ex_seed;
      if (ex_jobs) cfg.jobs = *ex_jobs;
      const auto res = run_table1(cfg, &out);
      write_table1_outputs(cfg, res, ex_out);
      write_report_table(out, res.report);
      out << "wrote " << ex_out << "/report.csv\n";
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace sfc::cli

// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// here; exit status is non-zero when any criterion fails.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "../gradchecks.hpp"
#include "../support.hpp"
#include "sfc/pipeline.hpp"

using namespace sfc;
namespace fs = std::filesystem;

namespace {

constexpr double kOracleBudgetSec = 60.0;
constexpr int kOracleCases = 250;
constexpr double kGradBudgetSec = 120.0;
constexpr double kMetricTol = 0.05;
constexpr double kMutationBudgetSec = 60.0;
constexpr int kMutations = 1000;
constexpr double kNodesAddedMean = 1.2, kNodesAddedTol = 0.15;
constexpr double kEdgeAddMean = 4.5, kEdgeAddTol = 0.4;
constexpr double kSlMaxFailure = 0.05;
constexpr int kSlMaxEpochs = 30;
constexpr double kSlBudgetSec = 30 * 60.0;
constexpr double kRlRolling = 0.95;
constexpr int kRlEpisodeLimit = 5000;
constexpr double kFlexGap = 3.0;
constexpr int kVarNRequests = 100;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Verdict& v) {
  if (!v.pass) ++failures;
  std::cout << "criterion " << std::setw(2) << id << " " << (v.pass ? "PASS" : "FAIL") << "  "
            << title << ": " << v.detail << std::endl;
}

std::string fmt(double x, int decimals = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << x;
  return os.str();
}

bool simple_and_connected(const Topology& t) {
  std::set<std::pair<int, int>> seen;
  for (const auto& e : t.edges()) {
    if (e.u == e.v || !seen.insert({std::min(e.u, e.v), std::max(e.u, e.v)}).second) return false;
  }
  return detail::connected(t.node_count(), t.edges());
}

std::multiset<std::pair<int, int>> type_delay_multiset(const Topology& t) {
  std::multiset<std::pair<int, int>> m;
  for (const auto& i : t.instances()) m.insert({i.vnf_type, i.proc_delay});
  return m;
}

Verdict oracle_vs_brute_force() {
  const auto t0 = Clock::now();
  Rng rng(derive_rng(2024, 1));
  int mismatches = 0, feasible = 0;
  for (int i = 0; i < kOracleCases; ++i) {
    const auto c = sfc::testing::random_small_case(rng, 8, 3);
    const auto fast = solve_optimal(c.topology, c.request);
    const auto slow = brute_force_optimal(c.topology, c.request, sfc::testing::brute_force_budget(c));
    if (fast.feasible != slow.feasible ||
        (fast.feasible && fast.optimal_delay != slow.optimal_delay)) {
      ++mismatches;
    }
    feasible += fast.feasible;
  }
  const double sec = seconds_since(t0);
  return {mismatches == 0 && sec < kOracleBudgetSec,
          std::to_string(kOracleCases) + " cases (" + std::to_string(feasible) + " feasible), " +
              std::to_string(mismatches) + " mismatches, " + fmt(sec, 1) + " s"};
}

Verdict gradient_fidelity() {
  using namespace sfc::testing;
  const auto t0 = Clock::now();
  std::vector<std::pair<std::string, nn::GradCheckReport>> checks;
  for (std::uint64_t s : {1, 2}) {
    checks.push_back({"affine", check_affine(s)});
    checks.push_back({"gru", check_gru(s)});
    checks.push_back({"masked_softmax", check_masked_softmax(s)});
    checks.push_back({"encoder", check_encoder(s)});
    checks.push_back({"decode_step(move)", check_decode_step(s, false)});
    checks.push_back({"decode_step(process)", check_decode_step(s, true)});
  }
  const Topology small = small_topology();
  for (std::uint64_t s = 1; s <= 4; ++s) checks.push_back({"episode", check_episode(small, s)});
  bool ok = true;
  double unit_max = 0.0, episode_max = 0.0;
  std::string failed;
  for (const auto& [name, r] : checks) {
    ok = ok && r.pass;
    if (!r.pass) failed += " " + name;
    (name == "episode" ? episode_max : unit_max) =
        std::max(name == "episode" ? episode_max : unit_max, r.max_rel_err);
  }
  const double sec = seconds_since(t0);
  std::ostringstream os;
  os << checks.size() << " checks, max rel err unit " << std::scientific << std::setprecision(2)
     << unit_max << " (tol " << kUnitTol << "), episode " << episode_max << " (tol "
     << kEpisodeTol << "), " << std::fixed << std::setprecision(1) << sec << " s";
  if (!failed.empty()) os << ", failed:" << failed;
  return {ok && sec < kGradBudgetSec, os.str()};
}

Verdict metric_arithmetic() {
  struct Row {
    double random, original, printed;
  };
  const std::vector<Row> rows{{0.5133, 0.0080, 64.1}, {0.7399, 0.0080, 92.5},
                              {0.2627, 0.0064, 41.0}, {0.4410, 0.0064, 68.9},
                              {0.0432, 0.0092, 4.7},  {0.0403, 0.0103, 3.9},
                              {0.0663, 0.0103, 6.4}};
  int ok = 0;
  std::string bad;
  for (const auto& r : rows) {
    const double got = round_to(*deterioration_rate(r.random, r.original), 1);
    if (std::abs(got - r.printed) <= kMetricTol + 1e-12) {
      ++ok;
    } else {
      bad += " " + fmt(r.random) + "/" + fmt(r.original) + "=" + fmt(got, 1) + " vs printed " +
             fmt(r.printed, 1) + ";";
    }
  }
  return {ok == static_cast<int>(rows.size()),
          std::to_string(ok) + "/" + std::to_string(rows.size()) + " match" +
              (bad.empty() ? "" : ", mismatch:" + bad)};
}

Verdict mutator_invariants() {
  const auto t0 = Clock::now();
  const Topology f = internet2_fixture();
  const auto base_multiset = type_delay_multiset(f);
  int bad_shape = 0, cs1_moved = 0, cs2_multiset = 0;
  double nodes = 0, edge_fired = 0;
  for (int i = 0; i < kMutations; ++i) {
    Rng r1(derive_rng(4001, static_cast<std::uint64_t>(i)));
    MutationStats st;
    const Topology a = mutate_cs1(f, r1, {}, &st);
    nodes += st.nodes_added;
    edge_fired += st.edge_add_fired;
    bad_shape += !simple_and_connected(a);
    cs1_moved += a.instances() != f.instances();

    Rng r2(derive_rng(4002, static_cast<std::uint64_t>(i)));
    const Topology b = mutate_cs2(f, r2, {});
    bad_shape += !simple_and_connected(b);
    cs2_multiset += type_delay_multiset(b) != base_multiset;
  }
  nodes /= kMutations;
  edge_fired /= kMutations;
  const double sec = seconds_since(t0);
  const bool means_ok = std::abs(nodes - kNodesAddedMean) <= kNodesAddedTol &&
                        std::abs(edge_fired - kEdgeAddMean) <= kEdgeAddTol;
  const bool ok = bad_shape == 0 && cs1_moved == 0 && cs2_multiset == 0 && means_ok &&
                  sec < kMutationBudgetSec;
  return {ok, std::to_string(kMutations) + "+" + std::to_string(kMutations) +
                  " mutations, not simple/connected " + std::to_string(bad_shape) +
                  ", CS1 placement changed " + std::to_string(cs1_moved) +
                  ", CS2 multiset changed " + std::to_string(cs2_multiset) + ", mean nodes added " +
                  fmt(nodes, 3) + ", mean edge-add trials fired " + fmt(edge_fired, 3) + ", " +
                  fmt(sec, 1) + " s"};
}

Verdict desk_sl(const Table1Config& cfg, const Table1Result& res, double sec) {
  int reached = 0;
  for (const auto& e : res.sl_history) {
    if (!reached && e.heldout_failure_ratio <= kSlMaxFailure) reached = e.epoch;
  }
  const double final_fr = res.sl_history.empty() ? 1.0 : res.sl_history.back().heldout_failure_ratio;
  const bool ok = reached > 0 && reached <= kSlMaxEpochs && cfg.hp.sl_epochs <= kSlMaxEpochs &&
                  final_fr <= kSlMaxFailure && sec < kSlBudgetSec;
  return {ok, std::to_string(res.dataset_size) + " labeled (" +
                  std::to_string(res.dataset_dropped) + " dropped), " +
                  std::to_string(cfg.heldout_requests) + " held out, failure <= " +
                  fmt(kSlMaxFailure, 2) + " first at epoch " + std::to_string(reached) +
                  ", final " + fmt(final_fr) + " after " + std::to_string(cfg.hp.sl_epochs) +
                  " epochs, " + fmt(sec, 1) + " s"};
}

const RlVariant& variant(const Table1Result& res, double lambda, std::optional<Strategy> s) {
  for (const auto& v : res.rl) {
    if (v.lambda == lambda && v.strategy == s) return v;
  }
  throw std::logic_error("missing RL variant " + rl_variant_name(lambda, s));
}

const ReportRow& row(const Table1Result& res, const std::string& name) {
  for (const auto& r : res.report.rows) {
    if (r.approach == name) return r;
  }
  throw std::logic_error("missing report row " + name);
}

Verdict desk_rl(const Table1Config& cfg, const Table1Result& res) {
  const auto& v = variant(res, 0.0, std::nullopt);
  double best = 0.0;
  int reached = 0;
  for (const auto& h : v.history) {
    if (h.episode < cfg.hp.rolling_window || h.episode > kRlEpisodeLimit) continue;
    best = std::max(best, h.rolling_success);
    if (!reached && h.rolling_success >= kRlRolling) reached = h.episode;
  }
  return {reached > 0, v.name + " on the fixed fixture: rolling success (window " +
                           std::to_string(cfg.hp.rolling_window) + ") >= " + fmt(kRlRolling, 2) +
                           " first at episode " + std::to_string(reached) + ", best " +
                           fmt(best, 3) + " within " + std::to_string(kRlEpisodeLimit) +
                           ", final " + fmt(v.history.back().rolling_success, 3)};
}

std::string det_text(const std::optional<double>& d) { return d ? fmt(*d, 1) : "undef"; }

Verdict flexibility(const Table1Result& res) {
  const auto& sl = row(res, "SL(Baseline)");
  const auto& rl = row(res, rl_variant_name(0.0, std::nullopt));
  const auto& cs = row(res, rl_variant_name(0.0, Strategy::CS1));
  const auto d_sl = sl.random_topo->deterioration;
  const auto d_rl = rl.random_topo->deterioration;
  const auto d_cs = cs.random_topo->deterioration;
  const bool ok = d_sl && d_rl && d_cs && *d_cs * kFlexGap <= *d_rl && *d_rl < *d_sl;
  return {ok, "Random Topo. deterioration " + cs.approach + " " + det_text(d_cs) + ", " +
                  rl.approach + " " + det_text(d_rl) + ", " + sl.approach + " " +
                  det_text(d_sl) + " (need CS x" + fmt(kFlexGap, 0) + " <= RL < SL)"};
}

Verdict lambda_tradeoff(const Table1Result& res) {
  const auto& l0 = row(res, rl_variant_name(0.0, std::nullopt)).original;
  const auto& l1 = row(res, rl_variant_name(1.0, std::nullopt)).original;
  const bool ok = l0.delay_ratio && l1.delay_ratio &&
                  l1.mean_success_delay <= l0.mean_success_delay &&
                  *l1.delay_ratio <= *l0.delay_ratio;
  auto dr = [](const TestMetrics& m) { return m.delay_ratio ? fmt(*m.delay_ratio) : "-"; };
  return {ok, "test 1 mean success delay lambda=1 " + fmt(l1.mean_success_delay, 3) +
                  " vs lambda=0 " + fmt(l0.mean_success_delay, 3) + ", delay ratio " + dr(l1) +
                  " vs " + dr(l0) + ", failure ratio " + fmt(l1.failure_ratio) + " vs " +
                  fmt(l0.failure_ratio)};
}

Verdict variable_n(const std::string& checkpoint_text) {
  const Policy pol = load_checkpoint(checkpoint_text);
  std::string detail;
  bool ok = true;
  for (int n : {8, 12, 20}) {
    try {
      Rng rng(derive_rng(9000, static_cast<std::uint64_t>(n)));
      const Topology bare = random_topology(n, n + n / 2, 1, 10, pol.config.vnf_types, rng);
      const Topology t = deploy_vnfs(bare, 2, 1, 5, pol.config.vnf_types, rng);
      const TestSet ts = build_test_set("n" + std::to_string(n), {t}, kVarNRequests,
                                        derive_rng(9100, static_cast<std::uint64_t>(n))());
      const auto m = summarize(evaluate(greedy_solver(pol), ts, 1));
      detail += " N=" + std::to_string(n) + " failure " + fmt(m.failure_ratio, 3) + ";";
      ok = ok && m.requests == static_cast<int>(ts.requests.size());
    } catch (const std::exception& e) {
      ok = false;
      detail += " N=" + std::to_string(n) + " error: " + e.what() + ";";
    }
  }
  return {ok, "one checkpoint," + detail};
}

Verdict determinism(const std::string& sfcrl, const fs::path& work, const fs::path& config) {
  const fs::path a = work / "det_a", b = work / "det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  auto run = [&](const fs::path& out, int jobs) {
    const std::string cmd = "\"" + sfcrl + "\" exp table1 --config \"" + config.string() +
                            "\" --seed 5 --jobs " + std::to_string(jobs) + " --out \"" +
                            out.string() + "\" > \"" + (out.string() + ".log") + "\" 2>&1";
    return std::system(cmd.c_str());
  };
  const int ra = run(a, 1), rb = run(b, 2);
  if (ra != 0 || rb != 0) return {false, "exp table1 exited with " + std::to_string(ra) + "/" +
                                             std::to_string(rb)};
  std::string diff;
  for (const char* f : {"report.csv", "report.txt"}) {
    if (read_text_file(a / f) != read_text_file(b / f)) diff += std::string(" ") + f;
  }
  return {diff.empty(), "two runs of exp table1 (" + config.filename().string() +
                            ", seed 5, jobs 1 and 2): " +
                            (diff.empty() ? "report.csv and report.txt byte-identical"
                                          : "differ in" + diff)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string sfcrl, workdir = "acceptance_work";
  std::string config_dir = SFC_CONFIG_DIR;
  app.add_option("--sfcrl", sfcrl, "Path to the sfcrl binary")->required();
  app.add_option("--workdir", workdir, "Scratch directory for pipeline outputs");
  app.add_option("--configs", config_dir, "Directory holding table1.json and table1_quick.json");
  CLI11_PARSE(app, argc, argv);
  const fs::path work = fs::absolute(workdir);
  fs::create_directories(work);

  try {
    report(1, "oracle vs brute force", oracle_vs_brute_force());
    report(2, "gradient fidelity", gradient_fidelity());
    report(3, "metric arithmetic", metric_arithmetic());
    report(4, "mutator invariants", mutator_invariants());

    const Table1Config cfg = table1_config_from_json(
        parse_json_document(read_text_file(fs::path(config_dir) / "table1.json"), "table1.json"));
    const auto t0 = Clock::now();
    std::ofstream log(work / "table1.log");
    const Table1Result res = run_table1(cfg, &log);
    write_table1_outputs(cfg, res, work / "table1");
    std::cout << "table1 pipeline finished in " << fmt(seconds_since(t0), 1) << " s\n"
              << report_table_text(res.report) << std::flush;

    report(5, "desk-scale SL", desk_sl(cfg, res, res.sl_seconds));
    report(6, "desk-scale RL convergence", desk_rl(cfg, res));
    report(7, "flexibility trend", flexibility(res));
    report(8, "lambda trade-off", lambda_tradeoff(res));
    report(9, "variable-N execution", variable_n(save_checkpoint(res.sl, {cfg.seed, "sl", {}})));
    report(10, "determinism", determinism(sfcrl, work, fs::path(config_dir) / "table1_quick.json"));
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}

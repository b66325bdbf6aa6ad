#pragma once

// Failure Ratio, Delay Ratio, Deterioration Rate and the three-test harness
// (original topology, mutated topologies, mutated topologies with relocated
// VNF instances).

#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sfc/oracle.hpp"
#include "sfc/policy.hpp"
#include "sfc/topology.hpp"

namespace sfc {

struct RequestOutcome {
  bool success = false;
  long delay = 0;
  std::optional<long> oracle_delay;
};

using TestOutcome = std::vector<RequestOutcome>;

inline double failure_ratio(std::span<const RequestOutcome> outcomes) {
  if (outcomes.empty()) throw std::invalid_argument("failure_ratio: no outcomes");
  std::size_t failed = 0;
  for (const auto& o : outcomes) failed += o.success ? 0 : 1;
  return static_cast<double>(failed) / static_cast<double>(outcomes.size());
}

// Sum of generated delays over sum of oracle delays, over successful
// requests that carry an oracle label.
inline double delay_ratio(std::span<const RequestOutcome> outcomes) {
  long num = 0, den = 0;
  for (const auto& o : outcomes) {
    if (!o.success || !o.oracle_delay) continue;
    num += o.delay;
    den += *o.oracle_delay;
  }
  if (den == 0) throw std::invalid_argument("delay_ratio: zero oracle delay total");
  return static_cast<double>(num) / static_cast<double>(den);
}

inline double round_to(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(x * scale) / scale;
}

// fr_random / fr_original, or nullopt when the original failure ratio is 0.
inline std::optional<double> deterioration_rate(double fr_random, double fr_original) {
  if (fr_original <= 0.0) return std::nullopt;
  return fr_random / fr_original;
}

// ---------------------------------------------------------------------------

struct TestSet {
  std::string name;
  std::vector<Topology> topologies;
  std::vector<TopologyRequest> requests;  // oracle-feasible only
  std::vector<long> oracle_delays;
  int infeasible = 0;
};

// Draws `count` requests (each on a uniformly chosen topology) and keeps the
// oracle-feasible ones.
inline TestSet build_test_set(std::string name, std::vector<Topology> topologies, int count,
                              std::uint64_t seed, ChainLengthRange lengths = {}) {
  TestSet ts{std::move(name), std::move(topologies), {}, {}, 0};
  Rng rng(seed);
  for (auto& item : generate_pool_requests(ts.topologies, count, lengths, rng)) {
    const Topology& t = ts.topologies[static_cast<std::size_t>(item.topology_id)];
    OracleResult r = solve_optimal(t, item.request);
    if (!r.feasible || static_cast<int>(r.actions.size()) > default_max_steps(t, item.request)) {
      ++ts.infeasible;
      continue;
    }
    ts.requests.push_back(std::move(item));
    ts.oracle_delays.push_back(r.optimal_delay);
  }
  return ts;
}

// Anything that turns a request into a path: a greedy policy or the oracle.
using Solver = std::function<PathResult(const Topology&, const SfcRequest&)>;

inline Solver greedy_solver(const Policy& policy) {
  return [&policy](const Topology& t, const SfcRequest& req) {
    Rng unused(0);
    return rollout(policy, t, req, {}, unused).result;
  };
}

inline Solver oracle_solver() {
  return [](const Topology& t, const SfcRequest& req) { return solve_optimal(t, req).path; };
}

inline TestOutcome evaluate(const Solver& solver, const TestSet& ts, int jobs = 1) {
  TestOutcome out(ts.requests.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < ts.requests.size(); i += stride) {
      const auto& item = ts.requests[i];
      PathResult p =
          solver(ts.topologies[static_cast<std::size_t>(item.topology_id)], item.request);
      out[i] = {p.success, p.total_delay, ts.oracle_delays[i]};
    }
  };
  const auto n = static_cast<std::size_t>(std::max(jobs, 1));
  if (n == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < n; ++j) pool.emplace_back(work, j, n);
    for (auto& th : pool) th.join();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct TestMetrics {
  double failure_ratio = 0.0;
  std::optional<double> delay_ratio;
  std::optional<double> deterioration;  // tests 2 and 3 only
  double mean_success_delay = 0.0;
  int requests = 0;
};

struct ReportRow {
  std::string approach;
  TestMetrics original;
  std::optional<TestMetrics> random_topo;
  std::optional<TestMetrics> random_topo_vnfs;
};

struct MetricsReport {
  std::vector<ReportRow> rows;
  int infeasible_original = 0;
  int infeasible_random = 0;
  int infeasible_random_vnfs = 0;
};

inline TestMetrics summarize(std::span<const RequestOutcome> outcomes,
                             std::optional<double> original_fr = std::nullopt) {
  TestMetrics m;
  m.requests = static_cast<int>(outcomes.size());
  m.failure_ratio = failure_ratio(outcomes);
  long sum = 0;
  int ok = 0;
  for (const auto& o : outcomes) {
    if (o.success) {
      sum += o.delay;
      ++ok;
    }
  }
  m.mean_success_delay = ok ? static_cast<double>(sum) / ok : 0.0;
  if (ok) m.delay_ratio = delay_ratio(outcomes);
  if (original_fr) m.deterioration = deterioration_rate(m.failure_ratio, *original_fr);
  return m;
}

struct NamedSolver {
  std::string name;
  Solver solver;
};

struct ExperimentInputs {
  Topology fixture;
  std::optional<std::vector<Topology>> random_topologies;       // CS1 test pool
  std::optional<std::vector<Topology>> random_vnf_topologies;   // same, instances relocated
  int requests_per_test = 1000;
  std::uint64_t seed = 1;
  int jobs = 1;
};

// Test 3 topologies: the test-2 structures with every instance relocated.
inline std::vector<Topology> relocate_all(std::span<const Topology> topologies,
                                          std::uint64_t seed) {
  std::vector<Topology> out;
  for (std::size_t i = 0; i < topologies.size(); ++i) {
    Rng rng = derive_rng(seed, i);
    out.push_back(relocate_instances(topologies[i], rng));
  }
  return out;
}

inline MetricsReport run_experiment(std::span<const NamedSolver> solvers,
                                    const ExperimentInputs& in) {
  MetricsReport rep;
  const TestSet original =
      build_test_set("original", {in.fixture}, in.requests_per_test, derive_rng(in.seed, 1)());
  rep.infeasible_original = original.infeasible;
  std::optional<TestSet> random, random_vnfs;
  if (in.random_topologies) {
    random = build_test_set("random", *in.random_topologies, in.requests_per_test,
                            derive_rng(in.seed, 2)());
    rep.infeasible_random = random->infeasible;
  }
  if (in.random_vnf_topologies) {
    random_vnfs = build_test_set("random+vnfs", *in.random_vnf_topologies, in.requests_per_test,
                                 derive_rng(in.seed, 3)());
    rep.infeasible_random_vnfs = random_vnfs->infeasible;
  }
  for (const auto& s : solvers) {
    ReportRow row;
    row.approach = s.name;
    row.original = summarize(evaluate(s.solver, original, in.jobs));
    if (random) {
      row.random_topo = summarize(evaluate(s.solver, *random, in.jobs), row.original.failure_ratio);
    }
    if (random_vnfs) {
      row.random_topo_vnfs =
          summarize(evaluate(s.solver, *random_vnfs, in.jobs), row.original.failure_ratio);
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

namespace detail {

inline std::string fixed(double v, int decimals) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << v;
  return os.str();
}

inline std::string ratio_with_det(const std::optional<TestMetrics>& m) {
  if (!m) return "";
  std::string s = fixed(m->failure_ratio, 4);
  s += m->deterioration ? " (" + fixed(round_to(*m->deterioration, 1), 1) + ")" : " (undef)";
  return s;
}

}  // namespace detail

// CSV columns mirror the published table plus extension columns (delay
// ratios on the random tests, mean success delays, request counts).
inline void write_report_csv(std::ostream& os, const MetricsReport& rep) {
  using detail::fixed;
  os << "approach,original_failure_ratio,original_delay_ratio,random_failure_ratio,"
        "random_deterioration,random_vnfs_failure_ratio,random_vnfs_deterioration,"
        "original_mean_delay,random_delay_ratio,random_vnfs_delay_ratio,"
        "original_requests,random_requests,random_vnfs_requests\n";
  auto opt = [](const std::optional<double>& v, int d) { return v ? fixed(*v, d) : std::string(); };
  for (const auto& r : rep.rows) {
    os << r.approach << ',' << fixed(r.original.failure_ratio, 4) << ','
       << opt(r.original.delay_ratio, 4) << ',';
    for (const auto* m : {&r.random_topo, &r.random_topo_vnfs}) {
      if (*m) {
        os << fixed((*m)->failure_ratio, 4) << ','
           << ((*m)->deterioration ? fixed(round_to(*(*m)->deterioration, 1), 1) : "undef")
           << ',';
      } else {
        os << ",,";
      }
    }
    os << fixed(r.original.mean_success_delay, 4) << ','
       << (r.random_topo ? opt(r.random_topo->delay_ratio, 4) : "") << ','
       << (r.random_topo_vnfs ? opt(r.random_topo_vnfs->delay_ratio, 4) : "") << ','
       << r.original.requests << ',' << (r.random_topo ? r.random_topo->requests : 0) << ','
       << (r.random_topo_vnfs ? r.random_topo_vnfs->requests : 0) << '\n';
  }
}

inline void write_report_table(std::ostream& os, const MetricsReport& rep) {
  using detail::fixed;
  std::size_t w0 = 8;
  for (const auto& r : rep.rows) w0 = std::max(w0, r.approach.size());
  auto line = [&](const std::string& a, const std::string& b, const std::string& c,
                  const std::string& d, const std::string& e) {
    os << "| " << std::left << std::setw(static_cast<int>(w0)) << a << " | " << std::setw(13) << b
       << " | " << std::setw(11) << c << " | " << std::setw(21) << d << " | " << std::setw(21) << e
       << " |\n";
  };
  line("Approach", "Orig. Failure", "Orig. Delay", "Random Topo. Failure", "Random+VNFs Failure");
  line(std::string(w0, '-'), std::string(13, '-'), std::string(11, '-'), std::string(21, '-'),
       std::string(21, '-'));
  for (const auto& r : rep.rows) {
    line(r.approach, fixed(r.original.failure_ratio, 4),
         r.original.delay_ratio ? fixed(*r.original.delay_ratio, 4) : "",
         detail::ratio_with_det(r.random_topo), detail::ratio_with_det(r.random_topo_vnfs));
  }
  os << "infeasible requests excluded: original " << rep.infeasible_original << ", random "
     << rep.infeasible_random << ", random+vnfs " << rep.infeasible_random_vnfs << '\n';
}

}  // namespace sfc

// dlgp: plan, benchmark, simulate and verify tabletop rearrangement.
//
// Exit codes: 0 ok, 1 the planner found no solution (or a simulation
// failed), 2 invalid input.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dlgp/bench/instance.hpp"
#include "dlgp/bench/oracle.hpp"
#include "dlgp/bench/runner.hpp"
#include "dlgp/bench/tables.hpp"
#include "dlgp/fullopt.hpp"
#include "dlgp/io.hpp"
#include "dlgp/planner.hpp"
#include "dlgp/sim.hpp"

namespace {

using namespace dlgp;

constexpr int kExitOk = 0;
constexpr int kExitNoSolution = 1;
constexpr int kExitInvalid = 2;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput:
    case ErrorCode::kUnknownBlock:
    case ErrorCode::kDegenerateModel:
      return kExitInvalid;
    default:
      return kExitNoSolution;
  }
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    io::write_text_file(path, text);
  }
}

template <typename T, typename Parse>
std::vector<T> split_list(const std::string& s, Parse parse, const char* what) {
  std::vector<T> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    auto v = parse(item);
    if (!v) throw PlanningError(ErrorCode::kInvalidInput, std::string("bad ") + what + ": " + item);
    out.push_back(*v);
  }
  if (out.empty()) throw PlanningError(ErrorCode::kInvalidInput, std::string("empty ") + what);
  return out;
}

std::optional<int> parse_int(const std::string& s) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------

struct PlanArgs {
  std::string instance;
  bool full_opt = false;
  std::string out;
  std::int64_t node_budget = 10000;
  std::int64_t fullopt_budget = 1000000;
};

int run_plan(const PlanArgs& a) {
  const bench::Instance inst = io::load_instance(a.instance);
  PlannerConfig cfg;
  cfg.ws = inst.ws;
  cfg.node_budget = a.node_budget;
  Plan p = dts_solve(inst.world0, inst.goal, cfg);
  if (a.full_opt) {
    FullOptOptions fo;
    fo.miqp.node_budget = a.fullopt_budget;
    p = optimize_full(p, inst.world0, inst.goal, inst.ws, fo);
  }
  const ReplayReport rep = replay_plan(p, inst.goal, inst.ws);
  if (!rep.ok) {
    std::cerr << "plan failed replay: " << rep.violations.front() << "\n";
    return kExitNoSolution;
  }
  emit(a.out, io::to_json(p).dump(2) + "\n");
  std::fprintf(stderr, "makespan %d, ee displacement %.4f m, nodes %lld%s\n", p.makespan,
               p.ee_displacement, static_cast<long long>(p.nodes_visited),
               p.unrefined ? " (unrefined)" : "");
  return kExitOk;
}

struct BenchArgs {
  std::string domain = "tower";
  std::string sizes = "4";
  int trials = 15;
  std::string solvers = "dts";
  std::uint64_t seed = 0;
  std::int64_t node_budget = -1;
  std::int64_t mbts_budget = 5000;
  std::int64_t fullopt_budget = 1000000;
  std::string csv;
  std::string records;
};

int run_bench(const BenchArgs& a) {
  bench::BenchConfig cfg;
  const auto domain = bench::parse_domain(a.domain);
  if (!domain) throw PlanningError(ErrorCode::kInvalidInput, "unknown domain " + a.domain);
  cfg.domain = *domain;
  cfg.sizes = split_list<int>(a.sizes, parse_int, "size");
  cfg.trials = a.trials;
  cfg.first_seed = a.seed;
  cfg.solvers = split_list<bench::Solver>(a.solvers, bench::parse_solver, "solver");
  if (a.node_budget > 0) cfg.budgets.dts_nodes = a.node_budget;
  cfg.budgets.mbts_nodes = a.mbts_budget;
  cfg.budgets.fullopt_nodes = a.fullopt_budget;
  const auto records = bench::run_benchmark(cfg);
  std::cout << bench::emit_text_table(records);
  if (!a.csv.empty()) io::write_text_file(a.csv, bench::emit_csv(records));
  if (!a.records.empty()) io::write_text_file(a.records, bench::emit_records_csv(records));
  return kExitOk;
}

struct SimArgs {
  std::string scenario;
  std::string trace;
  std::int64_t node_budget = 10000;
};

int run_simulate(const SimArgs& a) {
  const Scenario sc = io::load_scenario(a.scenario);
  PlannerConfig base;
  base.node_budget = a.node_budget;
  const Trace t = closed_loop_run(sc, base);
  emit(a.trace, io::trace_jsonl(t));
  std::fprintf(stderr, "%s: %s after %zu actions, %d replans%s%s\n", sc.name.c_str(),
               t.success ? "success" : "failure", t.steps.size(), t.replan_count,
               t.success ? "" : ", ", t.success ? "" : t.reason.c_str());
  return t.success ? kExitOk : kExitNoSolution;
}

struct OracleArgs {
  std::string instance;
  int max_actions = 6;
  bool no_travel = false;
};

int run_oracle(const OracleArgs& a) {
  const bench::Instance inst = io::load_instance(a.instance);
  bench::OracleOptions opt;
  opt.max_actions = a.max_actions;
  opt.travel = !a.no_travel;
  const bench::OracleResult r = bench::oracle_plan(inst, opt);
  Json out = {{"makespan", r.makespan}, {"skeletons", r.skeletons}};
  out["min_displacement"] = opt.travel ? Json(r.min_displacement) : Json(nullptr);
  if (opt.travel) out["plan"] = io::to_json(r.plan, false);
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

struct GenArgs {
  std::string domain = "tower";
  int x = 4;
  std::uint64_t seed = 0;
  std::string out;
};

int run_gen(const GenArgs& a) {
  const auto domain = bench::parse_domain(a.domain);
  if (!domain) throw PlanningError(ErrorCode::kInvalidInput, "unknown domain " + a.domain);
  emit(a.out, io::to_json(bench::gen_instance(*domain, a.x, a.seed)).dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabletop rearrangement planner"};
  app.require_subcommand(1);
  int rc = kExitOk;

  PlanArgs plan;
  auto* plan_cmd = app.add_subcommand("plan", "Solve one instance with DTS");
  plan_cmd->add_option("instance", plan.instance, "Instance JSON")->required();
  plan_cmd->add_flag("--full-opt", plan.full_opt, "Jointly re-optimize free placements");
  plan_cmd->add_option("--out", plan.out, "Plan JSON (default: stdout)");
  plan_cmd->add_option("--node-budget", plan.node_budget, "DTS node budget");
  plan_cmd->add_option("--fullopt-budget", plan.fullopt_budget, "Branch-and-bound node budget");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Run seeded benchmark instances");
  bench_cmd->add_option("--domain", bench_args.domain, "op | tower | tower-tool")
      ->check(CLI::IsMember({"op", "tower", "tower-tool"}));
  bench_cmd->add_option("--sizes", bench_args.sizes, "Comma-separated block counts");
  bench_cmd->add_option("--trials", bench_args.trials, "Instances per size");
  bench_cmd->add_option("--solvers", bench_args.solvers,
                        "Comma-separated: dts, mbts0, mbts1, mbts2, fullopt, local");
  bench_cmd->add_option("--seed", bench_args.seed, "First instance seed");
  bench_cmd->add_option("--node-budget", bench_args.node_budget, "DTS node budget");
  bench_cmd->add_option("--mbts-budget", bench_args.mbts_budget, "MBTS node budget");
  bench_cmd->add_option("--fullopt-budget", bench_args.fullopt_budget,
                        "Branch-and-bound node budget");
  bench_cmd->add_option("--csv", bench_args.csv, "Summary CSV");
  bench_cmd->add_option("--records", bench_args.records, "Per-record CSV");

  SimArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Closed-loop run of a scenario");
  sim_cmd->add_option("scenario", sim.scenario, "Scenario JSON")->required();
  sim_cmd->add_option("--trace", sim.trace, "Trace JSON lines (default: stdout)");
  sim_cmd->add_option("--node-budget", sim.node_budget, "DTS node budget per replan");

  OracleArgs oracle;
  auto* oracle_cmd = app.add_subcommand("oracle", "Brute-force optimum of a small instance");
  oracle_cmd->add_option("instance", oracle.instance, "Instance JSON")->required();
  oracle_cmd->add_option("--max-actions", oracle.max_actions, "Skeleton length limit");
  oracle_cmd->add_flag("--no-travel", oracle.no_travel, "Makespan only");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a seeded instance");
  gen_cmd->add_option("--domain", gen.domain, "op | tower | tower-tool")
      ->check(CLI::IsMember({"op", "tower", "tower-tool"}));
  gen_cmd->add_option("--x", gen.x, "Block count");
  gen_cmd->add_option("--seed", gen.seed, "Seed");
  gen_cmd->add_option("--out", gen.out, "Instance JSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*plan_cmd) rc = run_plan(plan);
    if (*bench_cmd) rc = run_bench(bench_args);
    if (*sim_cmd) rc = run_simulate(sim);
    if (*oracle_cmd) rc = run_oracle(oracle);
    if (*gen_cmd) rc = run_gen(gen);
  } catch (const PlanningError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  }
  return rc;
}

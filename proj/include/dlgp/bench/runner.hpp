#pragma once

// Benchmark runs over seeded instances, one record per (instance, solver).
// Every solver sees the same instances; a record is a success only if its
// plan replays.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dlgp/baselines.hpp"
#include "dlgp/bench/instance.hpp"
#include "dlgp/fullopt.hpp"
#include "dlgp/planner.hpp"

namespace dlgp::bench {

enum class Solver { kDts, kMbts0, kMbts1, kMbts2, kFullOpt, kLocalNlp };

inline const char* to_string(Solver s) {
  switch (s) {
    case Solver::kDts: return "dts";
    case Solver::kMbts0: return "mbts0";
    case Solver::kMbts1: return "mbts1";
    case Solver::kMbts2: return "mbts2";
    case Solver::kFullOpt: return "fullopt";
    case Solver::kLocalNlp: return "local";
  }
  return "?";
}

inline std::string solver_label(Solver s) {
  switch (s) {
    case Solver::kDts: return "DTS";
    case Solver::kMbts0: return "MBTS-0";
    case Solver::kMbts1: return "MBTS-1";
    case Solver::kMbts2: return "MBTS-2";
    case Solver::kFullOpt: return "FullOpt";
    case Solver::kLocalNlp: return "LocalNLP";
  }
  return "?";
}

inline std::optional<Solver> parse_solver(const std::string& s) {
  for (Solver v : {Solver::kDts, Solver::kMbts0, Solver::kMbts1, Solver::kMbts2,
                   Solver::kFullOpt, Solver::kLocalNlp}) {
    if (s == to_string(v) || s == solver_label(v)) return v;
  }
  return std::nullopt;
}

struct BenchRecord {
  std::string instance_id;
  Domain domain = Domain::kOp;
  int x = 0;
  std::uint64_t seed = 0;
  Solver solver = Solver::kDts;
  bool success = false;
  std::int64_t nodes = 0;
  double ee_displacement = 0.0;
  int makespan = 0;
  // Informational only; not reproducible across machines.
  double wall_seconds = 0.0;
  // Failure reason, or "unrefined" for a FullOpt fallback.
  std::string note;
  // The replayed plan; empty unless success.
  Plan plan;
};

struct Budgets {
  std::int64_t dts_nodes = 10000;
  std::int64_t mbts_nodes = 5000;
  // Wall-clock cap for MBTS; 0 disables it.
  double mbts_seconds = 0.0;
  std::int64_t fullopt_nodes = 1000000;
};

struct BenchConfig {
  Domain domain = Domain::kTower;
  std::vector<int> sizes{4};
  int trials = 15;
  std::uint64_t first_seed = 0;
  std::vector<Solver> solvers{Solver::kDts};
  Budgets budgets;
  GeneratorConfig generator;
};

namespace detail {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

inline void accept_plan(BenchRecord& r, const Plan& p, const Instance& inst) {
  const ReplayReport rep = replay_plan(p, inst.goal, inst.ws);
  r.makespan = p.makespan;
  r.ee_displacement = p.ee_displacement;
  r.success = rep.ok;
  if (rep.ok) {
    r.plan = p;
  } else {
    r.note = "replay: " + rep.violations.front();
  }
}

// Free placements by the local solver from a uniformly random table point;
// pulls keep the exact model.
inline FreePlacer random_start_local_placer(std::uint64_t seed) {
  auto rng = std::make_shared<Sampler>(seed);
  return [rng, seed](const WorldState& w, const Workspace& ws, const Action& a,
                     const std::vector<KeepOut>& keepouts,
                     const Vec2&) -> std::optional<Vec2> {
    const Vec2 init(rng->uniform(ws.table.x_min, ws.table.x_max),
                    rng->uniform(ws.table.y_min, ws.table.y_max));
    LocalNlpOptions o;
    o.seed = seed * 7919ULL + rng->index(1u << 30);
    return local_nlp_place(w, ws, a, keepouts, init, o).point;
  };
}

}  // namespace detail

/// Runs one solver on one instance.
inline BenchRecord run_solver(const Instance& inst, Solver solver, const Budgets& budgets = {}) {
  BenchRecord r;
  r.instance_id = inst.id();
  r.domain = inst.domain;
  r.x = inst.x;
  r.seed = inst.seed;
  r.solver = solver;
  const detail::Timer timer;
  PlannerConfig cfg;
  cfg.ws = inst.ws;
  cfg.node_budget = budgets.dts_nodes;
  try {
    switch (solver) {
      case Solver::kDts:
      case Solver::kFullOpt:
      case Solver::kLocalNlp: {
        if (solver == Solver::kLocalNlp) {
          cfg.free_placer = detail::random_start_local_placer(inst.seed);
        }
        Plan p = dts_solve(inst.world0, inst.goal, cfg);
        r.nodes = p.nodes_visited;
        if (solver == Solver::kFullOpt) {
          FullOptOptions fo;
          fo.miqp.node_budget = budgets.fullopt_nodes;
          p = optimize_full(p, inst.world0, inst.goal, inst.ws, fo);
          if (p.unrefined) r.note = "unrefined";
        }
        detail::accept_plan(r, p, inst);
        break;
      }
      case Solver::kMbts0:
      case Solver::kMbts1:
      case Solver::kMbts2: {
        MbtsOptions mo;
        mo.exploration_c = mbts_exploration(static_cast<int>(solver) -
                                            static_cast<int>(Solver::kMbts0));
        mo.node_budget = budgets.mbts_nodes;
        mo.seconds = budgets.mbts_seconds;
        const MbtsResult m = mbts_solve(inst.world0, inst.goal, inst.ws, mo);
        r.nodes = m.nodes_visited;
        if (m.solved) {
          detail::accept_plan(r, m.plan, inst);
        } else {
          r.note = m.timed_out ? "timeout" : "search space exhausted";
        }
        break;
      }
    }
  } catch (const PlanningError& e) {
    r.success = false;
    r.note = e.what();
  }
  r.wall_seconds = timer.seconds();
  return r;
}

/// Records sorted by instance id, then by the solver order given.
inline std::vector<BenchRecord> run_benchmark(const BenchConfig& cfg) {
  if (cfg.trials < 1) throw PlanningError(ErrorCode::kInvalidInput, "trials must be >= 1");
  if (cfg.sizes.empty() || cfg.solvers.empty()) {
    throw PlanningError(ErrorCode::kInvalidInput, "no sizes or no solvers");
  }
  std::vector<BenchRecord> out;
  for (int x : cfg.sizes) {
    for (int t = 0; t < cfg.trials; ++t) {
      const Instance inst =
          gen_instance(cfg.domain, x, cfg.first_seed + static_cast<std::uint64_t>(t),
                       cfg.generator);
      for (Solver s : cfg.solvers) out.push_back(run_solver(inst, s, cfg.budgets));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const BenchRecord& a, const BenchRecord& b) {
    return a.instance_id < b.instance_id;
  });
  return out;
}

}  // namespace dlgp::bench

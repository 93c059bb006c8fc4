#pragma once

// Disjunctive placement models and a best-first branch-and-bound solver.
//
// Each obstacle contributes four halfspaces of which at least one must hold.
// In the big-M form every branch i carries a selector z_i with sum z_i = 1:
//
//   a_i . v + M (1 - z_i) >= b_i
//
// The solver branches on a disjunction by fixing which of its four rows is
// enforced. With M vacuous over the table, the continuous relaxation of the
// unfixed disjunctions (z_i = 1/4) places no constraint on v, so a node QP
// only needs the convex rows plus the rows fixed so far.

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "dlgp/errors.hpp"
#include "dlgp/geometry.hpp"
#include "dlgp/qp.hpp"
#include "dlgp/symbolic.hpp"
#include "dlgp/world.hpp"

namespace dlgp {

// a . v >= b
struct LinearRow {
  VectorXd a;
  double b = 0.0;

  double slack(const VectorXd& v) const { return a.dot(v) - b; }
  bool satisfied(const VectorXd& v, double tol = kQpFeasibilityTol) const {
    return slack(v) >= -tol;
  }
};

/// Row of a planar halfspace applied to the point variable `var` (variables
/// 2*var, 2*var+1) in an n-dimensional vector.
inline LinearRow halfspace_row(const Halfspace& h, int var, int n) {
  LinearRow r{VectorXd::Zero(n), h.c};
  r.a.segment<2>(2 * var) = h.normal();
  return r;
}

struct Disjunction {
  std::array<LinearRow, 4> branches;
  double big_m = 0.0;
  std::string label;

  /// Index of the first satisfied branch, or -1.
  int first_satisfied(const VectorXd& v,
                      double tol = kQpFeasibilityTol) const {
    for (int i = 0; i < 4; ++i) {
      if (branches[static_cast<std::size_t>(i)].satisfied(v, tol)) return i;
    }
    return -1;
  }

  /// Smallest amount by which a branch is violated (0 if one holds).
  double violation(const VectorXd& v) const {
    double best = std::numeric_limits<double>::infinity();
    for (const LinearRow& r : branches) best = std::min(best, -r.slack(v));
    return std::max(0.0, best);
  }
};

/// Exterior of the inflated footprint `pose`, for point variable `var`.
inline Disjunction footprint_disjunction(const BlockPose& pose, double margin,
                                         int var, int n, double big_m,
                                         std::string label) {
  Disjunction d;
  const auto hs = halfspaces_of_block(pose, margin);
  for (std::size_t i = 0; i < 4; ++i) d.branches[i] = halfspace_row(hs[i], var, n);
  d.big_m = big_m;
  d.label = std::move(label);
  return d;
}

/// Axis-aligned separation of two point variables by at least `offset` along
/// x or y: the difference u_j - u_k leaves the square of half-width offset.
inline Disjunction separation_disjunction(int var_j, int var_k, int n,
                                          double offset, double big_m,
                                          std::string label) {
  Disjunction d;
  const double sign[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (std::size_t i = 0; i < 4; ++i) {
    LinearRow r{VectorXd::Zero(n), offset};
    const Vec2 dir(sign[i][0], sign[i][1]);
    r.a.segment<2>(2 * var_j) += dir;
    r.a.segment<2>(2 * var_k) -= dir;
    d.branches[i] = r;
  }
  d.big_m = big_m;
  d.label = std::move(label);
  return d;
}

struct MiqpModel {
  // Quadratic objective over the continuous variables; its own rows, if
  // any, are treated as convex constraints.
  QpProblem objective;
  std::vector<LinearRow> convex;
  std::vector<std::string> convex_labels;
  std::vector<Disjunction> disjunctions;
  double big_m = 0.0;

  static MiqpModel with_size(int n, double big_m) {
    MiqpModel m;
    m.objective = QpProblem::with_size(n);
    m.big_m = big_m;
    return m;
  }

  int num_vars() const { return objective.num_vars(); }

  /// Adds weight * ||u_var - anchor||^2.
  void add_anchor(int var, const Vec2& anchor, double weight = 1.0) {
    for (int k = 0; k < 2; ++k) {
      const int i = 2 * var + k;
      objective.Q(i, i) += 2.0 * weight;
      objective.q(i) -= 2.0 * weight * anchor(k);
    }
    objective.constant += weight * anchor.squaredNorm();
  }

  /// Adds weight * ||u_j - u_k||^2.
  void add_link(int var_j, int var_k, double weight = 1.0) {
    for (int k = 0; k < 2; ++k) {
      const int i = 2 * var_j + k;
      const int j = 2 * var_k + k;
      objective.Q(i, i) += 2.0 * weight;
      objective.Q(j, j) += 2.0 * weight;
      objective.Q(i, j) -= 2.0 * weight;
      objective.Q(j, i) -= 2.0 * weight;
    }
  }

  void add_convex(const LinearRow& r, std::string label) {
    convex.push_back(r);
    convex_labels.push_back(std::move(label));
  }

  void add_halfspaces(const std::vector<Halfspace>& hs, int var,
                      const std::string& label) {
    for (const Halfspace& h : hs) add_convex(halfspace_row(h, var, num_vars()), label);
  }

  /// Whether `v` meets every convex row and every disjunction.
  bool feasible(const VectorXd& v, double tol = 1e-9) const {
    for (const LinearRow& r : convex) {
      if (!r.satisfied(v, tol)) return false;
    }
    for (Eigen::Index i = 0; i < objective.A_in.rows(); ++i) {
      if (objective.A_in.row(i).dot(v) < objective.b_in(i) - tol) return false;
    }
    for (const Disjunction& d : disjunctions) {
      if (d.first_satisfied(v, tol) < 0) return false;
    }
    return true;
  }

  /// QP with the given branch enforced per disjunction (-1 leaves it out).
  QpProblem node_problem(const std::vector<int>& choice) const {
    QpProblem p = objective;
    const Eigen::Index base = p.A_in.rows();
    Eigen::Index rows = base + static_cast<Eigen::Index>(convex.size());
    for (std::size_t d = 0; d < disjunctions.size(); ++d) rows += choice[d] >= 0 ? 1 : 0;
    p.A_in.conservativeResize(rows, num_vars());
    p.b_in.conservativeResize(rows);
    Eigen::Index at = base;
    auto put = [&](const LinearRow& r) {
      p.A_in.row(at) = r.a.transpose();
      p.b_in(at++) = r.b;
    };
    for (const LinearRow& r : convex) put(r);
    for (std::size_t d = 0; d < disjunctions.size(); ++d) {
      if (choice[d] >= 0) {
        put(disjunctions[d].branches[static_cast<std::size_t>(choice[d])]);
      }
    }
    return p;
  }

  /// The explicit big-M relaxation over [v; z] with 0 <= z <= 1 and
  /// sum z = 1 per disjunction. Binaries in `fixed` (disjunction, branch)
  /// are set to 1.
  QpProblem big_m_relaxation(
      const std::vector<std::pair<int, int>>& fixed = {}) const {
    const int n = num_vars();
    const int nz = 4 * static_cast<int>(disjunctions.size());
    QpProblem p = QpProblem::with_size(n + nz);
    p.Q.topLeftCorner(n, n) = objective.Q;
    p.q.head(n) = objective.q;
    p.constant = objective.constant;
    auto lift = [&](const VectorXd& a) {
      VectorXd r = VectorXd::Zero(n + nz);
      r.head(n) = a;
      return r;
    };
    for (Eigen::Index i = 0; i < objective.A_in.rows(); ++i) {
      p.add_inequality(lift(objective.A_in.row(i).transpose()), objective.b_in(i));
    }
    for (const LinearRow& r : convex) p.add_inequality(lift(r.a), r.b);
    for (std::size_t d = 0; d < disjunctions.size(); ++d) {
      VectorXd sum = VectorXd::Zero(n + nz);
      for (int i = 0; i < 4; ++i) {
        const int zi = n + 4 * static_cast<int>(d) + i;
        const LinearRow& row = disjunctions[d].branches[static_cast<std::size_t>(i)];
        // a.v - M z_i >= b - M
        VectorXd a = lift(row.a);
        a(zi) = -big_m;
        p.add_inequality(a, row.b - big_m);
        VectorXd lo = VectorXd::Zero(n + nz);
        lo(zi) = 1.0;
        p.add_inequality(lo, 0.0);
        p.add_inequality(-lo, -1.0);
        sum(zi) = 1.0;
      }
      p.add_equality(sum, 1.0);
    }
    for (const auto& [d, i] : fixed) {
      VectorXd e = VectorXd::Zero(n + nz);
      e(n + 4 * d + i) = 1.0;
      p.add_equality(e, 1.0);
    }
    return p;
  }

  /// Plain-text dump for offline inspection.
  std::string debug_dump() const {
    std::ostringstream os;
    os << std::setprecision(12);
    const int n = num_vars();
    os << "miqp vars " << n << " disjunctions " << disjunctions.size()
       << " big_m " << big_m << "\n";
    os << "objective constant " << objective.constant << "\n";
    for (int i = 0; i < n; ++i) {
      os << "  Q[" << i << "]";
      for (int j = 0; j < n; ++j) os << ' ' << objective.Q(i, j);
      os << "  q " << objective.q(i) << "\n";
    }
    auto row_text = [&](const LinearRow& r) {
      std::ostringstream rs;
      rs << std::setprecision(12);
      for (int j = 0; j < n; ++j) rs << r.a(j) << ' ';
      rs << ">= " << r.b;
      return rs.str();
    };
    for (std::size_t i = 0; i < convex.size(); ++i) {
      os << "convex " << convex_labels[i] << ": " << row_text(convex[i]) << "\n";
    }
    for (std::size_t d = 0; d < disjunctions.size(); ++d) {
      os << "disjunction " << d << ' ' << disjunctions[d].label << "\n";
      for (int i = 0; i < 4; ++i) {
        os << "  z" << i << ": "
           << row_text(disjunctions[d].branches[static_cast<std::size_t>(i)])
           << " + M(1-z" << i << ")\n";
      }
    }
    return os.str();
  }
};

enum class MiqpStatus { kOptimal, kInfeasible };

inline const char* to_string(MiqpStatus s) {
  return s == MiqpStatus::kOptimal ? "optimal" : "infeasible";
}

struct MiqpResult {
  MiqpStatus status = MiqpStatus::kInfeasible;
  VectorXd u;
  double objective = std::numeric_limits<double>::infinity();
  std::int64_t nodes_expanded = 0;
  // Enforced branch per disjunction.
  std::vector<int> fixed_binaries;

  bool optimal() const { return status == MiqpStatus::kOptimal; }
};

struct MiqpOptions {
  std::int64_t node_budget = 100000;
  // Nodes whose bound reaches this value are pruned, as if an incumbent
  // with this objective were known. The result is infeasible if nothing
  // strictly better exists.
  double cutoff = std::numeric_limits<double>::infinity();
};

inline MiqpResult branch_and_bound(const MiqpModel& model,
                                   const MiqpOptions& options = {}) {
  struct Node {
    double bound;
    std::int64_t seq;
    std::vector<int> choice;
    VectorXd start;  // parent's solution, used as a warm start
  };
  struct Later {
    bool operator()(const Node& a, const Node& b) const {
      if (a.bound != b.bound) return a.bound > b.bound;
      return a.seq > b.seq;
    }
  };

  const std::size_t nd = model.disjunctions.size();
  MiqpResult best;
  std::priority_queue<Node, std::vector<Node>, Later> open;
  std::int64_t seq = 0;
  open.push({-std::numeric_limits<double>::infinity(), seq++,
             std::vector<int>(nd, -1), VectorXd()});

  auto dominated = [&](double bound) {
    const double ub = std::min(best.objective, options.cutoff);
    if (!std::isfinite(ub)) return false;
    return bound >= ub - 1e-12 * (1.0 + std::abs(ub));
  };

  while (!open.empty()) {
    Node node = open.top();
    open.pop();
    if (dominated(node.bound)) continue;
    if (best.nodes_expanded >= options.node_budget) {
      throw PlanningError(ErrorCode::kNodeBudgetExceeded,
                          "branch-and-bound exceeded " +
                              std::to_string(options.node_budget) + " nodes");
    }
    ++best.nodes_expanded;
    QpOptions qo;
    if (node.start.size() > 0) qo.warm_start = node.start;
    const QpSolution qp = solve_qp(model.node_problem(node.choice), qo);
    if (qp.status == QpStatus::kInfeasible) continue;
    if (qp.status != QpStatus::kOptimal) {
      throw std::runtime_error(std::string("node QP ended with status ") +
                               to_string(qp.status));
    }
    if (dominated(qp.objective)) continue;

    int branch_on = -1;
    double worst = 0.0;
    for (std::size_t d = 0; d < nd; ++d) {
      if (node.choice[d] >= 0) continue;
      const Disjunction& dj = model.disjunctions[d];
      if (dj.first_satisfied(qp.v) >= 0) continue;
      const double viol = dj.violation(qp.v);
      if (branch_on < 0 || viol > worst + kQpTieTol) {
        branch_on = static_cast<int>(d);
        worst = viol;
      }
    }
    if (branch_on < 0) {
      best.status = MiqpStatus::kOptimal;
      best.u = qp.v;
      best.objective = qp.objective;
      best.fixed_binaries = node.choice;
      for (std::size_t d = 0; d < nd; ++d) {
        if (best.fixed_binaries[d] < 0) {
          best.fixed_binaries[d] = model.disjunctions[d].first_satisfied(qp.v);
        }
      }
      continue;
    }
    for (int i = 0; i < 4; ++i) {
      Node child{qp.objective, seq++, node.choice, qp.v};
      child.choice[static_cast<std::size_t>(branch_on)] = i;
      open.push(std::move(child));
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Placement models over a single point variable u = (x, y).

// Region a placed block must avoid: the footprint of `pose` grown by `margin`.
struct KeepOut {
  BlockPose pose;
  double margin = 0.0;
  std::string label;
};

namespace detail {

inline void add_obstacles(MiqpModel& m, const WorldState& w, const Workspace& ws,
                          const BlockId& moved) {
  for (const Block& b : w.blocks()) {
    if (b.below || b.id == moved) continue;
    m.disjunctions.push_back(footprint_disjunction(
        b.pose, ws.collision_margin, 0, 2, ws.big_m(), "block " + b.id));
  }
}

inline void add_keepouts(MiqpModel& m, const std::vector<KeepOut>& keepouts,
                         double big_m) {
  for (const KeepOut& k : keepouts) {
    m.disjunctions.push_back(
        footprint_disjunction(k.pose, k.margin, 0, 2, big_m, k.label));
  }
}

}  // namespace detail

/// Pose-bound model for placing the held block at a free point: squared
/// travel from `anchor` (the pick point), exterior of every other block on
/// the table and every keep-out, inside the table and the reach polygon.
inline MiqpModel build_placement_model(const WorldState& w, const Workspace& ws,
                                       const Action& action,
                                       const std::vector<KeepOut>& keepouts,
                                       const Vec2& anchor) {
  w.at(action.block);
  if (action.kind != ActionKind::kPickPlace ||
      action.target != TargetKind::kFreePlacement) {
    throw PlanningError(ErrorCode::kDegenerateModel,
                        action.to_string() + " has no free placement");
  }
  MiqpModel m = MiqpModel::with_size(2, ws.big_m());
  m.add_anchor(0, anchor);
  m.add_halfspaces(ws.table.halfspaces(ws.block_size), 0, "table");
  m.add_halfspaces(reach_halfspaces(ws.reach), 0, "reach");
  detail::add_obstacles(m, w, ws, action.block);
  detail::add_keepouts(m, keepouts, ws.big_m());
  return m;
}

/// Model for the landing point of a tool pull: inside reach and table, clear
/// of other blocks and keep-outs, as close as possible to the block. An
/// optional follow-up point adds the travel of the next grasp.
inline MiqpModel build_pull_model(const WorldState& w, const Workspace& ws,
                                  const BlockId& block,
                                  const std::vector<KeepOut>& keepouts = {},
                                  const std::optional<Vec2>& next = std::nullopt) {
  const Block& b = w.at(block);
  if (is_reachable(ws, b)) {
    throw PlanningError(ErrorCode::kInapplicableAction, "out_of_reach");
  }
  MiqpModel m = MiqpModel::with_size(2, ws.big_m());
  m.add_anchor(0, b.pose.center());
  if (next) m.add_anchor(0, *next);
  m.add_halfspaces(ws.table.halfspaces(ws.block_size), 0, "table");
  m.add_halfspaces(reach_halfspaces(ws.reach), 0, "reach");
  detail::add_obstacles(m, w, ws, block);
  detail::add_keepouts(m, keepouts, ws.big_m());
  return m;
}

}  // namespace dlgp

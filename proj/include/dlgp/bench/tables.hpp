#pragma once

// Summary tables over benchmark records: CSV and aligned text. Nodes are
// averaged over all records (a timeout counts its budget); travel and
// makespan over successful ones. A cell without successes is "-".

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "dlgp/bench/runner.hpp"

namespace dlgp::bench {

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

/// Mean and population standard deviation.
inline Stat summarize(const std::vector<double>& v) {
  Stat s;
  s.n = v.size();
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(v.size()));
  return s;
}

struct TableRow {
  Domain domain = Domain::kOp;
  int x = 0;
  Solver solver = Solver::kDts;
  std::size_t trials = 0;
  std::size_t successes = 0;
  Stat nodes;
  Stat displacement;
  Stat makespan;

  double success_rate() const {
    return trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0;
  }
  std::string cell() const { return domain_label(domain) + "-" + std::to_string(x); }
};

/// One row per (domain, X, solver), ordered by domain, X and solver.
inline std::vector<TableRow> tabulate(const std::vector<BenchRecord>& records) {
  if (records.empty()) throw PlanningError(ErrorCode::kInvalidInput, "no records");
  using Key = std::tuple<int, int, int>;
  std::map<Key, std::vector<const BenchRecord*>> groups;
  for (const BenchRecord& r : records) {
    groups[{static_cast<int>(r.domain), r.x, static_cast<int>(r.solver)}].push_back(&r);
  }
  std::vector<TableRow> rows;
  for (const auto& [key, recs] : groups) {
    TableRow row;
    row.domain = static_cast<Domain>(std::get<0>(key));
    row.x = std::get<1>(key);
    row.solver = static_cast<Solver>(std::get<2>(key));
    row.trials = recs.size();
    std::vector<double> nodes, disp, span;
    for (const BenchRecord* r : recs) {
      nodes.push_back(static_cast<double>(r->nodes));
      if (!r->success) continue;
      ++row.successes;
      disp.push_back(r->ee_displacement);
      span.push_back(r->makespan);
    }
    row.nodes = summarize(nodes);
    row.displacement = summarize(disp);
    row.makespan = summarize(span);
    rows.push_back(row);
  }
  return rows;
}

namespace detail {

inline std::string fmt(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string pm(const Stat& s, int digits) {
  return fmt(s.mean, digits) + " ± " + fmt(s.stddev, digits);
}

}  // namespace detail

/// Summary CSV: header row, LF line endings, dot decimals.
inline std::string emit_csv(const std::vector<BenchRecord>& records) {
  std::string out =
      "domain,x,solver,trials,success_rate,nodes_mean,nodes_std,"
      "displacement_mean,displacement_std,makespan_mean,makespan_std\n";
  for (const TableRow& r : tabulate(records)) {
    using detail::fmt;
    out += domain_label(r.domain) + "," + std::to_string(r.x) + "," + solver_label(r.solver) +
           "," + std::to_string(r.trials) + "," + fmt(r.success_rate(), 4) + ",";
    if (r.successes == 0) {
      out += "-,-,-,-,-,-\n";
      continue;
    }
    out += fmt(r.nodes.mean, 3) + "," + fmt(r.nodes.stddev, 3) + "," +
           fmt(r.displacement.mean, 4) + "," + fmt(r.displacement.stddev, 4) + "," +
           fmt(r.makespan.mean, 3) + "," + fmt(r.makespan.stddev, 3) + "\n";
  }
  return out;
}

/// One line per record, sorted by instance id then solver.
inline std::string emit_records_csv(std::vector<BenchRecord> records) {
  std::stable_sort(records.begin(), records.end(), [](const BenchRecord& a, const BenchRecord& b) {
    return std::tie(a.instance_id, a.solver) < std::tie(b.instance_id, b.solver);
  });
  std::string out = "instance,solver,success,nodes,ee_displacement,makespan,wall_seconds,note\n";
  for (const BenchRecord& r : records) {
    std::string note = r.note;
    std::replace(note.begin(), note.end(), ',', ';');
    std::replace(note.begin(), note.end(), '\n', ' ');
    out += r.instance_id + "," + solver_label(r.solver) + "," + (r.success ? "1" : "0") + "," +
           std::to_string(r.nodes) + "," + detail::fmt(r.ee_displacement, 6) + "," +
           std::to_string(r.makespan) + "," + detail::fmt(r.wall_seconds, 4) + "," + note + "\n";
  }
  return out;
}

/// Aligned plain-text version of the summary.
inline std::string emit_text_table(const std::vector<BenchRecord>& records) {
  const std::vector<TableRow> rows = tabulate(records);
  std::vector<std::vector<std::string>> cells{
      {"cell", "solver", "success", "nodes", "displacement (m)", "makespan"}};
  for (const TableRow& r : rows) {
    const bool any = r.successes > 0;
    cells.push_back({r.cell(), solver_label(r.solver),
                     detail::fmt(100.0 * r.success_rate(), 1) + "%",
                     any ? detail::pm(r.nodes, 1) : "-",
                     any ? detail::pm(r.displacement, 2) : "-",
                     any ? detail::pm(r.makespan, 2) : "-"});
  }
  // Widths in code points; "±" is two bytes.
  auto width = [](const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
  };
  std::vector<std::size_t> w(cells[0].size(), 0);
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) w[i] = std::max(w[i], width(row[i]));
  }
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out += row[i];
      if (i + 1 < row.size()) out += std::string(w[i] - width(row[i]) + 2, ' ');
    }
    out += "\n";
  }
  return out;
}

}  // namespace dlgp::bench

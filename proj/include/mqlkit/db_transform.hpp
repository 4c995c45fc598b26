#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mqlkit/document_db.hpp"
#include "mqlkit/errors.hpp"
#include "mqlkit/relational.hpp"

namespace mqlkit {

struct TableCluster {
  std::vector<std::string> tables;       // dump order
  std::vector<std::string> main_tables;  // sinks, dump order
};

namespace detail {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) {
    for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

/// Directed FK graph at table granularity, edges deduplicated.
inline std::vector<std::set<std::size_t>> fk_graph(const RelationalDump& dump) {
  std::vector<std::set<std::size_t>> adj(dump.tables.size());
  for (std::size_t i = 0; i < dump.tables.size(); ++i)
    for (const ForeignKey& fk : dump.tables[i].foreign_keys)
      adj[i].insert(static_cast<std::size_t>(dump.table_index(fk.ref_table)));
  return adj;
}

}  // namespace detail

/// Union-find over the undirected FK graph: two tables linked by any foreign
/// key share a cluster; tables without FKs form singletons. Clusters are
/// ordered by their first table in dump order, members likewise.
inline std::vector<TableCluster> group_tables(const RelationalDump& dump) {
  detail::DisjointSet dsu(dump.tables.size());
  for (std::size_t i = 0; i < dump.tables.size(); ++i)
    for (const ForeignKey& fk : dump.tables[i].foreign_keys)
      dsu.unite(i, static_cast<std::size_t>(dump.table_index(fk.ref_table)));

  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < dump.tables.size(); ++i)
    members[dsu.find(i)].push_back(i);

  std::vector<std::vector<std::size_t>> ordered;
  for (auto& [root, idxs] : members) ordered.push_back(idxs);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });

  auto adj = detail::fk_graph(dump);
  std::vector<TableCluster> clusters;
  for (const auto& idxs : ordered) {
    TableCluster c;
    std::set<std::size_t> in_cluster(idxs.begin(), idxs.end());
    for (std::size_t i : idxs) {
      c.tables.push_back(dump.tables[i].name);
      bool sink = true;
      for (std::size_t target : adj[i])
        if (target != i && in_cluster.count(target)) {
          sink = false;
          break;
        }
      if (sink) c.main_tables.push_back(dump.tables[i].name);
    }
    clusters.push_back(std::move(c));
  }
  return clusters;
}

/// All elementary cycles of the directed FK graph, each reported once,
/// starting from its smallest table index. Self-references count as cycles.
inline std::vector<std::vector<std::string>> detect_fk_cycles(
    const RelationalDump& dump) {
  auto adj = detail::fk_graph(dump);
  std::size_t n = dump.tables.size();
  std::vector<std::vector<std::string>> cycles;
  std::vector<std::size_t> path;
  std::vector<bool> on_path(n, false);
  constexpr std::size_t kMaxCycles = 64;

  // Elementary-cycle enumeration: from each start s, walk only vertices
  // >= s, so every cycle is found exactly once (rooted at its minimum).
  auto dfs = [&](auto&& self, std::size_t start, std::size_t v) -> void {
    if (cycles.size() >= kMaxCycles) return;
    path.push_back(v);
    on_path[v] = true;
    for (std::size_t w : adj[v]) {
      if (w == start) {
        std::vector<std::string> cycle;
        for (std::size_t idx : path) cycle.push_back(dump.tables[idx].name);
        cycles.push_back(std::move(cycle));
        if (cycles.size() >= kMaxCycles) break;
      } else if (w > start && !on_path[w]) {
        self(self, start, w);
      }
    }
    on_path[v] = false;
    path.pop_back();
  };

  for (std::size_t s = 0; s < n; ++s) dfs(dfs, s, s);
  return cycles;
}

inline std::string format_cycle(const std::vector<std::string>& cycle) {
  std::string s;
  for (const std::string& t : cycle) s += t + " -> ";
  s += cycle.front();
  return s;
}

/// Sinks of the cluster's FK digraph in dump order. Requires an acyclic
/// cluster; throws NoMainTable when every member has an outgoing edge.
inline std::vector<std::string> find_main_tables(const TableCluster& cluster,
                                                 const RelationalDump& dump) {
  auto adj = detail::fk_graph(dump);
  std::set<std::string> in_cluster(cluster.tables.begin(), cluster.tables.end());
  std::vector<std::string> mains;
  for (const std::string& name : cluster.tables) {
    auto i = static_cast<std::size_t>(dump.table_index(name));
    bool sink = true;
    for (std::size_t target : adj[i])
      if (target != i && in_cluster.count(dump.tables[target].name)) {
        sink = false;
        break;
      }
    if (sink) mains.push_back(name);
  }
  if (mains.empty()) {
    std::string members;
    for (const std::string& t : cluster.tables)
      members += (members.empty() ? "" : ", ") + t;
    throw NoMainTable(members);
  }
  return mains;
}

struct TransformResult {
  DocumentDatabase db;
  std::vector<std::string> warnings;  // dangling-FK reports
};

/// Algorithm: reject cyclic FK graphs; each sink ("main") table becomes a
/// collection; every other table is embedded, as an array keyed by its own
/// name, under the one parent it references (first-in-dump-order parent when
/// several exist), recursively. A child row whose FK value is null or
/// matches no parent row is left out and reported.
inline TransformResult transform_database(const RelationalDump& dump) {
  auto cycles = detect_fk_cycles(dump);
  if (!cycles.empty()) {
    std::vector<std::string> rendered;
    for (const auto& c : cycles) rendered.push_back(format_cycle(c));
    throw CycleError(rendered);
  }

  // Chosen parent per table: among referenced tables, the first in dump
  // order; the join uses the first declared FK to that parent.
  std::size_t n = dump.tables.size();
  std::vector<int> chosen_parent(n, -1);
  std::vector<const ForeignKey*> chosen_fk(n, nullptr);
  for (std::size_t i = 0; i < n; ++i) {
    int best = -1;
    for (const ForeignKey& fk : dump.tables[i].foreign_keys) {
      int ri = dump.table_index(fk.ref_table);
      if (ri == static_cast<int>(i)) continue;
      if (best < 0 || ri < best) best = ri;
    }
    if (best < 0) continue;
    chosen_parent[i] = best;
    for (const ForeignKey& fk : dump.tables[i].foreign_keys) {
      if (dump.table_index(fk.ref_table) == best) {
        chosen_fk[i] = &fk;
        break;
      }
    }
  }

  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t i = 0; i < n; ++i)
    if (chosen_parent[i] >= 0)
      children[static_cast<std::size_t>(chosen_parent[i])].push_back(i);

  std::vector<std::vector<bool>> embedded(n);
  for (std::size_t i = 0; i < n; ++i)
    embedded[i].assign(dump.tables[i].rows.size(), false);

  // Build the document for one row, attaching child arrays after the
  // row's own columns.
  auto build_doc = [&](auto&& self, std::size_t ti, std::size_t ri) -> DocValue {
    const Table& t = dump.tables[ti];
    DocValue doc = DocValue::object();
    for (std::size_t c = 0; c < t.columns.size(); ++c)
      doc.set(t.columns[c].name, t.rows[ri][c]);
    for (std::size_t child : children[ti]) {
      const Table& ct = dump.tables[child];
      const ForeignKey& fk = *chosen_fk[child];
      int fk_col = ct.column_index(fk.column);
      int ref_col = t.column_index(fk.ref_column);
      DocValue arr = DocValue::array();
      const DocValue& parent_val = t.rows[ri][static_cast<std::size_t>(ref_col)];
      for (std::size_t cr = 0; cr < ct.rows.size(); ++cr) {
        const DocValue& child_val = ct.rows[cr][static_cast<std::size_t>(fk_col)];
        if (child_val.is_null() || parent_val.is_null()) continue;
        if (child_val == parent_val) {
          embedded[child][cr] = true;
          arr.push_back(self(self, child, cr));
        }
      }
      doc.set(ct.name, std::move(arr));
    }
    return doc;
  };

  TransformResult result;
  result.db.name = dump.name;
  auto clusters = group_tables(dump);
  for (const TableCluster& cluster : clusters) {
    std::vector<std::string> mains = find_main_tables(cluster, dump);
    for (const std::string& main : mains) {
      auto ti = static_cast<std::size_t>(dump.table_index(main));
      std::vector<DocValue> docs;
      docs.reserve(dump.tables[ti].rows.size());
      for (std::size_t ri = 0; ri < dump.tables[ti].rows.size(); ++ri)
        docs.push_back(build_doc(build_doc, ti, ri));
      result.db.collections[main] = std::move(docs);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (chosen_parent[i] < 0) continue;
    std::size_t dangling = 0;
    for (bool used : embedded[i])
      if (!used) ++dangling;
    if (dangling > 0)
      result.warnings.push_back(
          "table '" + dump.tables[i].name + "': " + std::to_string(dangling) +
          " row(s) dangling on foreign key '" + chosen_fk[i]->column + "' -> " +
          chosen_fk[i]->ref_table + "." + chosen_fk[i]->ref_column);
  }
  return result;
}

}  // namespace mqlkit

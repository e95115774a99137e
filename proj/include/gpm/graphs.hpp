#pragma once

// Undirected graphs, DAGs, moralization, and graph-distance metrics.

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpm {

class GraphError : public std::runtime_error {
 public:
  explicit GraphError(const std::string& what) : std::runtime_error(what) {}
};

class UndirectedGraph {
 public:
  UndirectedGraph() = default;
  explicit UndirectedGraph(int d) : d_(d), adj_(static_cast<size_t>(d) * d, 0) {}

  int d() const { return d_; }

  bool has_edge(int i, int j) const {
    check(i);
    check(j);
    return i != j && adj_[static_cast<size_t>(i) * d_ + j] != 0;
  }

  void set_edge(int i, int j, bool present = true) {
    check(i);
    check(j);
    if (i == j) throw GraphError("self loops are not allowed");
    adj_[static_cast<size_t>(i) * d_ + j] = present ? 1 : 0;
    adj_[static_cast<size_t>(j) * d_ + i] = present ? 1 : 0;
  }

  int edge_count() const {
    int c = 0;
    for (int i = 0; i < d_; ++i)
      for (int j = i + 1; j < d_; ++j) c += has_edge(i, j);
    return c;
  }

  /// Edges as (i, j) with i < j, sorted lexicographically.
  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < d_; ++i)
      for (int j = i + 1; j < d_; ++j)
        if (has_edge(i, j)) out.emplace_back(i, j);
    return out;
  }

  std::vector<int> neighbors(int v) const {
    check(v);
    std::vector<int> out;
    for (int j = 0; j < d_; ++j)
      if (j != v && has_edge(v, j)) out.push_back(j);
    return out;
  }

  bool operator==(const UndirectedGraph&) const = default;

 private:
  void check(int i) const {
    if (i < 0 || i >= d_) throw GraphError("vertex index out of range");
  }

  int d_ = 0;
  std::vector<uint8_t> adj_;
};

struct Dag {
  int d = 0;
  std::vector<std::vector<int>> parents;  // sorted parent lists per vertex

  /// Topological order of vertices; throws if a directed cycle exists.
  std::vector<int> topological_order() const {
    std::vector<int> indeg(d, 0);
    std::vector<std::vector<int>> children(d);
    for (int v = 0; v < d; ++v) {
      for (int p : parents[v]) {
        children[p].push_back(v);
        ++indeg[v];
      }
    }
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (int v = 0; v < d; ++v)
      if (indeg[v] == 0) ready.push(v);
    std::vector<int> order;
    while (!ready.empty()) {
      int v = ready.top();
      ready.pop();
      order.push_back(v);
      for (int c : children[v])
        if (--indeg[c] == 0) ready.push(c);
    }
    if (static_cast<int>(order.size()) != d) throw GraphError("cycle detected in DAG");
    return order;
  }

  UndirectedGraph skeleton() const {
    UndirectedGraph g(d);
    for (int v = 0; v < d; ++v)
      for (int p : parents[v]) g.set_edge(p, v);
    return g;
  }
};

/// Marries all parents of each vertex and drops edge directions.
inline UndirectedGraph moralize(const Dag& dag) {
  dag.topological_order();  // cycle check
  UndirectedGraph g(dag.d);
  for (int v = 0; v < dag.d; ++v) {
    const auto& ps = dag.parents[v];
    for (int p : ps) g.set_edge(p, v);
    for (size_t a = 0; a < ps.size(); ++a)
      for (size_t b = a + 1; b < ps.size(); ++b) g.set_edge(ps[a], ps[b]);
  }
  return g;
}

/// Number of unordered vertex pairs whose edge status differs.
inline int hamming(const UndirectedGraph& a, const UndirectedGraph& b) {
  if (a.d() != b.d())
    throw GraphError("hamming: graphs have different vertex counts (" +
                     std::to_string(a.d()) + " vs " + std::to_string(b.d()) + ")");
  int dist = 0;
  for (int i = 0; i < a.d(); ++i)
    for (int j = i + 1; j < a.d(); ++j) dist += a.has_edge(i, j) != b.has_edge(i, j);
  return dist;
}

/// Chordality test by maximum cardinality search.
inline bool is_chordal(const UndirectedGraph& g) {
  const int d = g.d();
  std::vector<int> weight(d, 0), order;
  std::vector<bool> placed(d, false);
  std::vector<int> pos(d, -1);
  for (int step = 0; step < d; ++step) {
    int best = -1;
    for (int v = 0; v < d; ++v)
      if (!placed[v] && (best == -1 || weight[v] > weight[best])) best = v;
    placed[best] = true;
    pos[best] = step;
    order.push_back(best);
    for (int u : g.neighbors(best))
      if (!placed[u]) ++weight[u];
  }
  // For each vertex, its already-placed neighbors must form a clique with
  // the latest-placed one among them.
  for (int step = 0; step < d; ++step) {
    const int v = order[step];
    std::vector<int> earlier;
    for (int u : g.neighbors(v))
      if (pos[u] < step) earlier.push_back(u);
    if (earlier.empty()) continue;
    int latest = earlier[0];
    for (int u : earlier)
      if (pos[u] > pos[latest]) latest = u;
    for (int u : earlier) {
      if (u == latest) continue;
      if (!g.has_edge(u, latest)) return false;
    }
  }
  return true;
}

/// Random DAG whose moral graph is chordal. Built by sequential clique
/// attachment: each new vertex connects to a random subset of an existing
/// clique, so earlier neighbors of every vertex are married already and
/// moralization adds nothing. A final random relabeling decouples vertex
/// ids from insertion order.
inline Dag random_decomposable_dag(int d, double edge_density, uint64_t seed) {
  if (d < 2) throw GraphError("random_decomposable_dag: d >= 2 required");
  if (!(edge_density > 0.0 && edge_density <= 1.0))
    throw GraphError("random_decomposable_dag: edge density must be in (0, 1]");
  std::mt19937_64 rng(seed);

  // cliques[t] = attachment clique of insertion-vertex t, including t itself.
  std::vector<std::vector<int>> cliques(d);
  std::vector<std::vector<int>> parent_of(d);
  cliques[0] = {0};
  for (int t = 1; t < d; ++t) {
    std::uniform_int_distribution<int> pick(0, t - 1);
    std::vector<int> host = cliques[pick(rng)];
    std::binomial_distribution<int> bsize(t, edge_density);
    int s = std::clamp(bsize(rng), 1, static_cast<int>(host.size()));
    std::shuffle(host.begin(), host.end(), rng);
    std::vector<int> attach(host.begin(), host.begin() + s);
    std::sort(attach.begin(), attach.end());
    parent_of[t] = attach;
    attach.push_back(t);
    cliques[t] = std::move(attach);
  }

  std::vector<int> label(d);
  std::iota(label.begin(), label.end(), 0);
  std::shuffle(label.begin(), label.end(), rng);

  Dag dag;
  dag.d = d;
  dag.parents.resize(d);
  for (int t = 0; t < d; ++t) {
    for (int p : parent_of[t]) dag.parents[label[t]].push_back(label[p]);
    std::sort(dag.parents[label[t]].begin(), dag.parents[label[t]].end());
  }
  return dag;
}

inline nlohmann::json graph_to_json(const UndirectedGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [i, j] : g.edges()) edges.push_back(nlohmann::json::array({i, j}));
  return nlohmann::json{{"d", g.d()}, {"edges", edges}};
}

inline UndirectedGraph graph_from_json(const nlohmann::json& j) {
  UndirectedGraph g(j.at("d").get<int>());
  for (const auto& e : j.at("edges")) {
    if (e.size() != 2) throw GraphError("graph json: edge entries must be pairs");
    g.set_edge(e.at(0).get<int>(), e.at(1).get<int>());
  }
  return g;
}

inline void save_graph_json(const UndirectedGraph& g, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw GraphError("cannot open '" + path + "' for writing");
  f << graph_to_json(g).dump(2) << "\n";
}

inline UndirectedGraph load_graph_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw GraphError("cannot open graph file '" + path + "'");
  nlohmann::json j;
  f >> j;
  return graph_from_json(j);
}

}  // namespace gpm

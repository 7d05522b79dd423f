#ifndef ICAHOC_COMPONENT_GRAPH_HPP
#define ICAHOC_COMPONENT_GRAPH_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "icahoc/error.hpp"
#include "icahoc/hoc_analysis.hpp"
#include "icahoc/random.hpp"

namespace icahoc {

/// Complete graph over a subset of display axes, weighted by HOC.
/// `weights` is indexed by position in `nodes`, not by axis number.
struct ComponentGraph {
  std::vector<std::size_t> nodes;
  Eigen::MatrixXd weights;

  std::size_t size() const { return nodes.size(); }
  std::size_t edge_count() const { return nodes.size() * (nodes.size() - (nodes.empty() ? 0 : 1)) / 2; }
};

struct TreeEdge {
  std::size_t u = 0;  // axis numbers, u < v
  std::size_t v = 0;
  double weight = 0.0;

  bool operator==(const TreeEdge&) const = default;
};

struct SpanningTree {
  std::vector<std::size_t> nodes;
  std::vector<TreeEdge> edges;

  double total_weight() const {
    double sum = 0.0;
    for (const auto& e : edges) sum += e.weight;
    return sum;
  }
};

/// Node -> cluster id, ids contiguous from 0 and numbered by first
/// appearance in `nodes`.
struct ClusterAssignment {
  std::vector<std::size_t> nodes;
  std::vector<std::size_t> labels;
  std::size_t k = 0;

  std::size_t label_of(std::size_t node) const {
    for (std::size_t p = 0; p < nodes.size(); ++p)
      if (nodes[p] == node) return labels[p];
    throw DataError("node " + std::to_string(node) + " not in cluster assignment");
  }
};

class DisjointSet {
public:
  explicit DisjointSet(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

private:
  std::vector<std::size_t> parent_;
  std::vector<std::uint8_t> rank_;
};

inline ComponentGraph build_graph(const HocMatrix& h, const std::vector<std::size_t>& nodes) {
  if (nodes.size() < 2) throw DataError("graph needs at least 2 nodes");
  std::vector<bool> seen(h.dim(), false);
  for (auto a : nodes) {
    if (a >= h.dim()) throw DataError("node " + std::to_string(a) + " out of range");
    if (seen[a]) throw DataError("duplicate node " + std::to_string(a));
    seen[a] = true;
  }
  ComponentGraph g;
  g.nodes = nodes;
  const auto m = static_cast<Eigen::Index>(nodes.size());
  g.weights = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b)
      if (a != b) g.weights(a, b) = h(nodes[static_cast<std::size_t>(a)], nodes[static_cast<std::size_t>(b)]);
  return g;
}

namespace detail {

inline SpanningTree kruskal(const ComponentGraph& g, bool maximize) {
  if (g.nodes.empty()) throw DataError("spanning tree needs at least 1 node");
  struct Candidate {
    std::size_t a, b;  // positions
    std::size_t u, v;  // axis numbers, u < v
    double w;
  };
  std::vector<Candidate> edges;
  edges.reserve(g.edge_count());
  for (std::size_t a = 0; a < g.size(); ++a)
    for (std::size_t b = a + 1; b < g.size(); ++b) {
      const auto u = std::min(g.nodes[a], g.nodes[b]);
      const auto v = std::max(g.nodes[a], g.nodes[b]);
      edges.push_back({a, b, u, v, g.weights(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))});
    }
  std::sort(edges.begin(), edges.end(), [maximize](const Candidate& x, const Candidate& y) {
    if (x.w != y.w) return maximize ? x.w > y.w : x.w < y.w;
    if (x.u != y.u) return x.u < y.u;
    return x.v < y.v;
  });
  SpanningTree tree;
  tree.nodes = g.nodes;
  DisjointSet sets(g.size());
  for (const auto& e : edges) {
    if (tree.edges.size() + 1 == g.size()) break;
    if (sets.unite(e.a, e.b)) tree.edges.push_back({e.u, e.v, e.w});
  }
  return tree;
}

} // namespace detail

/// Kruskal on descending weight; ties by ascending (u, v) axis pair.
inline SpanningTree maximum_spanning_tree(const ComponentGraph& g) { return detail::kruskal(g, true); }

/// Kruskal on ascending weight with the same tie rule.
inline SpanningTree minimum_spanning_tree(const ComponentGraph& g) { return detail::kruskal(g, false); }

/// Edge count, membership, and connectivity (which with |E| = |V| - 1 implies
/// acyclicity).
inline bool is_spanning_tree(const SpanningTree& t) {
  if (t.nodes.empty()) return false;
  if (t.edges.size() + 1 != t.nodes.size()) return false;
  std::unordered_map<std::size_t, std::size_t> pos;
  for (std::size_t p = 0; p < t.nodes.size(); ++p)
    if (!pos.emplace(t.nodes[p], p).second) return false;
  DisjointSet sets(t.nodes.size());
  for (const auto& e : t.edges) {
    auto a = pos.find(e.u);
    auto b = pos.find(e.v);
    if (a == pos.end() || b == pos.end()) return false;
    if (!sets.unite(a->second, b->second)) return false;
  }
  return true;
}

namespace detail {

struct KMeansFit {
  std::vector<std::size_t> labels;
  double inertia = std::numeric_limits<double>::infinity();
};

inline KMeansFit kmeans_once(const Eigen::MatrixXd& x, std::size_t k, Rng& rng, int max_iter = 300) {
  const auto m = static_cast<std::size_t>(x.rows());
  Eigen::MatrixXd centers(static_cast<Eigen::Index>(k), x.cols());

  // k-means++ seeding
  std::uniform_int_distribution<std::size_t> first(0, m - 1);
  centers.row(0) = x.row(static_cast<Eigen::Index>(first(rng)));
  Eigen::VectorXd nearest(static_cast<Eigen::Index>(m));
  for (std::size_t p = 0; p < m; ++p) nearest(static_cast<Eigen::Index>(p)) = (x.row(static_cast<Eigen::Index>(p)) - centers.row(0)).squaredNorm();
  for (std::size_t c = 1; c < k; ++c) {
    const double total = nearest.sum();
    std::size_t chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      chosen = m - 1;
      for (std::size_t p = 0; p < m; ++p) {
        target -= nearest(static_cast<Eigen::Index>(p));
        if (target < 0.0) {
          chosen = p;
          break;
        }
      }
    } else {
      chosen = first(rng);
    }
    centers.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(chosen));
    for (std::size_t p = 0; p < m; ++p)
      nearest(static_cast<Eigen::Index>(p)) = std::min(nearest(static_cast<Eigen::Index>(p)),
                                                       (x.row(static_cast<Eigen::Index>(p)) - centers.row(static_cast<Eigen::Index>(c))).squaredNorm());
  }

  KMeansFit fit;
  fit.labels.assign(m, k);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t p = 0; p < m; ++p) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dist = (x.row(static_cast<Eigen::Index>(p)) - centers.row(static_cast<Eigen::Index>(c))).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      if (fit.labels[p] != best) {
        fit.labels[p] = best;
        changed = true;
      }
    }
    if (!changed && it > 0) break;

    std::vector<std::size_t> sizes(k, 0);
    centers.setZero();
    for (std::size_t p = 0; p < m; ++p) {
      centers.row(static_cast<Eigen::Index>(fit.labels[p])) += x.row(static_cast<Eigen::Index>(p));
      ++sizes[fit.labels[p]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) {
        centers.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(sizes[c]);
        continue;
      }
      // empty cluster: move it onto the point farthest from its center
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t p = 0; p < m; ++p) {
        const double dist = (x.row(static_cast<Eigen::Index>(p)) - centers.row(static_cast<Eigen::Index>(fit.labels[p]))).squaredNorm();
        if (dist > far_d) {
          far_d = dist;
          far = p;
        }
      }
      centers.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(far));
    }
  }
  fit.inertia = 0.0;
  for (std::size_t p = 0; p < m; ++p)
    fit.inertia += (x.row(static_cast<Eigen::Index>(p)) - centers.row(static_cast<Eigen::Index>(fit.labels[p]))).squaredNorm();
  return fit;
}

inline std::vector<std::size_t> relabel_by_first_appearance(const std::vector<std::size_t>& labels) {
  std::unordered_map<std::size_t, std::size_t> remap;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t p = 0; p < labels.size(); ++p) {
    auto [it, inserted] = remap.emplace(labels[p], remap.size());
    out[p] = it->second;
  }
  return out;
}

} // namespace detail

/// k-means on the rows of `x` with k-means++ seeding, best of `restarts`
/// by inertia. Labels numbered by first appearance.
inline std::vector<std::size_t> kmeans(const Eigen::MatrixXd& x, std::size_t k, std::uint64_t seed, int restarts = 10) {
  if (k < 1 || k > static_cast<std::size_t>(x.rows())) throw DataError("k-means: k must be in 1..rows");
  detail::KMeansFit best;
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
    auto fit = detail::kmeans_once(x, k, rng);
    if (fit.inertia < best.inertia) best = std::move(fit);
  }
  return detail::relabel_by_first_appearance(best.labels);
}

/// Spectral clustering of the tree's nodes with tree-edge weights as the
/// affinity: the k smallest eigenvectors of I - D^-1/2 W D^-1/2, rows
/// normalized, then seeded k-means.
inline ClusterAssignment spectral_clustering(const SpanningTree& t, std::size_t k, std::uint64_t seed) {
  const std::size_t m = t.nodes.size();
  if (k < 1) throw DataError("cluster count must be >= 1");
  if (k > m) throw DataError("cluster count " + std::to_string(k) + " exceeds node count " + std::to_string(m));
  ClusterAssignment out;
  out.nodes = t.nodes;
  out.k = k;
  if (k == 1) {
    out.labels.assign(m, 0);
    return out;
  }
  if (k == m) {
    out.labels.resize(m);
    std::iota(out.labels.begin(), out.labels.end(), std::size_t{0});
    return out;
  }

  std::unordered_map<std::size_t, std::size_t> pos;
  for (std::size_t p = 0; p < m; ++p) pos.emplace(t.nodes[p], p);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (const auto& e : t.edges) {
    const auto a = static_cast<Eigen::Index>(pos.at(e.u));
    const auto b = static_cast<Eigen::Index>(pos.at(e.v));
    w(a, b) = w(b, a) = e.weight;
  }
  const Eigen::VectorXd degree = w.rowwise().sum();
  for (Eigen::Index p = 0; p < degree.size(); ++p)
    if (!(degree(p) > 0.0)) throw NumericError("node " + std::to_string(t.nodes[static_cast<std::size_t>(p)]) + " has zero degree");
  const Eigen::VectorXd inv_sqrt = degree.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd laplacian = Eigen::MatrixXd::Identity(w.rows(), w.cols()) - inv_sqrt.asDiagonal() * w * inv_sqrt.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(laplacian);
  if (eig.info() != Eigen::Success) throw NumericError("Laplacian eigendecomposition failed");
  Eigen::MatrixXd embedding = eig.eigenvectors().leftCols(static_cast<Eigen::Index>(k));
  for (Eigen::Index p = 0; p < embedding.rows(); ++p) {
    const double norm = embedding.row(p).norm();
    if (norm > 0.0) embedding.row(p) /= norm;
  }
  out.labels = kmeans(embedding, k, seed);
  return out;
}

/// Nodes within `radius` hops of `root`, with the tree edges among them.
inline SpanningTree subtree_extract(const SpanningTree& t, std::size_t root, std::size_t radius) {
  if (std::find(t.nodes.begin(), t.nodes.end(), root) == t.nodes.end())
    throw DataError("root " + std::to_string(root) + " not in tree");
  std::unordered_map<std::size_t, std::vector<std::size_t>> adj;
  for (const auto& e : t.edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  std::unordered_map<std::size_t, std::size_t> hops{{root, 0}};
  std::queue<std::size_t> frontier;
  frontier.push(root);
  while (!frontier.empty()) {
    const auto x = frontier.front();
    frontier.pop();
    if (hops[x] == radius) continue;
    for (auto y : adj[x])
      if (hops.emplace(y, hops[x] + 1).second) frontier.push(y);
  }
  SpanningTree out;
  for (auto x : t.nodes)
    if (hops.count(x)) out.nodes.push_back(x);
  for (const auto& e : t.edges)
    if (hops.count(e.u) && hops.count(e.v)) out.edges.push_back(e);
  return out;
}

/// Equal-frequency weight buckets (0 = lightest .. buckets-1 = heaviest),
/// one per edge, by rank of the edge weight.
inline std::vector<std::size_t> weight_buckets(const std::vector<TreeEdge>& edges, std::size_t buckets = 5) {
  std::vector<std::size_t> idx(edges.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return edges[a].weight < edges[b].weight; });
  std::vector<std::size_t> out(edges.size(), 0);
  for (std::size_t r = 0; r < idx.size(); ++r) out[idx[r]] = r * buckets / idx.size();
  return out;
}

namespace detail {

inline std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

} // namespace detail

/// Undirected DOT graph. Node labels are "k : <label(k)>"; edges are colored
/// by 5 equal-frequency weight buckets, darker for heavier.
inline void write_dot(std::ostream& out, const SpanningTree& t, const std::function<std::string(std::size_t)>& label,
                      const ClusterAssignment* clusters = nullptr, const std::vector<std::string>& header = {}) {
  static const char* const kEdgeColors[] = {"gray80", "gray60", "gray40", "gray20", "black"};
  static const char* const kNodeColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  for (const auto& line : header) out << "// " << line << '\n';
  out << "// edge colors: 5 equal-frequency weight buckets, gray80 (lightest) .. black (heaviest)\n";
  out << "graph mst {\n  node [shape=box, style=filled, fillcolor=white];\n";
  for (auto x : t.nodes) {
    out << "  n" << x << " [label=\"" << x << " : " << detail::dot_escape(label(x)) << "\"";
    if (clusters) {
      const auto c = clusters->label_of(x);
      out << ", fillcolor=\"" << kNodeColors[c % 10] << "\", cluster=" << c;
    }
    out << "];\n";
  }
  const auto buckets = weight_buckets(t.edges);
  for (std::size_t e = 0; e < t.edges.size(); ++e) {
    const auto& edge = t.edges[e];
    char weight[32];
    std::snprintf(weight, sizeof weight, "%.6f", edge.weight);
    out << "  n" << edge.u << " -- n" << edge.v << " [hoc=" << weight << ", color=" << kEdgeColors[buckets[e]]
        << ", label=\"" << weight << "\"];\n";
  }
  out << "}\n";
}

} // namespace icahoc

#endif

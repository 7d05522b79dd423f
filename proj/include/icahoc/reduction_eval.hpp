#ifndef ICAHOC_REDUCTION_EVAL_HPP
#define ICAHOC_REDUCTION_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "icahoc/component_graph.hpp"
#include "icahoc/embedding_store.hpp"
#include "icahoc/error.hpp"
#include "icahoc/hoc_analysis.hpp"
#include "icahoc/random.hpp"

namespace icahoc {

struct WordPair {
  std::string a;
  std::string b;
  double gold = 0.0;
};

struct SimilarityDataset {
  std::string name;
  std::vector<WordPair> pairs;
};

/// Reads "word_a<TAB>word_b<TAB>score" (spaces also accepted as separators).
/// A first line whose score field is not numeric is treated as a header.
inline SimilarityDataset load_similarity_dataset(std::istream& in, std::string name) {
  SimilarityDataset ds;
  ds.name = std::move(name);
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = detail::strip_cr(line);
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (pos < text.size()) {
      while (pos < text.size() && (text[pos] == '\t' || text[pos] == ' ')) ++pos;
      if (pos >= text.size()) break;
      auto end = text.find_first_of("\t ", pos);
      if (end == std::string_view::npos) end = text.size();
      fields.push_back(text.substr(pos, end - pos));
      pos = end;
    }
    if (fields.empty()) continue;
    if (fields.size() != 3) throw DataError(ds.name + " line " + std::to_string(line_no) + ": expected 3 fields");
    const auto gold = detail::parse_double(fields[2]);
    if (!gold) {
      if (line_no == 1) continue;
      throw DataError(ds.name + " line " + std::to_string(line_no) + ": bad score '" + std::string(fields[2]) + "'");
    }
    if (!std::isfinite(*gold)) throw DataError(ds.name + " line " + std::to_string(line_no) + ": non-finite score");
    std::string a(fields[0]);
    std::string b(fields[1]);
    if (!seen.emplace(std::min(a, b), std::max(a, b)).second)
      throw DataError(ds.name + ": duplicate pair " + a + " / " + b);
    ds.pairs.push_back({std::move(a), std::move(b), *gold});
  }
  return ds;
}

inline SimilarityDataset load_similarity_dataset(const std::string& path) {
  auto in = detail::open_input(path);
  auto name = path.substr(path.find_last_of('/') == std::string::npos ? 0 : path.find_last_of('/') + 1);
  return load_similarity_dataset(in, name);
}

/// Source axis -> cluster id for all d axes.
struct AxisClustering {
  std::vector<std::size_t> cluster_of;
  std::size_t k = 0;
};

struct ReducedEmbedding {
  Eigen::MatrixXd vectors;
  AxisClustering clusters;
};

/// Column c of the result is the mean of the source columns in cluster c.
inline ReducedEmbedding cluster_average_reduce(const Eigen::MatrixXd& s, const AxisClustering& a) {
  if (a.cluster_of.size() != static_cast<std::size_t>(s.cols()))
    throw DataError("clustering covers " + std::to_string(a.cluster_of.size()) + " axes, matrix has " +
                    std::to_string(s.cols()));
  std::vector<std::size_t> sizes(a.k, 0);
  for (auto c : a.cluster_of) {
    if (c >= a.k) throw DataError("cluster id " + std::to_string(c) + " out of range");
    ++sizes[c];
  }
  for (std::size_t c = 0; c < a.k; ++c)
    if (sizes[c] == 0) throw DataError("empty cluster " + std::to_string(c));
  ReducedEmbedding out;
  out.clusters = a;
  out.vectors = Eigen::MatrixXd::Zero(s.rows(), static_cast<Eigen::Index>(a.k));
  for (std::size_t axis = 0; axis < a.cluster_of.size(); ++axis)
    out.vectors.col(static_cast<Eigen::Index>(a.cluster_of[axis])) += s.col(static_cast<Eigen::Index>(axis));
  for (std::size_t c = 0; c < a.k; ++c) out.vectors.col(static_cast<Eigen::Index>(c)) /= static_cast<double>(sizes[c]);
  return out;
}

/// Axes shuffled by seed then dealt round-robin into k clusters.
inline AxisClustering random_clustering(std::size_t d, std::size_t k, std::uint64_t seed) {
  if (k < 1 || k > d) throw DataError("random clustering needs 1 <= k <= d");
  std::vector<std::size_t> axes(d);
  std::iota(axes.begin(), axes.end(), std::size_t{0});
  Rng rng(seed);
  shuffle_in_place(axes, rng);
  AxisClustering out;
  out.k = k;
  out.cluster_of.assign(d, 0);
  for (std::size_t p = 0; p < d; ++p) out.cluster_of[axes[p]] = p % k;
  return out;
}

/// Converts a cluster assignment over all d axes into per-axis ids.
inline AxisClustering to_axis_clustering(const ClusterAssignment& a, std::size_t d) {
  AxisClustering out;
  out.k = a.k;
  out.cluster_of.assign(d, a.k);
  for (std::size_t p = 0; p < a.nodes.size(); ++p) {
    if (a.nodes[p] >= d) throw DataError("cluster node out of range");
    out.cluster_of[a.nodes[p]] = a.labels[p];
  }
  for (auto c : out.cluster_of)
    if (c == a.k) throw DataError("cluster assignment does not cover every axis");
  return out;
}

/// Average (fractional) ranks, 1-based.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t p = i; p <= j; ++p) ranks[idx[p]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw NumericError("correlation undefined for constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Spearman's rho: Pearson correlation of average ranks.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DataError("spearman: length mismatch");
  if (x.size() < 2) throw DataError("spearman: need at least 2 observations");
  return pearson(average_ranks(x), average_ranks(y));
}

struct SimilarityResult {
  double rho = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

/// Cosine similarity per in-vocabulary pair vs gold, by Spearman. Pairs with
/// an unknown word (or a zero vector) are skipped and counted.
inline SimilarityResult evaluate_similarity(const Eigen::MatrixXd& vectors, const WordIndex& index,
                                            const SimilarityDataset& ds) {
  std::vector<double> predicted;
  std::vector<double> gold;
  SimilarityResult out;
  for (const auto& p : ds.pairs) {
    auto a = index.find(p.a);
    auto b = index.find(p.b);
    if (a == index.end() || b == index.end()) {
      ++out.skipped;
      continue;
    }
    const auto va = vectors.row(static_cast<Eigen::Index>(a->second));
    const auto vb = vectors.row(static_cast<Eigen::Index>(b->second));
    const double denom = va.norm() * vb.norm();
    if (!(denom > 0.0)) {
      ++out.skipped;
      continue;
    }
    predicted.push_back(va.dot(vb) / denom);
    gold.push_back(p.gold);
  }
  out.used = predicted.size();
  if (out.used < 2)
    throw DataError(ds.name + ": fewer than 2 usable pairs (" + std::to_string(out.skipped) + " skipped)");
  out.rho = spearman(predicted, gold);
  return out;
}

enum class ReductionMethod { Random, SpectralMst };

inline const char* to_string(ReductionMethod m) { return m == ReductionMethod::Random ? "random" : "spectral_mst"; }

struct BenchmarkCell {
  ReductionMethod method = ReductionMethod::Random;
  std::size_t k = 0;
  std::string dataset;
  double mean_rho = 0.0;
  std::size_t runs = 0;
};

/// Random clustering vs spectral clustering on the maximum spanning tree of
/// the full d-node HOC graph, each reduced by cluster averaging and scored on
/// every dataset. Each cell averages rho over `seeds`.
inline std::vector<BenchmarkCell> run_reduction_benchmark(const Eigen::MatrixXd& s, const HocMatrix& hoc,
                                                          const WordIndex& index,
                                                          const std::vector<SimilarityDataset>& datasets,
                                                          const std::vector<std::size_t>& dims,
                                                          const std::vector<std::uint64_t>& seeds) {
  const auto d = static_cast<std::size_t>(s.cols());
  if (hoc.dim() != d) throw DataError("HOC matrix dimension does not match components");
  if (datasets.empty()) throw DataError("no similarity datasets");
  if (seeds.empty()) throw DataError("no seeds");
  for (auto k : dims)
    if (k < 1 || k > d) throw DataError("reduction target " + std::to_string(k) + " outside 1.." + std::to_string(d));

  std::vector<std::size_t> all(d);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto tree = d >= 2 ? maximum_spanning_tree(build_graph(hoc, all)) : SpanningTree{all, {}};

  std::vector<BenchmarkCell> table;
  for (auto method : {ReductionMethod::Random, ReductionMethod::SpectralMst}) {
    for (auto k : dims) {
      std::vector<double> sums(datasets.size(), 0.0);
      for (auto seed : seeds) {
        const auto clustering = method == ReductionMethod::Random
                                    ? random_clustering(d, k, seed)
                                    : to_axis_clustering(spectral_clustering(tree, k, seed), d);
        const auto reduced = cluster_average_reduce(s, clustering);
        for (std::size_t i = 0; i < datasets.size(); ++i)
          sums[i] += evaluate_similarity(reduced.vectors, index, datasets[i]).rho;
      }
      for (std::size_t i = 0; i < datasets.size(); ++i)
        table.push_back({method, k, datasets[i].name, sums[i] / static_cast<double>(seeds.size()), seeds.size()});
    }
  }
  return table;
}

} // namespace icahoc

#endif

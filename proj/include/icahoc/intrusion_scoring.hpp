#ifndef ICAHOC_INTRUSION_SCORING_HPP
#define ICAHOC_INTRUSION_SCORING_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "icahoc/error.hpp"
#include "icahoc/hoc_analysis.hpp"
#include "icahoc/random.hpp"

namespace icahoc {

// Word-intrusion consistency of ICA axes. For each axis the top-k words are
// compared against intruders: words in the bottom `low_q` of that axis that
// sit in the top `high_q` of some other axis.

struct IntrusionConfig {
  std::size_t top_k = 5;
  std::size_t intruders = 100;  // L
  std::uint64_t min_freq = 100;
  double low_q = 0.5;
  double high_q = 0.1;
  bool filter_pool = false;     // apply min_freq to the intruder pool too
  bool normalize_rows = false;  // distances between norm-1 rows instead of raw components
};

struct ConsistencyScore {
  std::size_t axis = 0;
  double score = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  std::vector<std::string> top_words;
  std::vector<std::size_t> intruder_rows;
  std::vector<std::string> intruder_sample;
  std::uint64_t seed = 0;
};

struct DistanceRatio {
  double intra = 0.0;
  double inter = 0.0;
  double score = 0.0;
};

/// Rows of `top` are the top-k points, rows of `intruders` the sampled
/// intruders. Intra averages over the k(k-1) ordered distinct pairs; inter is
/// the mean over intruders of the mean distance to the top points.
inline DistanceRatio consistency_score(const Eigen::MatrixXd& top, const Eigen::MatrixXd& intruders) {
  const auto k = top.rows();
  if (k < 2) throw DataError("consistency score needs at least 2 top words");
  if (intruders.rows() < 1) throw DataError("consistency score needs at least 1 intruder");
  DistanceRatio out;
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      if (a != b) out.intra += (top.row(a) - top.row(b)).norm();
  out.intra /= static_cast<double>(k * (k - 1));
  for (Eigen::Index w = 0; w < intruders.rows(); ++w) {
    double sum = 0.0;
    for (Eigen::Index a = 0; a < k; ++a) sum += (top.row(a) - intruders.row(w)).norm();
    out.inter += sum / static_cast<double>(k);
  }
  out.inter /= static_cast<double>(intruders.rows());
  if (!(out.intra > 0.0)) throw DataError("top words have zero mutual distance");
  out.score = out.inter / out.intra;
  return out;
}

/// Per-axis rank membership flags. Rank is the 1-based descending rank with
/// ties sharing the better rank; a word is in the top `high_q` of an axis
/// when rank/n <= high_q and in the bottom `low_q` when rank/n > 1 - low_q.
class QuantileRanks {
public:
  QuantileRanks(const Eigen::MatrixXd& s, double low_q, double high_q)
      : n_(static_cast<std::size_t>(s.rows())), d_(static_cast<std::size_t>(s.cols())) {
    if (!(low_q >= 0.0 && low_q <= 1.0 && high_q >= 0.0 && high_q <= 1.0))
      throw DataError("quantiles must lie in [0, 1]");
    top_.assign(d_, std::vector<bool>(n_, false));
    bottom_.assign(d_, std::vector<bool>(n_, false));
    top_count_.assign(n_, 0);
    std::vector<std::size_t> idx(n_);
    const double nd = static_cast<double>(n_);
    for (std::size_t a = 0; a < d_; ++a) {
      const auto col = s.col(static_cast<Eigen::Index>(a));
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
        return col(static_cast<Eigen::Index>(x)) > col(static_cast<Eigen::Index>(y));
      });
      std::size_t group_start = 0;
      for (std::size_t p = 0; p < n_; ++p) {
        if (p > 0 && col(static_cast<Eigen::Index>(idx[p])) != col(static_cast<Eigen::Index>(idx[p - 1]))) group_start = p;
        const double q = static_cast<double>(group_start + 1) / nd;
        const auto t = idx[p];
        if (q <= high_q) {
          top_[a][t] = true;
          ++top_count_[t];
        }
        if (q > 1.0 - low_q) bottom_[a][t] = true;
      }
    }
  }

  std::size_t words() const { return n_; }
  std::size_t axes() const { return d_; }

  std::vector<std::size_t> intruder_pool(std::size_t axis) const {
    if (d_ < 2) throw DataError("intruder pool needs at least 2 axes");
    if (axis >= d_) throw DataError("axis " + std::to_string(axis) + " out of range");
    std::vector<std::size_t> pool;
    for (std::size_t t = 0; t < n_; ++t) {
      const std::size_t elsewhere = top_count_[t] - (top_[axis][t] ? 1 : 0);
      if (bottom_[axis][t] && elsewhere > 0) pool.push_back(t);
    }
    if (pool.empty())
      throw DataError("empty intruder pool for axis " + std::to_string(axis) + "; use larger quantiles");
    return pool;
  }

private:
  std::size_t n_;
  std::size_t d_;
  std::vector<std::vector<bool>> top_;
  std::vector<std::vector<bool>> bottom_;
  std::vector<std::size_t> top_count_;
};

inline std::vector<std::size_t> intruder_pool(const Eigen::MatrixXd& s, std::size_t axis, double low_q = 0.5,
                                              double high_q = 0.1) {
  return QuantileRanks(s, low_q, high_q).intruder_pool(axis);
}

namespace detail {

inline Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& s, const std::vector<std::size_t>& rows, bool normalize) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), s.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = s.row(static_cast<Eigen::Index>(rows[r]));
    if (normalize) {
      const double norm = out.row(static_cast<Eigen::Index>(r)).norm();
      if (norm > 0.0) out.row(static_cast<Eigen::Index>(r)) /= norm;
    }
  }
  return out;
}

} // namespace detail

inline ConsistencyScore score_axis(const Eigen::MatrixXd& s, const std::vector<std::string>& vocab,
                                   const std::vector<std::uint64_t>& counts, const QuantileRanks& ranks,
                                   std::size_t axis, const IntrusionConfig& cfg, std::uint64_t seed) {
  const auto top = top_words(s, vocab, counts, axis, cfg.top_k, cfg.min_freq);
  if (top.rows.size() < 2)
    throw DataError("axis " + std::to_string(axis) + ": fewer than 2 top words after frequency filter");

  auto pool = ranks.intruder_pool(axis);
  if (cfg.filter_pool) {
    std::erase_if(pool, [&](std::size_t t) { return t >= counts.size() || counts[t] < cfg.min_freq; });
    if (pool.empty()) throw DataError("empty intruder pool for axis " + std::to_string(axis) + " after frequency filter");
  }
  if (cfg.intruders < 1) throw DataError("need at least 1 intruder");

  ConsistencyScore out;
  out.axis = axis;
  out.seed = seed;
  out.top_words = top.words;
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  out.intruder_rows.reserve(cfg.intruders);
  for (std::size_t l = 0; l < cfg.intruders; ++l) out.intruder_rows.push_back(pool[pick(rng)]);
  for (auto t : out.intruder_rows) out.intruder_sample.push_back(vocab.at(t));

  try {
    const auto ratio = consistency_score(detail::gather_rows(s, top.rows, cfg.normalize_rows),
                                         detail::gather_rows(s, out.intruder_rows, cfg.normalize_rows));
    out.intra = ratio.intra;
    out.inter = ratio.inter;
    out.score = ratio.score;
  } catch (const DataError& e) {
    throw DataError("axis " + std::to_string(axis) + ": " + e.what());
  }
  return out;
}

inline ConsistencyScore score_axis(const Eigen::MatrixXd& s, const std::vector<std::string>& vocab,
                                   const std::vector<std::uint64_t>& counts, std::size_t axis,
                                   const IntrusionConfig& cfg, std::uint64_t seed) {
  return score_axis(s, vocab, counts, QuantileRanks(s, cfg.low_q, cfg.high_q), axis, cfg, seed);
}

/// Scores every axis; axis a uses seed + a.
inline std::vector<ConsistencyScore> score_all_axes(const Eigen::MatrixXd& s, const std::vector<std::string>& vocab,
                                                    const std::vector<std::uint64_t>& counts,
                                                    const IntrusionConfig& cfg, std::uint64_t seed) {
  const QuantileRanks ranks(s, cfg.low_q, cfg.high_q);
  std::vector<ConsistencyScore> out;
  out.reserve(static_cast<std::size_t>(s.cols()));
  for (std::size_t a = 0; a < static_cast<std::size_t>(s.cols()); ++a)
    out.push_back(score_axis(s, vocab, counts, ranks, a, cfg, seed + a));
  return out;
}

/// sigma[j] = axis with the j-th highest score; ties by ascending axis.
struct SigmaOrder {
  std::vector<std::size_t> sigma;
};

inline SigmaOrder sigma_order(const std::vector<ConsistencyScore>& scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].score != scores[b].score) return scores[a].score > scores[b].score;
    return scores[a].axis < scores[b].axis;
  });
  SigmaOrder out;
  for (auto i : idx) out.sigma.push_back(scores[i].axis);
  return out;
}

} // namespace icahoc

#endif

#ifndef ICAHOC_HOC_ANALYSIS_HPP
#define ICAHOC_HOC_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "icahoc/binary_io.hpp"
#include "icahoc/error.hpp"

namespace icahoc {

/// Symmetric d x d matrix of E(S_i^2 S_j^2). The diagonal holds the fourth
/// moments E(S_i^4).
struct HocMatrix {
  Eigen::MatrixXd values;
  bool diag_is_fourth_moment = true;

  std::size_t dim() const { return static_cast<std::size_t>(values.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

/// Throws unless every column has |mean| and |variance - 1| within `tol`.
/// The message lists the offending columns.
inline void check_standardized(const Eigen::MatrixXd& s, double tol = 1e-3) {
  if (s.rows() < 1) throw DataError("empty component matrix");
  const double n = static_cast<double>(s.rows());
  std::ostringstream bad;
  int shown = 0;
  int count = 0;
  for (Eigen::Index c = 0; c < s.cols(); ++c) {
    const double mean = s.col(c).mean();
    const double var = (s.col(c).array() - mean).square().sum() / n;
    if (std::abs(mean) > tol || std::abs(var - 1.0) > tol) {
      ++count;
      if (shown++ < 8) bad << " [col " << c << ": mean " << mean << ", var " << var << "]";
    }
  }
  if (count > 0)
    throw DataError("components are not whitened (" + std::to_string(count) + " column(s) off):" + bad.str());
}

/// E(S_i^2 S_j^2) = (1/n) sum_t S_ti^2 S_tj^2 for every pair including i = j.
inline HocMatrix hoc_matrix(const Eigen::MatrixXd& s) {
  check_standardized(s);
  const Eigen::MatrixXd sq = s.array().square().matrix();
  HocMatrix h;
  h.values.noalias() = sq.transpose() * sq;
  h.values /= static_cast<double>(s.rows());
  // mirror the upper triangle so symmetry is exact
  h.values.triangularView<Eigen::StrictlyLower>() = h.values.transpose();
  return h;
}

/// Sample covariance of the squared components, cov(S_i^2, S_j^2).
inline Eigen::MatrixXd squared_covariance(const Eigen::MatrixXd& s) {
  const Eigen::MatrixXd sq = s.array().square().matrix();
  const Eigen::RowVectorXd mean = sq.colwise().mean();
  const Eigen::MatrixXd centered = sq.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(s.rows());
}

struct Contribution {
  std::size_t row = 0;
  std::string word;
  double value = 0.0;
};

/// Per-word terms S_ti^2 S_tj^2 of one HOC entry, sorted descending
/// (ties by vocabulary index).
struct ContributionList {
  std::size_t axis_i = 0;
  std::size_t axis_j = 0;
  std::vector<Contribution> entries;
};

namespace detail {

inline void check_axis(const Eigen::MatrixXd& s, std::size_t axis) {
  if (axis >= static_cast<std::size_t>(s.cols()))
    throw DataError("axis " + std::to_string(axis) + " out of range (d = " + std::to_string(s.cols()) + ")");
}

/// Indices sorted by value descending then index ascending, truncated to k.
inline std::vector<std::size_t> top_indices(std::vector<std::size_t> candidates, const auto& value_of, std::size_t k) {
  const auto better = [&](std::size_t a, std::size_t b) {
    const double va = value_of(a);
    const double vb = value_of(b);
    return va != vb ? va > vb : a < b;
  };
  k = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(), better);
  candidates.resize(k);
  return candidates;
}

} // namespace detail

inline ContributionList top_contributors(const Eigen::MatrixXd& s, const std::vector<std::string>& vocab,
                                         std::size_t i, std::size_t j, std::size_t k) {
  detail::check_axis(s, i);
  detail::check_axis(s, j);
  if (k < 1) throw DataError("k must be >= 1");
  const auto n = static_cast<std::size_t>(s.rows());
  const auto ci = static_cast<Eigen::Index>(i);
  const auto cj = static_cast<Eigen::Index>(j);
  const auto term = [&](std::size_t t) {
    const double a = s(static_cast<Eigen::Index>(t), ci);
    const double b = s(static_cast<Eigen::Index>(t), cj);
    return a * a * b * b;
  };
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  ContributionList list{i, j, {}};
  for (auto t : detail::top_indices(std::move(rows), term, k)) list.entries.push_back({t, vocab.at(t), term(t)});
  return list;
}

inline ContributionList all_contributions(const Eigen::MatrixXd& s, const std::vector<std::string>& vocab,
                                          std::size_t i, std::size_t j) {
  return top_contributors(s, vocab, i, j, std::max<std::size_t>(1, static_cast<std::size_t>(s.rows())));
}

struct TopWords {
  std::size_t axis = 0;
  std::vector<std::size_t> rows;
  std::vector<std::string> words;
  std::vector<double> values;
  std::vector<std::string> warnings;
};

/// The k largest (signed) component values on `axis` among words with
/// count >= min_freq. Ties by vocabulary index.
inline TopWords top_words(const Eigen::MatrixXd& s, const std::vector<std::string>& vocab,
                          const std::vector<std::uint64_t>& counts, std::size_t axis, std::size_t k,
                          std::uint64_t min_freq) {
  detail::check_axis(s, axis);
  if (k < 1) throw DataError("k must be >= 1");
  const auto n = static_cast<std::size_t>(s.rows());
  std::vector<std::size_t> eligible;
  eligible.reserve(n);
  for (std::size_t t = 0; t < n; ++t)
    if (min_freq == 0 || (t < counts.size() && counts[t] >= min_freq)) eligible.push_back(t);
  const auto c = static_cast<Eigen::Index>(axis);
  const auto value = [&](std::size_t t) { return s(static_cast<Eigen::Index>(t), c); };
  TopWords out;
  out.axis = axis;
  out.rows = detail::top_indices(std::move(eligible), value, k);
  for (auto t : out.rows) {
    out.words.push_back(vocab.at(t));
    out.values.push_back(value(t));
  }
  if (out.rows.size() < k)
    out.warnings.push_back("axis " + std::to_string(axis) + ": only " + std::to_string(out.rows.size()) +
                           " words with frequency >= " + std::to_string(min_freq));
  return out;
}

struct FrequencyCorrelation {
  double r = 0.0;
  bool degenerate = false;
};

/// Pearson r between word counts and each component column. Zero variance
/// on either side yields r = 0 with `degenerate` set. `log_counts` uses
/// log(1 + n_w) instead of raw counts.
inline std::vector<FrequencyCorrelation> frequency_correlation(const Eigen::MatrixXd& s,
                                                               const std::vector<std::uint64_t>& counts,
                                                               bool log_counts = false) {
  if (s.rows() < 2) throw DataError("frequency correlation needs at least 2 words");
  if (counts.size() != static_cast<std::size_t>(s.rows())) throw DataError("frequency vector length mismatch");
  Eigen::VectorXd f(s.rows());
  for (Eigen::Index t = 0; t < s.rows(); ++t) {
    const double c = static_cast<double>(counts[static_cast<std::size_t>(t)]);
    f(t) = log_counts ? std::log1p(c) : c;
  }
  const Eigen::VectorXd fc = f.array() - f.mean();
  const double f_norm = fc.norm();
  std::vector<FrequencyCorrelation> out(static_cast<std::size_t>(s.cols()));
  for (Eigen::Index c = 0; c < s.cols(); ++c) {
    const Eigen::VectorXd xc = s.col(c).array() - s.col(c).mean();
    const double x_norm = xc.norm();
    auto& r = out[static_cast<std::size_t>(c)];
    if (!(f_norm > 0.0) || !(x_norm > 0.0)) {
      r.degenerate = true;
      continue;
    }
    r.r = std::clamp(fc.dot(xc) / (f_norm * x_norm), -1.0, 1.0);
  }
  return out;
}

/// Bin counts over the upper-triangle entries (plus the diagonal when asked).
/// Values outside [lo, hi) land in the end bins.
inline std::vector<std::size_t> hoc_histogram(const HocMatrix& h, bool include_diag, std::size_t bins, double lo,
                                              double hi) {
  if (bins < 1) throw DataError("bins must be >= 1");
  if (!(hi > lo)) throw DataError("degenerate histogram range");
  std::vector<std::size_t> counts(bins, 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  const auto add = [&](double v) {
    double pos = std::floor((v - lo) / width);
    pos = std::clamp(pos, 0.0, static_cast<double>(bins - 1));
    ++counts[static_cast<std::size_t>(pos)];
  };
  const auto d = h.dim();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = include_diag ? i : i + 1; j < d; ++j) add(h(i, j));
  return counts;
}

inline constexpr std::string_view kHocMagic = "ICAHOCHM";
inline constexpr std::uint8_t kHocVersion = 1;

inline void save_hoc(const HocMatrix& h, std::ostream& out) {
  io::Writer w(out);
  w.raw(kHocMagic);
  w.u8(kHocVersion);
  w.matrix(h.values);
}

inline HocMatrix load_hoc(std::istream& in) {
  io::Reader r(in, "HOC matrix");
  r.expect_header(kHocMagic, kHocVersion);
  HocMatrix h;
  h.values = r.matrix();
  if (h.values.rows() != h.values.cols()) throw DataError("corrupt HOC matrix: not square");
  return h;
}

} // namespace icahoc

#endif

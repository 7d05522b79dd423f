#ifndef ICAHOC_FASTICA_HPP
#define ICAHOC_FASTICA_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "icahoc/binary_io.hpp"
#include "icahoc/error.hpp"
#include "icahoc/random.hpp"

namespace icahoc {

enum class Nonlinearity : std::uint8_t { LogCosh = 0, Cube = 1 };

struct IcaConfig {
  Nonlinearity nonlinearity = Nonlinearity::LogCosh;
  double alpha = 1.0;  // logcosh scale
  int max_iter = 200;
  double tol = 1e-4;
  std::uint64_t seed = 0;
};

/// Orthogonal rotation R with S = Z * R, plus the skewness canonicalization.
///
/// Columns of `components` are stored in estimation order; `order[a]` is the
/// column shown as display axis a (descending skewness after canonicalize).
struct IcaResult {
  Eigen::MatrixXd rotation;
  Eigen::MatrixXd components;
  Eigen::VectorXd skewness;
  std::vector<std::size_t> order;
  std::vector<int> signs;
  int iterations = 0;
  bool converged = false;
  IcaConfig config;
  std::vector<std::string> warnings;

  std::size_t dim() const { return static_cast<std::size_t>(rotation.cols()); }

  /// Components with columns permuted into display order.
  Eigen::MatrixXd display_components() const {
    Eigen::MatrixXd out(components.rows(), components.cols());
    for (std::size_t a = 0; a < order.size(); ++a) out.col(static_cast<Eigen::Index>(a)) = components.col(static_cast<Eigen::Index>(order[a]));
    return out;
  }

  Eigen::MatrixXd display_rotation() const {
    Eigen::MatrixXd out(rotation.rows(), rotation.cols());
    for (std::size_t a = 0; a < order.size(); ++a) out.col(static_cast<Eigen::Index>(a)) = rotation.col(static_cast<Eigen::Index>(order[a]));
    return out;
  }

  Eigen::VectorXd display_skewness() const {
    Eigen::VectorXd out(skewness.size());
    for (std::size_t a = 0; a < order.size(); ++a) out(static_cast<Eigen::Index>(a)) = skewness(static_cast<Eigen::Index>(order[a]));
    return out;
  }
};

/// Standardized third moment of each column, 1/n normalization. Constant
/// columns get 0.
inline Eigen::VectorXd column_skewness(const Eigen::MatrixXd& s) {
  Eigen::VectorXd out(s.cols());
  const double n = static_cast<double>(s.rows());
  for (Eigen::Index c = 0; c < s.cols(); ++c) {
    const Eigen::ArrayXd centered = s.col(c).array() - s.col(c).mean();
    const double m2 = centered.square().sum() / n;
    const double m3 = centered.cube().sum() / n;
    out(c) = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  }
  return out;
}

/// W <- (W W^T)^(-1/2) W, eigenvalues floored at 1e-12.
inline Eigen::MatrixXd symmetric_decorrelation(const Eigen::MatrixXd& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w * w.transpose());
  if (eig.info() != Eigen::Success) throw NumericError("decorrelation eigendecomposition failed");
  const Eigen::VectorXd inv_sqrt = eig.eigenvalues().cwiseMax(1e-12).cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose() * w;
}

inline Eigen::MatrixXd random_orthogonal(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd w(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = normal(rng);
  return symmetric_decorrelation(w);
}

/// Flips negatively skewed columns and orders display axes by descending
/// skewness (ties keep estimation order). Idempotent.
inline IcaResult canonicalize(IcaResult r) {
  if (r.components.cols() == 0) return r;
  r.skewness = column_skewness(r.components);
  if (r.signs.size() != static_cast<std::size_t>(r.components.cols())) r.signs.assign(r.components.cols(), 1);
  for (Eigen::Index c = 0; c < r.components.cols(); ++c) {
    if (r.skewness(c) < 0.0) {
      r.components.col(c) *= -1.0;
      r.rotation.col(c) *= -1.0;
      r.skewness(c) = -r.skewness(c);
      r.signs[static_cast<std::size_t>(c)] *= -1;
    }
  }
  r.order.resize(static_cast<std::size_t>(r.components.cols()));
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
    return r.skewness(static_cast<Eigen::Index>(a)) > r.skewness(static_cast<Eigen::Index>(b));
  });
  return r;
}

/// Largest absolute deviation of Z^T Z / n from the identity.
inline double whiteness_deviation(const Eigen::MatrixXd& z) {
  const Eigen::MatrixXd c = (z.transpose() * z) / static_cast<double>(z.rows());
  return (c - Eigen::MatrixXd::Identity(c.rows(), c.cols())).cwiseAbs().maxCoeff();
}

/// Symmetric fixed-point FastICA on whitened data. The result is not yet
/// canonicalized: signs are all +1 and `order` is the identity.
inline IcaResult fit_ica(const Eigen::MatrixXd& z, const IcaConfig& cfg = {}) {
  if (cfg.max_iter < 1) throw DataError("max_iter must be >= 1");
  if (!(cfg.tol > 0.0)) throw DataError("tol must be positive");
  if (z.rows() < 2 || z.cols() < 1) throw DataError("ICA needs at least 2 rows and 1 column");
  const double dev = whiteness_deviation(z);
  if (dev > 1e-3) throw DataError("ICA input is not white (covariance deviates from identity by " + std::to_string(dev) + ")");

  const auto d = static_cast<std::size_t>(z.cols());
  const double n = static_cast<double>(z.rows());
  Eigen::MatrixXd w = random_orthogonal(d, cfg.seed);

  IcaResult result;
  result.config = cfg;
  Eigen::ArrayXXd g(z.rows(), z.cols());
  Eigen::ArrayXd g_prime_mean(z.cols());
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const Eigen::ArrayXXd y = (z * w.transpose()).array();
    switch (cfg.nonlinearity) {
    case Nonlinearity::LogCosh: {
      g = (cfg.alpha * y).tanh();
      g_prime_mean = (cfg.alpha * (1.0 - g.square())).colwise().mean().transpose();
      break;
    }
    case Nonlinearity::Cube: {
      g = y.cube();
      g_prime_mean = (3.0 * y.square()).colwise().mean().transpose();
      break;
    }
    }
    Eigen::MatrixXd w_next = (g.matrix().transpose() * z) / n - g_prime_mean.matrix().asDiagonal() * w;
    w_next = symmetric_decorrelation(w_next);
    const double lim = ((w_next * w.transpose()).diagonal().cwiseAbs().array() - 1.0).abs().maxCoeff();
    w = std::move(w_next);
    result.iterations = it;
    if (lim < cfg.tol) {
      result.converged = true;
      break;
    }
  }
  if (!result.converged)
    result.warnings.push_back("FastICA did not converge in " + std::to_string(cfg.max_iter) + " iterations");

  result.rotation = w.transpose();
  result.components = z * result.rotation;
  result.skewness = column_skewness(result.components);
  result.signs.assign(d, 1);
  result.order.resize(d);
  std::iota(result.order.begin(), result.order.end(), std::size_t{0});
  return result;
}

/// Normalized Amari index of P = q^{-1} p, in [0, 1]; 0 iff P is a scaled
/// permutation.
inline double amari_index(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  if (p.rows() != p.cols() || q.rows() != q.cols() || p.rows() != q.rows())
    throw DataError("amari_index needs square matrices of equal size");
  const Eigen::Index m = p.rows();
  if (m < 2) return 0.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(q);
  if (!lu.isInvertible()) throw NumericError("amari_index: singular reference matrix");
  const Eigen::ArrayXXd a = lu.solve(p).cwiseAbs().array();
  const double rows = ((a.rowwise().sum() / a.rowwise().maxCoeff()) - 1.0).sum();
  const double cols = ((a.colwise().sum() / a.colwise().maxCoeff()) - 1.0).sum();
  return (rows + cols) / (2.0 * static_cast<double>(m) * static_cast<double>(m - 1));
}

inline constexpr std::string_view kIcaMagic = "ICAHOCIC";
inline constexpr std::uint8_t kIcaVersion = 1;

/// Persists everything except the component matrix, which is recomputed from
/// the whitened data on load.
inline void save_ica(const IcaResult& r, std::ostream& out) {
  io::Writer w(out);
  w.raw(kIcaMagic);
  w.u8(kIcaVersion);
  w.u8(static_cast<std::uint8_t>(r.config.nonlinearity));
  w.f64(r.config.alpha);
  w.u64(static_cast<std::uint64_t>(r.config.max_iter));
  w.f64(r.config.tol);
  w.u64(r.config.seed);
  w.u64(static_cast<std::uint64_t>(r.iterations));
  w.u8(r.converged ? 1 : 0);
  w.matrix(r.rotation);
  w.vector(r.skewness);
  w.index_list(r.order);
  w.u64(r.signs.size());
  for (int s : r.signs) w.u8(s < 0 ? 1 : 0);
}

inline IcaResult load_ica(std::istream& in, const Eigen::MatrixXd& z) {
  io::Reader rd(in, "ICA model");
  rd.expect_header(kIcaMagic, kIcaVersion);
  IcaResult r;
  r.config.nonlinearity = static_cast<Nonlinearity>(rd.u8());
  r.config.alpha = rd.f64();
  r.config.max_iter = static_cast<int>(rd.u64());
  r.config.tol = rd.f64();
  r.config.seed = rd.u64();
  r.iterations = static_cast<int>(rd.u64());
  r.converged = rd.u8() != 0;
  r.rotation = rd.matrix();
  r.skewness = rd.vector();
  r.order = rd.index_list();
  const auto ns = rd.length();
  r.signs.resize(ns);
  for (auto& s : r.signs) s = rd.u8() ? -1 : 1;
  if (r.rotation.rows() != z.cols()) throw DataError("ICA model does not match whitened data dimension");
  r.components = z * r.rotation;
  return r;
}

} // namespace icahoc

#endif

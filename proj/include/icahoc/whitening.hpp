#ifndef ICAHOC_WHITENING_HPP
#define ICAHOC_WHITENING_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "icahoc/binary_io.hpp"
#include "icahoc/error.hpp"

namespace icahoc {

/// PCA whitening fitted on a data matrix.
///
/// `map` is d x k with columns u_c / sqrt(lambda_c), so Z = (X - mean) * map has
/// identity sample covariance (1/n normalization) on the training data.
/// `directions` holds the unit eigenvectors u_c in the same order.
struct WhiteningModel {
  Eigen::RowVectorXd mean;
  Eigen::MatrixXd map;
  Eigen::MatrixXd directions;
  Eigen::VectorXd eigenvalues;  // descending, strictly positive
  std::vector<std::string> warnings;

  std::size_t input_dim() const { return static_cast<std::size_t>(mean.size()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(map.cols()); }
};

/// Sample covariance with 1/n normalization.
inline Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(x.rows());
}

/// Fits the whitening map. `k` defaults to d. Eigenvalues below
/// `eps * largest` are dropped and k shrinks to match, with a warning.
inline WhiteningModel fit_whitening(const Eigen::MatrixXd& x, std::optional<std::size_t> k = std::nullopt,
                                    double eps = 1e-10) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  if (n <= 1) throw DataError("whitening needs at least 2 rows");
  if (!(eps > 0.0)) throw DataError("eigenvalue floor must be positive");
  std::size_t keep = k.value_or(d);
  if (keep < 1 || keep > d) throw DataError("retained dimension must be in 1.." + std::to_string(d));
  if (n <= keep) throw DataError("whitening needs more rows than retained dimensions");

  WhiteningModel model;
  model.mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - model.mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");

  // Eigen returns ascending order.
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double largest = values(values.size() - 1);
  if (!(largest > 0.0)) throw DataError("data has zero variance");

  std::size_t rank = 0;
  for (Eigen::Index i = values.size() - 1; i >= 0; --i) {
    if (values(i) < eps * largest) break;
    ++rank;
  }
  if (keep > rank) {
    model.warnings.push_back("retained dimension reduced from " + std::to_string(keep) + " to " +
                             std::to_string(rank) + " (eigenvalues below floor)");
    keep = rank;
  }

  const auto kk = static_cast<Eigen::Index>(keep);
  model.eigenvalues.resize(kk);
  model.directions.resize(static_cast<Eigen::Index>(d), kk);
  for (Eigen::Index c = 0; c < kk; ++c) {
    const Eigen::Index src = values.size() - 1 - c;
    Eigen::VectorXd u = eig.eigenvectors().col(src);
    Eigen::Index argmax = 0;
    u.cwiseAbs().maxCoeff(&argmax);
    if (u(argmax) < 0.0) u = -u;
    model.directions.col(c) = u;
    model.eigenvalues(c) = values(src);
  }
  model.map = model.directions * model.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal();
  return model;
}

inline void check_input_dim(const WhiteningModel& model, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.cols()) != model.input_dim())
    throw DataError("dimension mismatch: model expects " + std::to_string(model.input_dim()) + " columns, got " +
                    std::to_string(x.cols()));
}

/// Z = (X - mean) * A.
inline Eigen::MatrixXd apply_whitening(const WhiteningModel& model, const Eigen::MatrixXd& x) {
  check_input_dim(model, x);
  return (x.rowwise() - model.mean) * model.map;
}

/// (X - mean) * U: principal coordinates, variance-sorted, not rescaled.
inline Eigen::MatrixXd pca_view(const WhiteningModel& model, const Eigen::MatrixXd& x) {
  check_input_dim(model, x);
  return (x.rowwise() - model.mean) * model.directions;
}

inline constexpr std::string_view kWhiteningMagic = "ICAHOCWH";
inline constexpr std::uint8_t kWhiteningVersion = 1;

inline void save_whitening(const WhiteningModel& model, std::ostream& out) {
  io::Writer w(out);
  w.raw(kWhiteningMagic);
  w.u8(kWhiteningVersion);
  w.vector(model.mean.transpose());
  w.matrix(model.directions);
  w.vector(model.eigenvalues);
}

inline WhiteningModel load_whitening(std::istream& in) {
  io::Reader r(in, "whitening model");
  r.expect_header(kWhiteningMagic, kWhiteningVersion);
  WhiteningModel model;
  model.mean = r.vector().transpose();
  model.directions = r.matrix();
  model.eigenvalues = r.vector();
  if (model.directions.rows() != model.mean.size() || model.directions.cols() != model.eigenvalues.size())
    throw DataError("corrupt whitening model: inconsistent shapes");
  model.map = model.directions * model.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal();
  return model;
}

} // namespace icahoc

#endif

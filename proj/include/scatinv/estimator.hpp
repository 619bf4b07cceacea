#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "scatinv/error.hpp"

namespace scatinv {

/// First and second sample moments of paired vectors (X, Z).
struct MomentModel {
  Eigen::VectorXd mean_x;
  Eigen::VectorXd mean_z;
  Eigen::MatrixXd k_xz;  // dim_x x dim_z
  Eigen::MatrixXd k_zz;  // dim_z x dim_z
  double ridge = 0.0;
  long n_samples = 0;
};

/// How an estimator consumes a full scattering vector.
///
/// Dense: G acts on the whole vector. Shared: the process is treated as
/// stationary, so one regression per location is learned from all locations
/// at once. Its input is every path within `radius` grid cells (circularly) of
/// the location, its output the paths at the location.
struct EstimatorLayout {
  bool shared = false;
  long paths = 0;
  long grid_rows = 0;
  long grid_cols = 0;
  int radius = 0;

  long window() const { return (2L * radius + 1) * (2L * radius + 1); }
  long locations() const { return grid_rows * grid_cols; }
  long full_size() const { return paths * locations(); }
  long input_dim() const { return shared ? paths * window() : full_size(); }
  long output_dim() const { return shared ? paths : full_size(); }

  friend bool operator==(const EstimatorLayout&, const EstimatorLayout&) = default;
};

/// The affine map Z -> G Z + h.
struct LinearEstimator {
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  int iteration_tag = 0;
  double ridge = 0.0;
  EstimatorLayout layout;
};

/// Samples are the columns of X and Z.
inline MomentModel fit_moments(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z, double ridge) {
  if (X.cols() != Z.cols()) throw ShapeError("fit_moments: sample counts differ");
  if (X.cols() < 2) throw ArgumentError("fit_moments: need at least two samples");
  if (ridge < 0.0) throw ArgumentError("fit_moments: ridge must be nonnegative");
  const double n = static_cast<double>(X.cols());
  MomentModel mm;
  mm.mean_x = X.rowwise().mean();
  mm.mean_z = Z.rowwise().mean();
  const Eigen::MatrixXd xc = X.colwise() - mm.mean_x;
  const Eigen::MatrixXd zc = Z.colwise() - mm.mean_z;
  mm.k_xz = xc * zc.transpose() / (n - 1.0);
  mm.k_zz.resize(zc.rows(), zc.rows());
  mm.k_zz.setZero();
  mm.k_zz.selfadjointView<Eigen::Lower>().rankUpdate(zc, 1.0 / (n - 1.0));
  mm.k_zz.triangularView<Eigen::StrictlyUpper>() = mm.k_zz.transpose();
  mm.ridge = ridge;
  mm.n_samples = X.cols();
  return mm;
}

inline MomentModel fit_moments(const std::vector<Eigen::VectorXd>& xs, const std::vector<Eigen::VectorXd>& zs,
                               double ridge) {
  if (xs.size() != zs.size()) throw ShapeError("fit_moments: sample counts differ");
  if (xs.size() < 2) throw ArgumentError("fit_moments: need at least two samples");
  const long dx = xs.front().size(), dz = zs.front().size();
  Eigen::MatrixXd X(dx, static_cast<long>(xs.size())), Z(dz, static_cast<long>(zs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].size() != dx || zs[i].size() != dz) throw ShapeError("fit_moments: sample length mismatch");
    X.col(static_cast<long>(i)) = xs[i];
    Z.col(static_cast<long>(i)) = zs[i];
  }
  return fit_moments(X, Z, ridge);
}

/// Ridge scaled to the average variance of Z: relative * trace(K_ZZ) / dim,
/// never below `floor`.
inline double relative_ridge(const Eigen::MatrixXd& k_zz, double relative, double floor = 0.0) {
  const double avg = k_zz.rows() > 0 ? k_zz.trace() / static_cast<double>(k_zz.rows()) : 0.0;
  return std::max(relative * avg, floor);
}

/// G = K_XZ (K_ZZ + ridge I)^-1, h = E[X] - G E[Z].
inline LinearEstimator fit_lmmse(const MomentModel& mm) {
  const long dz = mm.k_zz.rows();
  Eigen::MatrixXd a = mm.k_zz;
  a.diagonal().array() += mm.ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    throw NumericalError("fit_lmmse: K_ZZ + ridge*I is not positive definite (ridge = " + std::to_string(mm.ridge) +
                         "); increase the ridge");
  LinearEstimator est;
  est.G = llt.solve(mm.k_xz.transpose()).transpose();
  if (!est.G.allFinite()) throw NumericalError("fit_lmmse: solve produced non-finite coefficients");
  est.h = mm.mean_x - est.G * mm.mean_z;
  est.ridge = mm.ridge;
  est.layout.shared = false;
  est.layout.paths = dz;
  est.layout.grid_rows = 1;
  est.layout.grid_cols = 1;
  return est;
}

/// Neighborhood features for every location of a path-major vector. Column
/// l = r * grid_cols + c holds, for each offset (dr, dc) in row-major window
/// order, all paths at ((r + dr) mod rows, (c + dc) mod cols).
inline Eigen::MatrixXd gather_local_features(const Eigen::VectorXd& full, const EstimatorLayout& lay) {
  if (full.size() != lay.full_size()) throw ShapeError("gather_local_features: vector does not match layout");
  Eigen::MatrixXd out(lay.paths * lay.window(), lay.locations());
  const long gr = lay.grid_rows, gc = lay.grid_cols, rad = lay.radius, loc = lay.locations();
  for (long r = 0; r < gr; ++r)
    for (long c = 0; c < gc; ++c) {
      const long l = r * gc + c;
      long row = 0;
      for (long dr = -rad; dr <= rad; ++dr)
        for (long dc = -rad; dc <= rad; ++dc) {
          const long rr = ((r + dr) % gr + gr) % gr, cc = ((c + dc) % gc + gc) % gc;
          const long src = rr * gc + cc;
          for (long p = 0; p < lay.paths; ++p) out(row++, l) = full(p * loc + src);
        }
    }
  return out;
}

/// Per-location targets: column l holds all paths at location l.
inline Eigen::MatrixXd gather_local_targets(const Eigen::VectorXd& full, const EstimatorLayout& lay) {
  if (full.size() != lay.full_size()) throw ShapeError("gather_local_targets: vector does not match layout");
  return Eigen::Map<const Eigen::MatrixXd>(full.data(), lay.locations(), lay.paths).transpose();
}

inline Eigen::VectorXd scatter_local_targets(const Eigen::MatrixXd& per_location, const EstimatorLayout& lay) {
  if (per_location.rows() != lay.paths || per_location.cols() != lay.locations())
    throw ShapeError("scatter_local_targets: matrix does not match layout");
  const Eigen::MatrixXd t = per_location.transpose();
  return Eigen::Map<const Eigen::VectorXd>(t.data(), t.size());
}

/// G Z + h. Z is always a full scattering-layout vector; shared estimators
/// are applied at every location.
inline Eigen::VectorXd apply_estimator(const LinearEstimator& est, const Eigen::VectorXd& z) {
  if (!est.layout.shared) {
    if (z.size() != est.G.cols())
      throw ShapeError("apply_estimator: input has " + std::to_string(z.size()) + " entries, estimator expects " +
                       std::to_string(est.G.cols()));
    return est.G * z + est.h;
  }
  const Eigen::MatrixXd features = gather_local_features(z, est.layout);
  if (features.rows() != est.G.cols()) throw ShapeError("apply_estimator: layout does not match G");
  Eigen::MatrixXd out = est.G * features;
  out.colwise() += est.h;
  return scatter_local_targets(out, est.layout);
}

/// Fits a shared (stationary) estimator from full-layout sample vectors.
inline LinearEstimator fit_shared_lmmse(const std::vector<Eigen::VectorXd>& xs, const std::vector<Eigen::VectorXd>& zs,
                                        const EstimatorLayout& layout, double ridge_relative, double ridge_floor) {
  if (xs.size() != zs.size() || xs.empty()) throw ShapeError("fit_shared_lmmse: sample counts differ");
  EstimatorLayout lay = layout;
  lay.shared = true;
  const long loc = lay.locations();
  const long n = loc * static_cast<long>(xs.size());
  Eigen::MatrixXd X(lay.output_dim(), n), Z(lay.input_dim(), n);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    X.middleCols(static_cast<long>(i) * loc, loc) = gather_local_targets(xs[i], lay);
    Z.middleCols(static_cast<long>(i) * loc, loc) = gather_local_features(zs[i], lay);
  }
  MomentModel mm = fit_moments(X, Z, 0.0);
  mm.ridge = relative_ridge(mm.k_zz, ridge_relative, ridge_floor);
  LinearEstimator est = fit_lmmse(mm);
  est.layout = lay;
  return est;
}

/// Fits a dense estimator from full-layout sample vectors.
inline LinearEstimator fit_dense_lmmse(const std::vector<Eigen::VectorXd>& xs, const std::vector<Eigen::VectorXd>& zs,
                                       const EstimatorLayout& layout, double ridge_relative, double ridge_floor) {
  MomentModel mm = fit_moments(xs, zs, 0.0);
  mm.ridge = relative_ridge(mm.k_zz, ridge_relative, ridge_floor);
  LinearEstimator est = fit_lmmse(mm);
  est.layout = layout;
  est.layout.shared = false;
  return est;
}

struct OrthogonalityResidual {
  double mean_gap = 0.0;  // ||mean(X^) - mean(X)||_inf
  double max_corr = 0.0;  // max_ij |mean((X^_i - mean X^_i)(E_j - mean E_j))|, E = X^ - X
};

/// Sample-level check of E[X^] = E[X] and E[X^_i (X^ - X)] = 0, using 1/n
/// averages. Samples are the columns of X and Z; the estimator must be dense.
inline OrthogonalityResidual orthogonality_residual(const LinearEstimator& est, const Eigen::MatrixXd& X,
                                                    const Eigen::MatrixXd& Z) {
  if (X.cols() != Z.cols()) throw ShapeError("orthogonality_residual: sample counts differ");
  if (Z.rows() != est.G.cols() || X.rows() != est.G.rows())
    throw ShapeError("orthogonality_residual: dimensions do not match the estimator");
  Eigen::MatrixXd xhat = est.G * Z;
  xhat.colwise() += est.h;
  const double n = static_cast<double>(X.cols());
  const Eigen::VectorXd mean_hat = xhat.rowwise().mean();
  const Eigen::VectorXd mean_x = X.rowwise().mean();
  const Eigen::MatrixXd err = xhat - X;
  const Eigen::MatrixXd hc = xhat.colwise() - mean_hat;
  const Eigen::MatrixXd ec = err.colwise() - err.rowwise().mean();
  OrthogonalityResidual out;
  out.mean_gap = (mean_hat - mean_x).cwiseAbs().maxCoeff();
  out.max_corr = (hc * ec.transpose() / n).cwiseAbs().maxCoeff();
  return out;
}

inline OrthogonalityResidual orthogonality_residual(const LinearEstimator& est,
                                                    const std::vector<Eigen::VectorXd>& xs,
                                                    const std::vector<Eigen::VectorXd>& zs) {
  if (xs.size() != zs.size() || xs.empty()) throw ShapeError("orthogonality_residual: sample counts differ");
  Eigen::MatrixXd X(xs.front().size(), static_cast<long>(xs.size()));
  Eigen::MatrixXd Z(zs.front().size(), static_cast<long>(zs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    X.col(static_cast<long>(i)) = xs[i];
    Z.col(static_cast<long>(i)) = zs[i];
  }
  return orthogonality_residual(est, X, Z);
}

}  // namespace scatinv

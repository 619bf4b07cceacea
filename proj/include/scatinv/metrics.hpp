#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "scatinv/error.hpp"
#include "scatinv/image.hpp"

namespace scatinv {

inline double mse(const Image& a, const Image& b) {
  require_same_shape(a, b, "mse");
  return (a - b).square().mean();
}

/// Pearson sample correlation.
inline double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw ShapeError("correlation: lengths differ");
  if (a.size() < 2) throw ArgumentError("correlation: need at least two samples");
  const Eigen::ArrayXd ac = a.array() - a.mean();
  const Eigen::ArrayXd bc = b.array() - b.mean();
  const double va = ac.square().sum(), vb = bc.square().sum();
  if (va == 0.0 || vb == 0.0) throw ArgumentError("correlation: zero variance");
  const double r = (ac * bc).sum() / std::sqrt(va * vb);
  return std::max(-1.0, std::min(1.0, r));
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  return correlation(Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<long>(a.size())),
                     Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<long>(b.size())));
}

struct KurtosisReport {
  double beta_hat = 0.0;
  long p = 0;
  long n = 0;
  double excess = 0.0;  // beta_hat - p (p + 2)
  double condition = 0.0;
  double ridge = 0.0;   // nonzero when the fallback was used
};

struct MardiaOptions {
  /// Covariances with a larger condition number count as singular.
  double max_condition = 1e12;
  /// On a singular covariance, add ridge_relative * trace / p to the diagonal
  /// instead of failing.
  bool ridge_fallback = false;
  double ridge_relative = 1e-9;
};

/// Mardia's multivariate kurtosis of the rows of `samples` (n x p):
/// the mean of [(x - mu)^T S^-1 (x - mu)]^2 with the 1/n sample covariance.
inline KurtosisReport mardia_excess(const Eigen::MatrixXd& samples, const MardiaOptions& opts = {}) {
  const long n = samples.rows(), p = samples.cols();
  if (p < 1) throw ArgumentError("mardia_excess: empty dimension");
  if (n <= p) throw ArgumentError("mardia_excess: need more samples (" + std::to_string(n) + ") than dimensions (" +
                                  std::to_string(p) + ")");
  const Eigen::RowVectorXd mu = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - mu;
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);

  KurtosisReport rep;
  rep.p = p;
  rep.n = n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("mardia_excess: eigendecomposition failed");
  Eigen::VectorXd lambda = eig.eigenvalues();
  const double lmax = lambda.maxCoeff(), lmin = lambda.minCoeff();
  rep.condition = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (!(lmax > 0.0)) throw NumericalError("mardia_excess: covariance is zero");
  if (!(rep.condition <= opts.max_condition)) {
    if (!opts.ridge_fallback)
      throw NumericalError("mardia_excess: singular covariance (condition " + std::to_string(rep.condition) + ")");
    rep.ridge = opts.ridge_relative * lambda.sum() / static_cast<double>(p);
    lambda = (lambda.array().max(0.0) + rep.ridge).matrix();
  }
  const Eigen::MatrixXd white = centered * eig.eigenvectors() * lambda.cwiseInverse().cwiseSqrt().asDiagonal();
  const Eigen::VectorXd d2 = white.rowwise().squaredNorm();
  rep.beta_hat = d2.squaredNorm() / static_cast<double>(n);
  rep.excess = rep.beta_hat - static_cast<double>(p * (p + 2));
  return rep;
}

inline KurtosisReport mardia_excess(const std::vector<Eigen::VectorXd>& samples, const MardiaOptions& opts = {}) {
  if (samples.empty()) throw ArgumentError("mardia_excess: no samples");
  Eigen::MatrixXd m(static_cast<long>(samples.size()), samples.front().size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != m.cols()) throw ShapeError("mardia_excess: sample length mismatch");
    m.row(static_cast<long>(i)) = samples[i].transpose();
  }
  return mardia_excess(m, opts);
}

/// Row-major vectorized patch x patch windows at the given stride, one per
/// row of the result. Windows must fit inside the image (no wrap).
inline Eigen::MatrixXd extract_patches(const Image& img, long patch = 8, long stride = 8) {
  if (patch < 1 || stride < 1) throw ArgumentError("extract_patches: patch and stride must be positive");
  if (img.rows() < patch || img.cols() < patch) throw ShapeError("extract_patches: image smaller than a patch");
  const long nr = (img.rows() - patch) / stride + 1, nc = (img.cols() - patch) / stride + 1;
  Eigen::MatrixXd out(nr * nc, patch * patch);
  for (long i = 0; i < nr; ++i)
    for (long j = 0; j < nc; ++j) {
      const long row = i * nc + j;
      for (long r = 0; r < patch; ++r)
        for (long c = 0; c < patch; ++c) out(row, r * patch + c) = img(i * stride + r, j * stride + c);
    }
  return out;
}

inline Eigen::MatrixXd extract_patches(const std::vector<Image>& imgs, long patch = 8, long stride = 8) {
  if (imgs.empty()) throw ArgumentError("extract_patches: no images");
  std::vector<Eigen::MatrixXd> parts;
  long rows = 0;
  for (const Image& img : imgs) {
    parts.push_back(extract_patches(img, patch, stride));
    rows += parts.back().rows();
  }
  Eigen::MatrixXd out(rows, patch * patch);
  long at = 0;
  for (const auto& m : parts) {
    out.middleRows(at, m.rows()) = m;
    at += m.rows();
  }
  return out;
}

struct PatchOptions {
  long patch = 8;
  long stride = 8;
  MardiaOptions mardia;
};

/// Mardia statistic of the vectorized patches of one image.
inline KurtosisReport image_excess_kurtosis(const Image& img, const PatchOptions& opts = {}) {
  return mardia_excess(extract_patches(img, opts.patch, opts.stride), opts.mardia);
}

/// Mardia statistic of the patches pooled over a set of images.
inline KurtosisReport image_excess_kurtosis(const std::vector<Image>& imgs, const PatchOptions& opts = {}) {
  return mardia_excess(extract_patches(imgs, opts.patch, opts.stride), opts.mardia);
}

/// Sample cokurtosis of standardized coordinates y = (x - mean) / std, with
/// 1/n moments.
///
/// Full tensor: values[((i p + j) p + k) p + l] = mean(y_i y_j y_k y_l).
/// With fixed_first_index the first index is averaged out:
/// values[(j p + k) p + l] = (1/p) sum_i K_ijkl = mean(ybar y_j y_k y_l),
/// with ybar the per-sample mean over coordinates.
struct CokurtosisTensor {
  long p = 0;
  bool fixed_first_index = false;
  std::vector<double> values;

  double at(long i, long j, long k, long l) const {
    return values[static_cast<std::size_t>(((i * p + j) * p + k) * p + l)];
  }
  double at(long j, long k, long l) const { return values[static_cast<std::size_t>((j * p + k) * p + l)]; }
};

inline Eigen::MatrixXd standardize(const Eigen::MatrixXd& samples) {
  if (samples.rows() < 2) throw ArgumentError("cokurtosis: need at least two samples");
  const Eigen::RowVectorXd mu = samples.colwise().mean();
  Eigen::MatrixXd y = samples.rowwise() - mu;
  for (long c = 0; c < y.cols(); ++c) {
    const double sd = std::sqrt(y.col(c).squaredNorm() / static_cast<double>(y.rows()));
    if (!(sd > 0.0)) throw ArgumentError("cokurtosis: coordinate " + std::to_string(c) + " has zero variance");
    y.col(c) /= sd;
  }
  return y;
}

/// Samples are the rows of `samples`.
inline CokurtosisTensor cokurtosis_tensor(const Eigen::MatrixXd& samples, bool fixed_first_index) {
  const Eigen::MatrixXd y = standardize(samples);
  const long n = y.rows(), p = y.cols();
  CokurtosisTensor out;
  out.p = p;
  out.fixed_first_index = fixed_first_index;
  const long lead = fixed_first_index ? 1 : p;
  out.values.assign(static_cast<std::size_t>(lead * p * p * p), 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (long s = 0; s < n; ++s) {
    const Eigen::RowVectorXd row = y.row(s);
    for (long i = 0; i < lead; ++i) {
      const double wi = fixed_first_index ? row.mean() : row(i);
      for (long j = 0; j < p; ++j) {
        const double wij = wi * row(j);
        for (long k = 0; k < p; ++k) {
          const double wijk = wij * row(k) * inv_n;
          double* dst = out.values.data() + ((i * p + j) * p + k) * p;
          for (long l = 0; l < p; ++l) dst[l] += wijk * row(l);
        }
      }
    }
  }
  return out;
}

/// p x p display panel: the cokurtosis with its first two indices averaged,
/// P_kl = mean(ybar^2 y_k y_l).
inline Image cokurtosis_panel(const Eigen::MatrixXd& samples) {
  const Eigen::MatrixXd y = standardize(samples);
  const Eigen::VectorXd ybar = y.rowwise().mean();
  const Eigen::MatrixXd w = y.array().colwise() * ybar.array();
  return Image(w.transpose() * w / static_cast<double>(y.rows()));
}

}  // namespace scatinv

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "scatinv/error.hpp"
#include "scatinv/fft.hpp"
#include "scatinv/image.hpp"

namespace scatinv {

struct MeasurementShape {
  long rows = 0;
  long cols = 0;
};

/// A linear measurement operator Gamma together with the machinery the
/// reconstruction needs: adjoint, projection onto the measurement set
/// A = {u : ||Gamma u - y|| <= eps} and a right inverse.
///
/// Measurements are 2-D grids: a low-resolution image for super-resolution, an
/// (angle x offset) grid for the Radon transform.
class ForwardOperator {
 public:
  virtual ~ForwardOperator() = default;

  virtual long image_rows() const = 0;
  virtual long image_cols() const = 0;
  virtual MeasurementShape measurement_shape() const = 0;

  virtual Image apply(const Image& x) const = 0;
  virtual Image adjoint(const Image& y) const = 0;

  /// One application of the projector onto A. Exact operators return a point
  /// of A; iterative ones move towards it with a bounded amount of work.
  virtual Image project_measurements(const Image& u, const Image& y, double eps) const = 0;

  /// Returns a point of A (up to the iteration cap of iterative operators).
  virtual Image enforce_measurements(const Image& u, const Image& y, double eps) const {
    return project_measurements(u, y, eps);
  }

  virtual Image right_inverse(const Image& y) const = 0;

  /// True when project_measurements lands in A in one call.
  virtual bool exact_projection() const = 0;

  virtual std::string name() const = 0;

  void check_image(const Image& x, const char* what) const {
    if (x.rows() != image_rows() || x.cols() != image_cols())
      throw ShapeError(std::string(what) + ": expected a " + std::to_string(image_rows()) + "x" +
                       std::to_string(image_cols()) + " image, got " + std::to_string(x.rows()) + "x" +
                       std::to_string(x.cols()));
  }
  void check_measurement(const Image& y, const char* what) const {
    const MeasurementShape s = measurement_shape();
    if (y.rows() != s.rows || y.cols() != s.cols)
      throw ShapeError(std::string(what) + ": expected a " + std::to_string(s.rows) + "x" +
                       std::to_string(s.cols) + " measurement, got " + std::to_string(y.rows()) + "x" +
                       std::to_string(y.cols()));
  }
};

/// ||Gamma u - y||_2.
inline double measurement_distance(const ForwardOperator& op, const Image& u, const Image& y) {
  op.check_image(u, "measurement_distance");
  op.check_measurement(y, "measurement_distance");
  return norm(op.apply(u) - y);
}

// ---------------------------------------------------------------------------
// Super-resolution: Gamma = S o H_LP.

enum class LowpassKind { ideal, gaussian };

struct SrKernel {
  LowpassKind kind = LowpassKind::ideal;
  /// Spatial std in high-resolution pixels (gaussian only).
  double sigma = 1.0;

  static SrKernel ideal() { return {}; }
  static SrKernel gaussian(double s) { return {LowpassKind::gaussian, s}; }
};

/// Decimation by an integer factor per axis after a lowpass H. The ideal
/// kernel keeps the low-resolution band and gives half weight to its Nyquist
/// lines so H stays real and symmetric. The measurement projector is the
/// orthogonal one, u - Gamma^T (Gamma Gamma^T)^-1 (Gamma u - y); Gamma Gamma^T
/// is diagonal in the low-resolution Fourier basis for either kernel.
class SuperResolution final : public ForwardOperator {
 public:
  SuperResolution(long rows, long cols, int factor, SrKernel kernel = {})
      : rows_(rows), cols_(cols), factor_(factor), kernel_(kernel) {
    if (factor < 1) throw ArgumentError("super-resolution factor must be >= 1");
    if (rows % factor != 0 || cols % factor != 0)
      throw ArgumentError("super-resolution factor " + std::to_string(factor) + " does not divide " +
                          std::to_string(rows) + "x" + std::to_string(cols));
    if (kernel.kind == LowpassKind::gaussian && !(kernel.sigma > 0.0))
      throw ArgumentError("gaussian kernel needs sigma > 0");
    transfer_ = make_transfer();
    gram_ = fft::periodize(ComplexImage(transfer_.square().cast<std::complex<double>>()), factor).real() /
            static_cast<double>(factor * factor);
    if (gram_.minCoeff() <= 0.0) throw NumericalError("super-resolution operator is rank deficient");
  }

  long image_rows() const override { return rows_; }
  long image_cols() const override { return cols_; }
  MeasurementShape measurement_shape() const override { return {rows_ / factor_, cols_ / factor_}; }
  int factor() const { return factor_; }
  const SrKernel& kernel() const { return kernel_; }
  const Image& transfer() const { return transfer_; }
  bool exact_projection() const override { return true; }
  std::string name() const override { return "super_resolution"; }

  Image apply(const Image& x) const override {
    check_image(x, "sr_apply");
    return fft::inverse_real(fft::periodize(fft::forward(x), transfer_, factor_)) /
           static_cast<double>(factor_ * factor_);
  }

  Image adjoint(const Image& y) const override {
    check_measurement(y, "sr_adjoint");
    return fft::inverse_real(fft::multiply(fft::tile(fft::forward(y), factor_), transfer_));
  }

  /// Lowpass filtering only (no decimation).
  Image lowpass(const Image& x) const { return fft::filter_real(x, transfer_); }

  Image project_measurements(const Image& u, const Image& y, double eps) const override {
    check_image(u, "sr_project_measurements");
    check_measurement(y, "sr_project_measurements");
    const Image residual = apply(u) - y;
    const double r = norm(residual);
    if (r <= eps) return u;
    const double t = eps > 0.0 ? 1.0 - eps / r : 1.0;
    const Image correction = adjoint(fft::inverse_real(fft::multiply(fft::forward(residual), 1.0 / gram_)));
    return u - t * correction;
  }

  Image right_inverse(const Image& y) const override {
    check_measurement(y, "sr_right_inverse");
    return adjoint(fft::inverse_real(fft::multiply(fft::forward(y), 1.0 / gram_)));
  }

 private:
  Image make_transfer() const {
    Image t(rows_, cols_);
    const long mr = rows_ / factor_, mc = cols_ / factor_;
    auto ideal_weight = [&](long i, long n, long m) {
      if (factor_ == 1) return 1.0;
      const long k = std::abs(signed_frequency_index(i, n));
      if (2 * k < m) return 1.0;
      if (2 * k == m) return 0.5;
      return 0.0;
    };
    for (long r = 0; r < rows_; ++r) {
      const double wy = 2.0 * kPi * signed_frequency_index(r, rows_) / rows_;
      for (long c = 0; c < cols_; ++c) {
        const double wx = 2.0 * kPi * signed_frequency_index(c, cols_) / cols_;
        if (kernel_.kind == LowpassKind::ideal)
          t(r, c) = ideal_weight(r, rows_, mr) * ideal_weight(c, cols_, mc);
        else
          t(r, c) = std::exp(-0.5 * kernel_.sigma * kernel_.sigma * (wx * wx + wy * wy));
      }
    }
    return t;
  }

  long rows_, cols_;
  int factor_;
  SrKernel kernel_;
  Image transfer_;
  Image gram_;
};

inline Image sr_apply(const Image& x, int factor, SrKernel kernel = {}) {
  return SuperResolution(x.rows(), x.cols(), factor, kernel).apply(x);
}

inline Image sr_project_measurements(const Image& z, const Image& y, int factor, SrKernel kernel = {},
                                     double eps = 0.0) {
  return SuperResolution(z.rows(), z.cols(), factor, kernel).project_measurements(z, y, eps);
}

// ---------------------------------------------------------------------------
// Parallel-beam Radon transform.

/// Radon data: one row per angle, one column per detector offset.
struct Sinogram {
  std::vector<double> angles;   // degrees, strictly increasing in [0, 180)
  std::vector<double> offsets;  // detector positions in pixels from the image center
  Image values;
};

inline void validate_angles(const std::vector<double>& angles) {
  if (angles.empty()) throw ArgumentError("radon: empty angle list");
  for (std::size_t i = 0; i < angles.size(); ++i) {
    if (!(angles[i] >= 0.0 && angles[i] < 180.0))
      throw ArgumentError("radon: angle " + std::to_string(angles[i]) + " outside [0, 180)");
    if (i > 0 && !(angles[i] > angles[i - 1])) throw ArgumentError("radon: angles must be strictly increasing");
  }
}

/// Angles start, start + step, ... up to and including stop (degrees).
inline std::vector<double> angle_range(double start, double stop, double step) {
  if (!(step > 0.0)) throw ArgumentError("angle_range: step must be positive");
  std::vector<double> out;
  for (long i = 0;; ++i) {
    const double a = start + static_cast<double>(i) * step;
    if (a > stop + 1e-9) break;
    out.push_back(a);
  }
  return out;
}

struct RadonOptions {
  /// Box for the right inverse and the measurement projection.
  double box_lo = 0.0;
  double box_hi = 1.0;
  /// Projected-gradient steps per call to project_measurements.
  int projection_steps = 10;
  /// Iteration cap of enforce_measurements and right_inverse.
  int max_steps = 2000;
};

struct BoxLeastSquaresResult {
  Image solution;
  double residual = 0.0;  // ||Gamma z - y||
  int iterations = 0;
  std::vector<double> objective;  // 0.5 ||Gamma z - y||^2 per iteration
};

/// Discrete line integrals x(t n + s d) ds with n = (cos a, sin a),
/// d = (-sin a, cos a), sampled at unit steps in s and bilinear interpolation.
/// Pixel (r, c) sits at (c - (N-1)/2, r - (N-1)/2). The operator is stored as
/// a sparse matrix, so the adjoint is its exact transpose.
class Radon final : public ForwardOperator {
 public:
  using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  Radon(long size, std::vector<double> angles_deg, RadonOptions opts = {})
      : size_(size), angles_(std::move(angles_deg)), opts_(opts) {
    if (size < 2) throw ArgumentError("radon: image size must be >= 2");
    validate_angles(angles_);
    if (!(opts_.box_lo < opts_.box_hi)) throw ArgumentError("radon: empty box");
    const double center = 0.5 * static_cast<double>(size - 1);
    const long reach = static_cast<long>(std::ceil(center * std::sqrt(2.0))) + 1;
    for (long m = -reach; m <= reach; ++m) offsets_.push_back(static_cast<double>(m));
    build(center, reach);
    lipschitz_ = estimate_lipschitz();
  }

  long image_rows() const override { return size_; }
  long image_cols() const override { return size_; }
  MeasurementShape measurement_shape() const override {
    return {static_cast<long>(angles_.size()), static_cast<long>(offsets_.size())};
  }
  const std::vector<double>& angles() const { return angles_; }
  const std::vector<double>& offsets() const { return offsets_; }
  const RadonOptions& options() const { return opts_; }
  const SparseMatrix& matrix() const { return matrix_; }
  /// Upper bound on ||Gamma||^2.
  double lipschitz() const { return lipschitz_; }
  bool exact_projection() const override { return false; }
  std::string name() const override { return "radon"; }

  Image apply(const Image& x) const override {
    check_image(x, "radon_apply");
    const Eigen::VectorXd v = matrix_ * flatten(x);
    const MeasurementShape s = measurement_shape();
    return unflatten(v, s.rows, s.cols);
  }

  Image adjoint(const Image& y) const override {
    check_measurement(y, "radon_adjoint");
    const Eigen::VectorXd v = transpose_ * flatten(y);
    return unflatten(v, size_, size_);
  }

  Sinogram sinogram(const Image& x) const { return {angles_, offsets_, apply(x)}; }

  /// Box-constrained least squares started at u0, stopped once the residual
  /// drops to `target` or after `steps` iterations. Monotone accelerated
  /// projected gradient (a non-increasing objective is enforced by keeping
  /// the previous iterate whenever the new one is worse).
  BoxLeastSquaresResult box_least_squares(const Image& u0, const Image& y, int steps, double target = 0.0) const {
    check_image(u0, "radon_right_inverse");
    check_measurement(y, "radon_right_inverse");
    const Eigen::VectorXd yv = flatten(y);
    const double step = 1.0 / lipschitz_;
    auto clamp = [&](const Eigen::VectorXd& v) {
      return Eigen::VectorXd(v.cwiseMax(opts_.box_lo).cwiseMin(opts_.box_hi));
    };
    Eigen::VectorXd x = clamp(flatten(u0));
    Eigen::VectorXd rx = matrix_ * x - yv;
    double fx = 0.5 * rx.squaredNorm();
    Eigen::VectorXd v = x;
    Eigen::VectorXd rv = rx;
    double t = 1.0;
    BoxLeastSquaresResult out;
    out.objective.push_back(fx);
    int it = 0;
    for (; it < steps && std::sqrt(2.0 * fx) > target; ++it) {
      const Eigen::VectorXd z = clamp(v - step * (transpose_ * rv));
      const Eigen::VectorXd rz = matrix_ * z - yv;
      const double fz = 0.5 * rz.squaredNorm();
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const Eigen::VectorXd x_prev = x;
      const Eigen::VectorXd rx_prev = rx;
      if (fz <= fx) {
        x = z;
        rx = rz;
        fx = fz;
      }
      v = x + (t / tn) * (z - x) + ((t - 1.0) / tn) * (x - x_prev);
      rv = rx + (t / tn) * (rz - rx) + ((t - 1.0) / tn) * (rx - rx_prev);
      t = tn;
      out.objective.push_back(fx);
    }
    out.solution = unflatten(x, size_, size_);
    out.residual = std::sqrt(2.0 * fx);
    out.iterations = it;
    return out;
  }

  Image project_measurements(const Image& u, const Image& y, double eps) const override {
    return box_least_squares(u, y, opts_.projection_steps, eps).solution;
  }

  Image enforce_measurements(const Image& u, const Image& y, double eps) const override {
    return box_least_squares(u, y, opts_.max_steps, eps).solution;
  }

  Image right_inverse(const Image& y) const override {
    return box_least_squares(Image::Zero(size_, size_), y, opts_.max_steps).solution;
  }

 private:
  void build(double center, long reach) {
    std::vector<Eigen::Triplet<double>> triplets;
    const long n_off = static_cast<long>(offsets_.size());
    for (std::size_t a = 0; a < angles_.size(); ++a) {
      const double theta = angles_[a] * kPi / 180.0;
      const double ct = std::cos(theta), st = std::sin(theta);
      for (long m = 0; m < n_off; ++m) {
        const long row = static_cast<long>(a) * n_off + m;
        const double t = offsets_[static_cast<std::size_t>(m)];
        for (long si = -reach; si <= reach; ++si) {
          const double s = static_cast<double>(si);
          const double px = t * ct - s * st + center;
          const double py = t * st + s * ct + center;
          const double fx = std::floor(px), fy = std::floor(py);
          const long c0 = static_cast<long>(fx), r0 = static_cast<long>(fy);
          const double wx = px - fx, wy = py - fy;
          const double w[4] = {(1 - wy) * (1 - wx), (1 - wy) * wx, wy * (1 - wx), wy * wx};
          const long rr[4] = {r0, r0, r0 + 1, r0 + 1};
          const long cc[4] = {c0, c0 + 1, c0, c0 + 1};
          for (int q = 0; q < 4; ++q) {
            if (w[q] == 0.0 || rr[q] < 0 || rr[q] >= size_ || cc[q] < 0 || cc[q] >= size_) continue;
            triplets.emplace_back(row, rr[q] * size_ + cc[q], w[q]);
          }
        }
      }
    }
    matrix_.resize(static_cast<long>(angles_.size()) * n_off, size_ * size_);
    matrix_.setFromTriplets(triplets.begin(), triplets.end());
    matrix_.makeCompressed();
    transpose_ = matrix_.transpose();
    transpose_.makeCompressed();
  }

  double estimate_lipschitz() const {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(size_ * size_) / static_cast<double>(size_);
    double lambda = 0.0;
    for (int i = 0; i < 100; ++i) {
      Eigen::VectorXd w = transpose_ * (matrix_ * v);
      lambda = w.norm();
      if (lambda == 0.0) throw NumericalError("radon: operator is zero");
      v = w / lambda;
    }
    return 1.02 * lambda;
  }

  long size_;
  std::vector<double> angles_;
  std::vector<double> offsets_;
  RadonOptions opts_;
  SparseMatrix matrix_;
  SparseMatrix transpose_;
  double lipschitz_ = 1.0;
};

inline Sinogram radon_apply(const Image& x, const std::vector<double>& angles) {
  if (x.rows() != x.cols()) throw ShapeError("radon_apply: image must be square");
  return Radon(x.rows(), angles).sinogram(x);
}

inline Image radon_adjoint(const Sinogram& s, long size) {
  return Radon(size, s.angles).adjoint(s.values);
}

inline BoxLeastSquaresResult radon_right_inverse(const Sinogram& y, long size, int iters, double box_lo = 0.0,
                                                 double box_hi = 1.0) {
  RadonOptions opts;
  opts.box_lo = box_lo;
  opts.box_hi = box_hi;
  const Radon op(size, y.angles, opts);
  return op.box_least_squares(Image::Zero(size, size), y.values, iters);
}

}  // namespace scatinv

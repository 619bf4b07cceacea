#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scatinv/error.hpp"
#include "scatinv/fft.hpp"
#include "scatinv/filterbank.hpp"
#include "scatinv/image.hpp"

namespace scatinv {

/// One scattering path. Order 0 has no indices, order 1 uses (j1, k1), order 2
/// uses all four with j2 > j1.
struct PathDescriptor {
  int order = 0;
  int j1 = 0, k1 = 0;
  int j2 = 0, k2 = 0;

  friend bool operator==(const PathDescriptor&, const PathDescriptor&) = default;
};

/// Canonical path ordering: by order, then (j1, k1, j2, k2) lexicographically.
inline std::vector<PathDescriptor> path_index(const FilterBank& fb, int max_order) {
  if (max_order < 0 || max_order > 2) throw ArgumentError("path_index: max_order must be 0, 1 or 2");
  std::vector<PathDescriptor> paths{{0, 0, 0, 0, 0}};
  if (max_order >= 1)
    for (int j = 1; j <= fb.J; ++j)
      for (int k = 1; k <= fb.K; ++k) paths.push_back({1, j, k, 0, 0});
  if (max_order >= 2)
    for (int j = 1; j <= fb.J; ++j)
      for (int k = 1; k <= fb.K; ++k)
        for (int j2 = j + 1; j2 <= fb.J; ++j2)
          for (int k2 = 1; k2 <= fb.K; ++k2) paths.push_back({2, j, k, j2, k2});
  return paths;
}

/// Scattering coefficients laid out path-major: each path owns a contiguous
/// (rows / 2^J) x (cols / 2^J) row-major block.
struct ScatteringVector {
  Eigen::VectorXd values;
  std::vector<PathDescriptor> paths;
  long source_rows = 0;
  long source_cols = 0;
  int J = 0;
  int K = 0;
  int max_order = 0;
  long stride = 1;

  long grid_rows() const { return source_rows / stride; }
  long grid_cols() const { return source_cols / stride; }
  long block_size() const { return grid_rows() * grid_cols(); }
  long path_count() const { return static_cast<long>(paths.size()); }

  auto block(long p) { return values.segment(p * block_size(), block_size()); }
  auto block(long p) const { return values.segment(p * block_size(), block_size()); }

  Image block_image(long p) const {
    return Eigen::Map<const Image>(values.data() + p * block_size(), grid_rows(), grid_cols());
  }
};

struct ScatteringOptions {
  int max_order = 2;
  /// Modulus smoothing relative to the input's RMS amplitude: the modulus is
  /// evaluated as sqrt(|z|^2 + mu^2) with mu = modulus_smoothing * rms(x).
  /// Tying mu to the amplitude keeps Phi positively homogeneous.
  double modulus_smoothing = 1e-12;
};

inline double smoothing_for(const Image& x, double relative) {
  const double rms = x.size() > 0 ? std::sqrt(x.square().mean()) : 0.0;
  return rms > 0.0 ? relative * rms : relative;
}

namespace detail {

/// Lowpass with phi_J followed by sampling every 2^J pixels, from a spectrum.
inline Image lowpass_subsample(const ComplexImage& spectrum, const Image& phi_hat, long stride) {
  return fft::inverse_real(fft::periodize(spectrum, phi_hat, stride)) / static_cast<double>(stride * stride);
}

/// Spectrum of the adjoint of lowpass_subsample applied to a coarse grid.
inline ComplexImage lowpass_subsample_adjoint(const Image& coarse, const Image& phi_hat, long stride) {
  return fft::multiply(fft::tile(fft::forward(coarse), stride), phi_hat);
}

inline Image smoothed_modulus(const ComplexImage& w, double mu) {
  Image out(w.rows(), w.cols());
  const double mu2 = mu * mu;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double re = w.data()[i].real(), im = w.data()[i].imag();
    out.data()[i] = std::sqrt(re * re + im * im + mu2);
  }
  return out;
}

/// w * (scale / modulus), elementwise; the chain rule through |w|_mu.
inline ComplexImage modulus_backward(const ComplexImage& w, const Image& scale, const Image& modulus) {
  ComplexImage out(w.rows(), w.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) out.data()[i] = w.data()[i] * (scale.data()[i] / modulus.data()[i]);
  return out;
}

}  // namespace detail

/// Forward pass of Phi that keeps the intermediates needed by the
/// vector-Jacobian product.
class ScatteringTape {
 public:
  ScatteringTape(const Image& x, const FilterBank& fb, const ScatteringOptions& opts = {})
      : fb_(&fb), mu_(smoothing_for(x, opts.modulus_smoothing)) {
    if (x.rows() != fb.height || x.cols() != fb.width)
      throw ShapeError("scatter: image is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                       " but the filter bank is " + std::to_string(fb.height) + "x" + std::to_string(fb.width));
    const long stride = fb.stride();
    out_.paths = path_index(fb, opts.max_order);
    out_.source_rows = x.rows();
    out_.source_cols = x.cols();
    out_.J = fb.J;
    out_.K = fb.K;
    out_.max_order = opts.max_order;
    out_.stride = stride;
    out_.values.resize(out_.path_count() * out_.block_size());

    const ComplexImage xhat = fft::forward(x);
    long p = 0;
    out_.block(p++) = flatten(detail::lowpass_subsample(xhat, fb.phi_hat, stride));
    if (opts.max_order == 0) return;

    const std::size_t channels = fb.psi_hat.size();
    first_.resize(channels);
    first_mod_.resize(channels);
    first_mod_hat_.resize(channels);
    for (std::size_t a = 0; a < channels; ++a) {
      first_[a] = fft::inverse(fft::multiply(xhat, fb.psi_hat[a]));
      first_mod_[a] = detail::smoothed_modulus(first_[a], mu_);
      first_mod_hat_[a] = fft::forward(first_mod_[a]);
      out_.block(p++) = flatten(detail::lowpass_subsample(first_mod_hat_[a], fb.phi_hat, stride));
    }
    if (opts.max_order == 1) return;

    for (; p < out_.path_count(); ++p) {
      const PathDescriptor& path = out_.paths[static_cast<std::size_t>(p)];
      const std::size_t a = channel(path.j1, path.k1), b = channel(path.j2, path.k2);
      ComplexImage w = fft::inverse(fft::multiply(first_mod_hat_[a], fb.psi_hat[b]));
      Image u = detail::smoothed_modulus(w, mu_);
      out_.block(p) = flatten(detail::lowpass_subsample(fft::forward(u), fb.phi_hat, stride));
      second_.push_back(std::move(w));
      second_mod_.push_back(std::move(u));
    }
  }

  const ScatteringVector& value() const { return out_; }
  double modulus_smoothing() const { return mu_; }

  /// Gradient of <Phi x, cotangent> with respect to x.
  Image vjp(const Eigen::VectorXd& cotangent) const {
    if (cotangent.size() != out_.values.size())
      throw ShapeError("scatter_vjp: cotangent has " + std::to_string(cotangent.size()) +
                       " entries, layout expects " + std::to_string(out_.values.size()));
    const FilterBank& fb = *fb_;
    const long stride = out_.stride;
    const long gr = out_.grid_rows(), gc = out_.grid_cols();
    auto coarse = [&](long p) {
      return Image(Eigen::Map<const Image>(cotangent.data() + p * out_.block_size(), gr, gc));
    };

    ComplexImage xbar_hat = detail::lowpass_subsample_adjoint(coarse(0), fb.phi_hat, stride);
    if (out_.max_order == 0) return fft::inverse_real(xbar_hat);

    const std::size_t channels = fb.psi_hat.size();
    std::vector<ComplexImage> ubar_hat(channels);
    for (std::size_t a = 0; a < channels; ++a) {
      const long p = 1 + static_cast<long>(a);
      ubar_hat[a] = detail::lowpass_subsample_adjoint(coarse(p), fb.phi_hat, stride);
    }
    if (out_.max_order == 2) {
      const long first_second = 1 + static_cast<long>(channels);
      for (long p = first_second; p < out_.path_count(); ++p) {
        const auto block = cotangent.segment(p * out_.block_size(), out_.block_size());
        if (block.isZero(0.0)) continue;
        const PathDescriptor& path = out_.paths[static_cast<std::size_t>(p)];
        const std::size_t a = channel(path.j1, path.k1), b = channel(path.j2, path.k2);
        const std::size_t q = static_cast<std::size_t>(p - first_second);
        const Image ubar2 = fft::inverse_real(detail::lowpass_subsample_adjoint(coarse(p), fb.phi_hat, stride));
        fft::multiply_add(ubar_hat[a], fft::forward(detail::modulus_backward(second_[q], ubar2, second_mod_[q])),
                          fb.psi_hat[b]);
      }
    }
    for (std::size_t a = 0; a < channels; ++a) {
      const Image ubar = fft::inverse_real(ubar_hat[a]);
      fft::multiply_add(xbar_hat, fft::forward(detail::modulus_backward(first_[a], ubar, first_mod_[a])),
                        fb.psi_hat[a]);
    }
    return fft::inverse_real(xbar_hat);
  }

 private:
  std::size_t channel(int j, int k) const { return static_cast<std::size_t>((j - 1) * fb_->K + (k - 1)); }

  const FilterBank* fb_;
  double mu_;
  ScatteringVector out_;
  std::vector<ComplexImage> first_;
  std::vector<Image> first_mod_;
  std::vector<ComplexImage> first_mod_hat_;
  std::vector<ComplexImage> second_;
  std::vector<Image> second_mod_;
};

/// Phi x up to the requested order.
inline ScatteringVector scatter(const Image& x, const FilterBank& fb, int max_order = 2) {
  ScatteringOptions opts;
  opts.max_order = max_order;
  return ScatteringTape(x, fb, opts).value();
}

inline ScatteringVector scatter(const Image& x, const FilterBank& fb, const ScatteringOptions& opts) {
  return ScatteringTape(x, fb, opts).value();
}

/// Gradient of <Phi x, cotangent>. The cotangent layout must match scatter(x).
inline Image scatter_vjp(const Image& x, const FilterBank& fb, const Eigen::VectorXd& cotangent,
                         const ScatteringOptions& opts = {}) {
  return ScatteringTape(x, fb, opts).vjp(cotangent);
}

}  // namespace scatinv

#pragma once

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "scatinv/image.hpp"

// Thin wrapper over FFTW's 2-D complex transforms. Plans are created once per
// (rows, cols, direction) with FFTW_ESTIMATE so that results do not depend on
// planner timing and are bit-reproducible between runs.
namespace scatinv::fft {

namespace detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

  fftw_plan get(int rows, int cols, int sign) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(rows, cols, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    fftw_complex* in = fftw_alloc_complex(n);
    fftw_complex* out = fftw_alloc_complex(n);
    fftw_plan plan = fftw_plan_dft_2d(rows, cols, in, out, sign, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

inline void execute(const ComplexImage& in, ComplexImage& out, int sign) {
  out.resize(in.rows(), in.cols());
  fftw_plan plan =
      PlanCache::instance().get(static_cast<int>(in.rows()), static_cast<int>(in.cols()), sign);
  // Out-of-place complex transforms leave the input untouched.
  auto* src = reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in.data()));
  auto* dst = reinterpret_cast<fftw_complex*>(out.data());
  // Plans were made on SIMD-aligned buffers; misaligned arrays go through a copy.
  if (fftw_alignment_of(reinterpret_cast<double*>(src)) == 0 &&
      fftw_alignment_of(reinterpret_cast<double*>(dst)) == 0) {
    fftw_execute_dft(plan, src, dst);
    return;
  }
  const std::size_t n = static_cast<std::size_t>(in.size());
  fftw_complex* a = fftw_alloc_complex(n);
  fftw_complex* b = fftw_alloc_complex(n);
  std::copy_n(in.data(), n, reinterpret_cast<std::complex<double>*>(a));
  fftw_execute_dft(plan, a, b);
  std::copy_n(reinterpret_cast<std::complex<double>*>(b), n, out.data());
  fftw_free(a);
  fftw_free(b);
}

}  // namespace detail

/// Unnormalized forward DFT.
inline ComplexImage forward(const ComplexImage& in) {
  ComplexImage out;
  detail::execute(in, out, FFTW_FORWARD);
  return out;
}

inline ComplexImage forward(const Image& in) {
  ComplexImage tmp(in.rows(), in.cols());
  for (Eigen::Index i = 0; i < in.size(); ++i) tmp.data()[i] = {in.data()[i], 0.0};
  return forward(tmp);
}

/// Inverse DFT including the 1/(rows*cols) factor.
inline ComplexImage inverse(const ComplexImage& in) {
  ComplexImage out;
  detail::execute(in, out, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(in.size());
  auto* o = reinterpret_cast<double*>(out.data());
  for (Eigen::Index i = 0; i < 2 * out.size(); ++i) o[i] *= scale;
  return out;
}

inline Image inverse_real(const ComplexImage& in) {
  ComplexImage full;
  detail::execute(in, full, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(in.size());
  Image out(in.rows(), in.cols());
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = full.data()[i].real() * scale;
  return out;
}

/// Pointwise product of a spectrum with a real transfer function.
inline ComplexImage multiply(const ComplexImage& spec, const Image& transfer) {
  ComplexImage out(spec.rows(), spec.cols());
  const auto* in = reinterpret_cast<const double*>(spec.data());
  auto* o = reinterpret_cast<double*>(out.data());
  const double* t = transfer.data();
  for (Eigen::Index i = 0; i < spec.size(); ++i) {
    o[2 * i] = in[2 * i] * t[i];
    o[2 * i + 1] = in[2 * i + 1] * t[i];
  }
  return out;
}

/// out += spec * transfer, for a real transfer function.
inline void multiply_add(ComplexImage& out, const ComplexImage& spec, const Image& transfer) {
  const auto* in = reinterpret_cast<const double*>(spec.data());
  auto* o = reinterpret_cast<double*>(out.data());
  const double* t = transfer.data();
  for (Eigen::Index i = 0; i < spec.size(); ++i) {
    o[2 * i] += in[2 * i] * t[i];
    o[2 * i + 1] += in[2 * i + 1] * t[i];
  }
}

/// Real circular convolution of `img` with the filter whose DFT is `transfer`.
inline Image filter_real(const Image& img, const Image& transfer) {
  return inverse_real(multiply(forward(img), transfer));
}

/// Folds an (R x C) spectrum onto an (R/s x C/s) grid by summing aliases.
/// Sampling every s-th pixel in space equals inverse_small(periodize(X)) / s^2.
inline ComplexImage periodize(const ComplexImage& spec, long stride) {
  const long rows = spec.rows() / stride, cols = spec.cols() / stride;
  ComplexImage out = ComplexImage::Zero(rows, cols);
  for (long r = 0; r < spec.rows(); ++r) {
    std::complex<double>* dst = out.data() + (r % rows) * cols;
    const std::complex<double>* src = spec.data() + r * spec.cols();
    for (long c = 0; c < spec.cols(); ++c) dst[c % cols] += src[c];
  }
  return out;
}

/// periodize(spec * transfer) without the full-size temporary.
inline ComplexImage periodize(const ComplexImage& spec, const Image& transfer, long stride) {
  const long rows = spec.rows() / stride, cols = spec.cols() / stride;
  ComplexImage out = ComplexImage::Zero(rows, cols);
  for (long r = 0; r < spec.rows(); ++r) {
    std::complex<double>* dst = out.data() + (r % rows) * cols;
    const std::complex<double>* src = spec.data() + r * spec.cols();
    const double* t = transfer.data() + r * spec.cols();
    for (long c = 0; c < spec.cols(); ++c) dst[c % cols] += src[c] * t[c];
  }
  return out;
}

/// Adjoint companion of periodize: tiles a small spectrum stride x stride times.
/// This is the DFT of zero-filled upsampling.
inline ComplexImage tile(const ComplexImage& small, long stride) {
  const long rows = small.rows(), cols = small.cols();
  ComplexImage out(rows * stride, cols * stride);
  for (long r = 0; r < out.rows(); ++r)
    for (long c = 0; c < out.cols(); ++c) out(r, c) = small(r % rows, c % cols);
  return out;
}

}  // namespace scatinv::fft

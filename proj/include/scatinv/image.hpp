#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scatinv/error.hpp"

namespace scatinv {

/// Real 2-D grid, row-major. Rows index y, columns index x.
using Image = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexImage =
    Eigen::Array<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kPi = 3.14159265358979323846;

constexpr bool is_power_of_two(long n) { return n > 0 && (n & (n - 1)) == 0; }

constexpr int log2_exact(long n) {
  int k = 0;
  while ((1L << k) < n) ++k;
  return k;
}

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
}

inline double dot(const Image& a, const Image& b) {
  require_same_shape(a, b, "dot");
  return (a * b).sum();
}

inline double norm(const Image& a) { return std::sqrt(a.square().sum()); }

/// Circular shift: out(r, c) = in(r - dr, c - dc) with wrap-around.
inline Image circular_shift(const Image& in, long dr, long dc) {
  const long rows = in.rows(), cols = in.cols();
  Image out(rows, cols);
  for (long r = 0; r < rows; ++r) {
    const long sr = ((r - dr) % rows + rows) % rows;
    for (long c = 0; c < cols; ++c) {
      const long sc = ((c - dc) % cols + cols) % cols;
      out(r, c) = in(sr, sc);
    }
  }
  return out;
}

/// Signed DFT index of position i on an n-point grid, in [-n/2, n/2).
constexpr long signed_frequency_index(long i, long n) { return i < n / 2 ? i : i - n; }

/// Flattens an image into a vector (row-major order).
inline Eigen::VectorXd flatten(const Image& img) {
  return Eigen::Map<const Eigen::VectorXd>(img.data(), img.size());
}

inline Image unflatten(const Eigen::VectorXd& v, long rows, long cols) {
  if (v.size() != rows * cols) throw ShapeError("unflatten: size mismatch");
  return Eigen::Map<const Image>(v.data(), rows, cols);
}

}  // namespace scatinv

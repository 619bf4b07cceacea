#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "scatinv/error.hpp"
#include "scatinv/image.hpp"

namespace scatinv {

/// Shape of the oriented Morlet-type mother wavelet, all in the frequency domain.
struct WaveletShape {
  /// Center frequency of the finest band (scale j = 1), radians per sample.
  double carrier = 3.0 * kPi / 4.0;
  /// Radial envelope std divided by the band's center frequency.
  double bandwidth = 0.3;
  /// Tangential envelope std divided by the radial one.
  double slant = 1.6;
  /// Lowpass std divided by the coarsest band's center frequency.
  double lowpass_width = 0.55;
  /// Rescale the band-pass filters pointwise so the Littlewood-Paley sum is
  /// exactly one. Without it the raw Morlet sum is only bounded above by one.
  bool tight = true;
};

/// Frequency-domain filter bank. Filters are stored on the unshifted DFT grid
/// (index 0 is DC). Morlet filters are real in frequency, so only the real
/// part is kept; the spatial wavelets are complex.
struct FilterBank {
  long width = 0;
  long height = 0;
  int J = 0;
  int K = 0;
  WaveletShape shape;
  std::vector<Image> psi_hat;  // index (j - 1) * K + (k - 1)
  Image phi_hat;
  double epsilon_lp = 0.0;

  const Image& psi(int j, int k) const { return psi_hat[static_cast<std::size_t>((j - 1) * K + (k - 1))]; }
  long stride() const { return 1L << J; }
  double orientation(int k) const { return (k - 1) * kPi / K; }
  double center_frequency(int j) const { return shape.carrier / std::ldexp(1.0, j - 1); }
};

namespace detail {

inline double frequency(long i, long n) { return 2.0 * kPi * signed_frequency_index(i, n) / n; }

/// Evaluates f at every grid frequency. Nyquist rows/columns are ambiguous
/// (-pi and +pi are the same sample); there the larger of the candidate
/// representatives is used so each filter keeps the Nyquist band on the side
/// it is oriented towards.
template <class F>
Image sample_on_grid(long height, long width, F&& f) {
  Image out(height, width);
  for (long r = 0; r < height; ++r) {
    const double wy = frequency(r, height);
    const bool ny = height > 1 && signed_frequency_index(r, height) == -height / 2;
    for (long c = 0; c < width; ++c) {
      const double wx = frequency(c, width);
      const bool nx = width > 1 && signed_frequency_index(c, width) == -width / 2;
      double best = f(wx, wy);
      if (nx) best = std::max(best, f(-wx, wy));
      if (ny) best = std::max(best, f(wx, -wy));
      if (nx && ny) best = std::max(best, f(-wx, -wy));
      out(r, c) = best;
    }
  }
  return out;
}

inline Image morlet_hat(long height, long width, double xi, double theta, const WaveletShape& s) {
  const double sr = s.bandwidth * xi;
  const double st = s.slant * sr;
  const double ct = std::cos(theta), sn = std::sin(theta);
  auto envelope = [&](double wx, double wy, double center) {
    const double a = wx * ct + wy * sn - center;
    const double b = -wx * sn + wy * ct;
    return std::exp(-0.5 * (a * a / (sr * sr) + b * b / (st * st)));
  };
  // DC correction: subtract the carrier-free envelope scaled to cancel at 0.
  const double beta = envelope(0.0, 0.0, xi);
  return sample_on_grid(height, width, [&](double wx, double wy) {
    return envelope(wx, wy, xi) - beta * envelope(wx, wy, 0.0);
  });
}

/// Mirrors a DFT grid: out(w) = in(-w).
inline Image reflect(const Image& in) {
  const long h = in.rows(), w = in.cols();
  Image out(h, w);
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) out(r, c) = in((h - r) % h, (w - c) % w);
  return out;
}

}  // namespace detail

/// Littlewood-Paley sum over the bank together with its extrema.
struct LittlewoodPaley {
  double min_value = 0.0;
  double max_value = 0.0;
  Image profile;
};

inline LittlewoodPaley littlewood_paley_profile(const FilterBank& fb) {
  Image profile = fb.phi_hat.square();
  for (const Image& psi : fb.psi_hat) profile += 0.5 * (psi.square() + detail::reflect(psi).square());
  LittlewoodPaley lp;
  lp.min_value = profile.minCoeff();
  lp.max_value = profile.maxCoeff();
  lp.profile = std::move(profile);
  return lp;
}

/// Builds J x K oriented band-pass filters plus the lowpass phi_J. Scale j = 1
/// is the finest band; scale j has center frequency carrier / 2^(j-1).
/// J = 0 yields a bank holding only the lowpass.
inline FilterBank build_filter_bank(long width, long height, int J, int K,
                                    const WaveletShape& shape = {}) {
  if (!is_power_of_two(width) || !is_power_of_two(height))
    throw ArgumentError("build_filter_bank: dimensions must be powers of two, got " +
                        std::to_string(height) + "x" + std::to_string(width));
  if (K < 1) throw ArgumentError("build_filter_bank: K must be >= 1");
  if (J < 0 || J > log2_exact(std::min(width, height)))
    throw ArgumentError("build_filter_bank: J = " + std::to_string(J) + " too large for a " +
                        std::to_string(height) + "x" + std::to_string(width) + " grid");

  FilterBank fb;
  fb.width = width;
  fb.height = height;
  fb.J = J;
  fb.K = K;
  fb.shape = shape;

  const double coarsest = shape.carrier / std::ldexp(1.0, std::max(J, 1) - 1);
  const double sphi = shape.lowpass_width * coarsest;
  fb.phi_hat = detail::sample_on_grid(height, width, [&](double wx, double wy) {
    return std::exp(-0.5 * (wx * wx + wy * wy) / (sphi * sphi));
  });
  fb.phi_hat(0, 0) = 1.0;

  for (int j = 1; j <= J; ++j)
    for (int k = 1; k <= K; ++k)
      fb.psi_hat.push_back(
          detail::morlet_hat(height, width, fb.center_frequency(j), fb.orientation(k), shape));

  if (!fb.psi_hat.empty()) {
    Image band = Image::Zero(height, width);
    for (const Image& psi : fb.psi_hat) band += 0.5 * (psi.square() + detail::reflect(psi).square());
    if (shape.tight) {
      // Fill exactly the energy the lowpass leaves: phi^2 + band * g^2 = 1.
      const Image room = (1.0 - fb.phi_hat.square()).max(0.0);
      Image gain = Image::Zero(height, width);
      for (long i = 0; i < gain.size(); ++i)
        if (band.data()[i] > 0.0) gain.data()[i] = std::sqrt(room.data()[i] / band.data()[i]);
      for (Image& psi : fb.psi_hat) psi *= gain;
    } else {
      const double peak = (fb.phi_hat.square() + band).maxCoeff();
      if (peak > 1.0) {
        // Keep phi(0) = 1 by scaling only the band-pass part when possible.
        const double excess = (band / (1.0 - fb.phi_hat.square()).max(1e-300)).maxCoeff();
        const double g = 1.0 / std::sqrt(std::max(excess, 1.0));
        for (Image& psi : fb.psi_hat) psi *= g;
      }
    }
    for (Image& psi : fb.psi_hat) psi(0, 0) = 0.0;
  }

  const LittlewoodPaley lp = littlewood_paley_profile(fb);
  fb.epsilon_lp = std::max(0.0, 1.0 - lp.min_value);
  return fb;
}

/// Fraction of a filter's energy on the half-plane opposite its orientation.
/// Nyquist rows and columns are self-conjugate and are left out.
inline double opposite_half_energy(const FilterBank& fb, int j, int k) {
  const Image& psi = fb.psi(j, k);
  const double theta = fb.orientation(k);
  const double ct = std::cos(theta), sn = std::sin(theta);
  double total = 0.0, opposite = 0.0;
  for (long r = 0; r < fb.height; ++r) {
    for (long c = 0; c < fb.width; ++c) {
      const double e = psi(r, c) * psi(r, c);
      total += e;
      const long ir = signed_frequency_index(r, fb.height);
      const long ic = signed_frequency_index(c, fb.width);
      if (ir == -fb.height / 2 || ic == -fb.width / 2) continue;
      if (detail::frequency(c, fb.width) * ct + detail::frequency(r, fb.height) * sn < -1e-12)
        opposite += e;
    }
  }
  return total > 0.0 ? opposite / total : 0.0;
}

}  // namespace scatinv

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "scatinv/error.hpp"
#include "scatinv/fft.hpp"
#include "scatinv/image.hpp"

namespace scatinv {

enum class ProcessKind { ising, cox };
enum class IsingInit { random, up, down };
enum class SplatKernel { delta, bilinear };

struct IsingSpec {
  long size = 64;
  /// In units of the coupling (J / k_B = 1). The critical point is ~2.269.
  double temperature = 0.3;
  int sweeps = 50;
  IsingInit init = IsingInit::random;
};

struct CoxSpec {
  long size = 64;
  /// Std (pixels) of the Gaussian that smooths the white-noise field.
  double smoothing = 4.0;
  /// Mean number of points per pixel.
  double base_rate = 0.02;
  /// Std of the log-intensity field.
  double log_std = 1.0;
  /// Replace the random intensity by the constant base_rate.
  bool constant_intensity = false;
  SplatKernel splat = SplatKernel::delta;
};

struct ProcessSpec {
  ProcessKind kind = ProcessKind::ising;
  IsingSpec ising;
  CoxSpec cox;
  std::uint64_t seed = 0;

  void validate() const {
    if (kind == ProcessKind::ising) {
      if (ising.size < 2) throw ConfigError("ising: size must be >= 2");
      if (!(ising.temperature > 0.0)) throw ConfigError("ising: temperature must be positive");
      if (ising.sweeps < 0) throw ConfigError("ising: sweeps must be >= 0");
    } else {
      if (cox.size < 1) throw ConfigError("cox: size must be positive");
      if (!(cox.base_rate >= 0.0)) throw ConfigError("cox: base rate must be >= 0");
      if (!(cox.smoothing > 0.0)) throw ConfigError("cox: smoothing must be positive");
      if (!(cox.log_std >= 0.0)) throw ConfigError("cox: log_std must be >= 0");
    }
  }
};

/// Periodic square lattice of +-1 spins updated by checkerboard heat-bath
/// sweeps: every site of one color, then every site of the other.
class IsingLattice {
 public:
  IsingLattice(long size, IsingInit init, std::mt19937_64& rng) : n_(size), spins_(size * size) {
    std::uniform_int_distribution<int> coin(0, 1);
    for (auto& s : spins_) {
      if (init == IsingInit::up) s = 1;
      else if (init == IsingInit::down) s = -1;
      else s = coin(rng) ? 1 : -1;
    }
  }

  long size() const { return n_; }
  int spin(long r, long c) const { return spins_[static_cast<std::size_t>(r * n_ + c)]; }
  void set(long r, long c, int s) { spins_[static_cast<std::size_t>(r * n_ + c)] = static_cast<signed char>(s); }

  int local_field(long r, long c) const {
    const long up = (r + n_ - 1) % n_, down = (r + 1) % n_;
    const long left = (c + n_ - 1) % n_, right = (c + 1) % n_;
    return spin(up, c) + spin(down, c) + spin(r, left) + spin(r, right);
  }

  /// -sum over bonds s_i s_j; on a 2-wide axis each pair is bonded twice.
  double energy() const {
    double e = 0.0;
    for (long r = 0; r < n_; ++r)
      for (long c = 0; c < n_; ++c) e -= spin(r, c) * (spin((r + 1) % n_, c) + spin(r, (c + 1) % n_));
    return e;
  }

  void sweep(double temperature, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int color = 0; color < 2; ++color)
      for (long r = 0; r < n_; ++r)
        for (long c = (r + color) % 2; c < n_; c += 2) {
          const double h = local_field(r, c);
          const double p_up = 1.0 / (1.0 + std::exp(-2.0 * h / temperature));
          set(r, c, unif(rng) < p_up ? 1 : -1);
        }
  }

  /// Spins mapped -1 -> 0, +1 -> 1.
  Image image() const {
    Image out(n_, n_);
    for (long r = 0; r < n_; ++r)
      for (long c = 0; c < n_; ++c) out(r, c) = spin(r, c) > 0 ? 1.0 : 0.0;
    return out;
  }

 private:
  long n_;
  std::vector<signed char> spins_;
};

inline Image sample_ising(const IsingSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  IsingLattice lattice(spec.size, spec.init, rng);
  for (int s = 0; s < spec.sweeps; ++s) lattice.sweep(spec.temperature, rng);
  return lattice.image();
}

/// Log-Gaussian intensity in points per pixel: base_rate * exp(s g - s^2 / 2)
/// with g a unit-variance, Gaussian-smoothed (circular) white-noise field and
/// s = log_std, so the mean intensity is base_rate.
inline Image cox_intensity(const CoxSpec& spec, std::mt19937_64& rng) {
  const long n = spec.size;
  if (spec.constant_intensity || spec.log_std == 0.0) return Image::Constant(n, n, spec.base_rate);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Image noise(n, n);
  for (long i = 0; i < noise.size(); ++i) noise.data()[i] = gauss(rng);
  Image transfer(n, n);
  for (long r = 0; r < n; ++r)
    for (long c = 0; c < n; ++c) {
      const double wy = 2.0 * kPi * signed_frequency_index(r, n) / n;
      const double wx = 2.0 * kPi * signed_frequency_index(c, n) / n;
      transfer(r, c) = std::exp(-0.5 * spec.smoothing * spec.smoothing * (wx * wx + wy * wy));
    }
  // Output variance of filtered unit white noise is the mean of |H|^2.
  const double gain = std::sqrt(transfer.square().mean());
  const Image g = fft::filter_real(noise, transfer) / gain;
  return spec.base_rate * (spec.log_std * g - 0.5 * spec.log_std * spec.log_std).exp();
}

/// Poisson points given the intensity, splatted onto the grid with unit mass
/// per point. Positions are uniform within each pixel; the bilinear splat
/// shares the mass among the four nearest pixel centers (periodically).
inline Image splat_points(const Image& intensity, SplatKernel splat, std::mt19937_64& rng) {
  const long rows = intensity.rows(), cols = intensity.cols();
  Image out = Image::Zero(rows, cols);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) {
      const double lambda = intensity(r, c);
      if (!(lambda > 0.0)) continue;
      std::poisson_distribution<long> poisson(lambda);
      const long count = poisson(rng);
      if (splat == SplatKernel::delta) {
        out(r, c) += static_cast<double>(count);
        continue;
      }
      for (long k = 0; k < count; ++k) {
        const double py = unif(rng) - 0.5, px = unif(rng) - 0.5;
        const long r1 = py < 0.0 ? (r + rows - 1) % rows : (r + 1) % rows;
        const long c1 = px < 0.0 ? (c + cols - 1) % cols : (c + 1) % cols;
        const double ay = std::abs(py), ax = std::abs(px);
        out(r, c) += (1 - ay) * (1 - ax);
        out(r1, c) += ay * (1 - ax);
        out(r, c1) += (1 - ay) * ax;
        out(r1, c1) += ay * ax;
      }
    }
  return out;
}

struct CoxSample {
  Image intensity;
  Image points;
};

inline CoxSample sample_cox_with_intensity(const CoxSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CoxSample out;
  out.intensity = cox_intensity(spec, rng);
  out.points = splat_points(out.intensity, spec.splat, rng);
  return out;
}

inline Image sample_cox(const CoxSpec& spec, std::uint64_t seed) {
  return sample_cox_with_intensity(spec, seed).points;
}

inline Image sample(const ProcessSpec& spec) {
  spec.validate();
  return spec.kind == ProcessKind::ising ? sample_ising(spec.ising, spec.seed) : sample_cox(spec.cox, spec.seed);
}

inline std::string to_string(ProcessKind k) { return k == ProcessKind::ising ? "ising" : "cox"; }

}  // namespace scatinv

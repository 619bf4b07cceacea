#include <cmath>

#include <gtest/gtest.h>

#include "scatinv/filterbank.hpp"
#include "test_util.hpp"

namespace scatinv {
namespace {

// Profile recomputed by brute force: for every grid frequency, look up the
// mirrored frequency by index arithmetic and sum all filter energies.
Image brute_force_profile(const FilterBank& fb) {
  Image out(fb.height, fb.width);
  for (long r = 0; r < fb.height; ++r)
    for (long c = 0; c < fb.width; ++c) {
      const long mr = r == 0 ? 0 : fb.height - r, mc = c == 0 ? 0 : fb.width - c;
      double sum = fb.phi_hat(r, c) * fb.phi_hat(r, c);
      for (int j = 1; j <= fb.J; ++j)
        for (int k = 1; k <= fb.K; ++k) {
          const Image& psi = fb.psi(j, k);
          sum += 0.5 * (psi(r, c) * psi(r, c) + psi(mr, mc) * psi(mr, mc));
        }
      out(r, c) = sum;
    }
  return out;
}

// Bilinear lookup of a DFT-grid filter at a continuous signed frequency index.
double sample_centered(const Image& f, double fr, double fc) {
  const long h = f.rows(), w = f.cols();
  const double r0 = std::floor(fr), c0 = std::floor(fc);
  const double ar = fr - r0, ac = fc - c0;
  auto at = [&](long r, long c) { return f(((r % h) + h) % h, ((c % w) + w) % w); };
  const long ri = static_cast<long>(r0), ci = static_cast<long>(c0);
  return (1 - ar) * (1 - ac) * at(ri, ci) + (1 - ar) * ac * at(ri, ci + 1) + ar * (1 - ac) * at(ri + 1, ci) +
         ar * ac * at(ri + 1, ci + 1);
}

TEST(FilterBank, CountsAndUnitLowpassAtDc) {
  const FilterBank fb = build_filter_bank(64, 64, 3, 4);
  EXPECT_EQ(fb.psi_hat.size(), 12u);
  EXPECT_EQ(fb.phi_hat.rows(), 64);
  EXPECT_DOUBLE_EQ(fb.phi_hat(0, 0), 1.0);
}

TEST(FilterBank, WaveletsVanishAtDc) {
  for (auto [n, J, K] : {std::tuple{32L, 2, 3}, std::tuple{64L, 3, 4}, std::tuple{128L, 4, 6}, std::tuple{64L, 6, 8}}) {
    const FilterBank fb = build_filter_bank(n, n, J, K);
    for (const Image& psi : fb.psi_hat) EXPECT_LT(std::abs(psi(0, 0)), 1e-6);
  }
}

TEST(FilterBank, FiltersAreConcentratedOnOneHalfPlane) {
  const FilterBank fb = build_filter_bank(128, 128, 4, 6);
  for (int j = 1; j <= fb.J; ++j)
    for (int k = 1; k <= fb.K; ++k) EXPECT_LT(opposite_half_energy(fb, j, k), 1e-3) << "j=" << j << " k=" << k;
}

TEST(FilterBank, LittlewoodPaleyMatchesBruteForceSweep) {
  const FilterBank fb = build_filter_bank(128, 128, 4, 6);
  const Image oracle = brute_force_profile(fb);
  const LittlewoodPaley lp = littlewood_paley_profile(fb);
  EXPECT_LT((lp.profile - oracle).abs().maxCoeff(), 1e-12);
  EXPECT_NEAR(lp.min_value, oracle.minCoeff(), 1e-12);
  EXPECT_LE(lp.max_value, 1.0 + 1e-9);
  EXPECT_GE(lp.min_value, 0.85);
  EXPECT_NEAR(fb.epsilon_lp, 1.0 - oracle.minCoeff(), 1e-12);
  EXPECT_LE(fb.epsilon_lp, 0.15);
}

TEST(FilterBank, ProfileAtDcIsLowpassEnergy) {
  const FilterBank fb = build_filter_bank(64, 32, 3, 5);
  const LittlewoodPaley lp = littlewood_paley_profile(fb);
  EXPECT_NEAR(lp.profile(0, 0), 1.0, 1e-12);
}

TEST(FilterBank, LowpassOnlyBankHasMinimumAtNyquist) {
  const FilterBank fb = build_filter_bank(32, 32, 0, 1);
  EXPECT_TRUE(fb.psi_hat.empty());
  const LittlewoodPaley lp = littlewood_paley_profile(fb);
  EXPECT_LT((lp.profile - fb.phi_hat.square()).abs().maxCoeff(), 1e-15);
  EXPECT_DOUBLE_EQ(lp.min_value, lp.profile(16, 16));
}

TEST(FilterBank, UntightBankStaysBelowOne) {
  WaveletShape shape;
  shape.tight = false;
  const FilterBank fb = build_filter_bank(64, 64, 3, 6, shape);
  EXPECT_LE(littlewood_paley_profile(fb).max_value, 1.0 + 1e-9);
  EXPECT_DOUBLE_EQ(fb.phi_hat(0, 0), 1.0);
}

TEST(FilterBank, RejectsBadGeometry) {
  EXPECT_THROW(build_filter_bank(48, 64, 2, 4), ArgumentError);
  EXPECT_THROW(build_filter_bank(64, 64, 7, 4), ArgumentError);
  EXPECT_THROW(build_filter_bank(64, 64, 2, 0), ArgumentError);
  EXPECT_THROW(build_filter_bank(64, 64, -1, 4), ArgumentError);
}

// Interior scales only: the finest band touches Nyquist and the coarsest
// shares its energy budget with the lowpass.
TEST(FilterBank, RotationConsistency) {
  const FilterBank fb = build_filter_bank(128, 128, 4, 6);
  for (int j = 2; j <= 3; ++j)
    for (int k = 2; k <= fb.K; ++k) {
      const double theta = fb.orientation(k);
      const double ct = std::cos(theta), st = std::sin(theta);
      double err = 0.0, energy = 0.0;
      for (long r = 0; r < fb.height; ++r)
        for (long c = 0; c < fb.width; ++c) {
          const double fy = static_cast<double>(signed_frequency_index(r, fb.height));
          const double fx = static_cast<double>(signed_frequency_index(c, fb.width));
          // Rotate back by -theta onto the reference orientation.
          const double gx = fx * ct + fy * st, gy = -fx * st + fy * ct;
          const double v = fb.psi(j, k)(r, c);
          const double ref = sample_centered(fb.psi(j, 1), gy, gx);
          err += (v - ref) * (v - ref);
          energy += v * v;
        }
      EXPECT_LT(err / energy, 1e-2) << "j=" << j << " k=" << k;
    }
}

TEST(FilterBank, DilationConsistency) {
  const FilterBank fb = build_filter_bank(128, 128, 4, 6);
  for (int j = 2; j <= 2; ++j)
    for (int k = 1; k <= fb.K; ++k) {
      double err = 0.0, energy = 0.0;
      for (long r = 0; r < fb.height; ++r)
        for (long c = 0; c < fb.width; ++c) {
          const long ir = signed_frequency_index(r, fb.height), ic = signed_frequency_index(c, fb.width);
          if (std::abs(ir) >= fb.height / 4 || std::abs(ic) >= fb.width / 4) continue;
          const double coarse = fb.psi(j + 1, k)(r, c);
          const double fine = fb.psi(j, k)((2 * ir + fb.height) % fb.height, (2 * ic + fb.width) % fb.width);
          err += (coarse - fine) * (coarse - fine);
          energy += coarse * coarse;
        }
      EXPECT_LT(err / energy, 1e-2) << "j=" << j << " k=" << k;
    }
}

}  // namespace
}  // namespace scatinv

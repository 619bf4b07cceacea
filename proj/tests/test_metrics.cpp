#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "scatinv/metrics.hpp"
#include "scatinv/operators.hpp"
#include "scatinv/processes.hpp"
#include "test_util.hpp"

namespace scatinv {
namespace {

// n x p standard normal samples (rows).
Eigen::MatrixXd normal_rows(long n, long p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(n, p);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

TEST(Mse, Basics) {
  const Image a = testing::random_image(8, 8, 1), b = testing::random_image(8, 8, 2);
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_EQ(mse(Image::Zero(4, 4), Image::Ones(4, 4)), 1.0);
  double direct = 0.0;
  for (long r = 0; r < 8; ++r)
    for (long c = 0; c < 8; ++c) direct += (a(r, c) - b(r, c)) * (a(r, c) - b(r, c)) / 64.0;
  EXPECT_NEAR(mse(a, b), direct, 1e-15);
  EXPECT_THROW(mse(a, Image::Zero(4, 4)), ShapeError);
}

TEST(Correlation, SignsBoundsAndSymmetry) {
  const Eigen::VectorXd a = testing::random_vector(100, 1), b = testing::random_vector(100, 2);
  EXPECT_NEAR(correlation(a, a), 1.0, 1e-15);
  EXPECT_NEAR(correlation(a, Eigen::VectorXd(-a)), -1.0, 1e-15);
  EXPECT_NEAR(correlation(a, Eigen::VectorXd(3.0 * a.array() + 2.0)), 1.0, 1e-15);
  EXPECT_EQ(correlation(a, b), correlation(b, a));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const double r = correlation(testing::random_vector(5, s), testing::random_vector(5, s + 100));
    EXPECT_GE(r, -1.0);
    EXPECT_LE(r, 1.0);
  }
  EXPECT_THROW(correlation(a, Eigen::VectorXd::Ones(100)), ArgumentError);
  EXPECT_THROW(correlation(a, Eigen::VectorXd::Ones(3)), ShapeError);
  EXPECT_THROW(correlation(std::vector<double>{1.0}, std::vector<double>{2.0}), ArgumentError);
}

TEST(Correlation, PhaseCouplingIsInvisibleToLinearCorrelation) {
  // X = |X| e^{i phi}, Y = |Y| e^{-i phi}: perfectly coupled phases, yet the
  // complex correlation E[X Y*] vanishes. The moduli stay correlated.
  const long n = 100000;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::exponential_distribution<double> mag(1.0);
  std::vector<std::complex<double>> xs(n), ys(n);
  std::vector<double> ax(n), ay(n);
  for (long i = 0; i < n; ++i) {
    const double phi = phase(rng);
    const double m = mag(rng);
    ax[i] = m;
    ay[i] = m + 0.5 * mag(rng);
    xs[i] = std::polar(ax[i], phi);
    ys[i] = std::polar(ay[i], -phi);
  }
  std::complex<double> mx = 0.0, my = 0.0;
  for (long i = 0; i < n; ++i) {
    mx += xs[i] / static_cast<double>(n);
    my += ys[i] / static_cast<double>(n);
  }
  std::complex<double> cov = 0.0;
  double vx = 0.0, vy = 0.0;
  for (long i = 0; i < n; ++i) {
    cov += (xs[i] - mx) * std::conj(ys[i] - my);
    vx += std::norm(xs[i] - mx);
    vy += std::norm(ys[i] - my);
  }
  EXPECT_LT(std::abs(cov / std::sqrt(vx * vy)), 0.05);
  EXPECT_GT(correlation(ax, ay), 0.8);
}

TEST(Cokurtosis, GaussianDiagonalIsThree) {
  const CokurtosisTensor t = cokurtosis_tensor(normal_rows(100000, 3, 4), false);
  for (long i = 0; i < 3; ++i) EXPECT_NEAR(t.at(i, i, i, i), 3.0, 0.1);
}

TEST(Cokurtosis, IsserlisRelation) {
  Eigen::Matrix3d corr;
  corr << 1.0, 0.6, -0.3, 0.6, 1.0, 0.2, -0.3, 0.2, 1.0;
  const Eigen::Matrix3d l = corr.llt().matrixL();
  const Eigen::MatrixXd x = normal_rows(200000, 3, 5) * l.transpose();
  const CokurtosisTensor t = cokurtosis_tensor(x, false);
  for (long i = 0; i < 3; ++i)
    for (long j = 0; j < 3; ++j)
      for (long k = 0; k < 3; ++k)
        for (long m = 0; m < 3; ++m) {
          const double expected = corr(i, j) * corr(k, m) + corr(i, k) * corr(j, m) + corr(i, m) * corr(j, k);
          EXPECT_NEAR(t.at(i, j, k, m), expected, 0.06);
        }
}

TEST(Cokurtosis, MixtureMatchesAnalyticMoments) {
  // Two-component Gaussian mixture in 2-D; exact fourth moments from the
  // noncentral Gaussian moment formula per component.
  const double w0 = 0.3;
  const Eigen::Vector2d mu0(-1.0, 0.5), mu1(1.5, -0.2);
  Eigen::Matrix2d s0, s1;
  s0 << 0.5, 0.2, 0.2, 0.3;
  s1 << 1.0, -0.4, -0.4, 0.8;
  const Eigen::Vector2d mean = w0 * mu0 + (1.0 - w0) * mu1;

  auto moment4 = [](const Eigen::Vector2d& m, const Eigen::Matrix2d& s, int i, int j, int k, int l) {
    return m(i) * m(j) * m(k) * m(l) + s(i, j) * m(k) * m(l) + s(i, k) * m(j) * m(l) + s(i, l) * m(j) * m(k) +
           s(j, k) * m(i) * m(l) + s(j, l) * m(i) * m(k) + s(k, l) * m(i) * m(j) + s(i, j) * s(k, l) +
           s(i, k) * s(j, l) + s(i, l) * s(j, k);
  };
  const Eigen::Vector2d c0 = mu0 - mean, c1 = mu1 - mean;
  Eigen::Vector2d var;
  for (int i = 0; i < 2; ++i) var(i) = w0 * (s0(i, i) + c0(i) * c0(i)) + (1.0 - w0) * (s1(i, i) + c1(i) * c1(i));

  const long n = 400000;
  std::mt19937_64 rng(6);
  std::bernoulli_distribution pick(w0);
  std::normal_distribution<double> g(0.0, 1.0);
  const Eigen::Matrix2d l0 = s0.llt().matrixL(), l1 = s1.llt().matrixL();
  Eigen::MatrixXd x(n, 2);
  for (long r = 0; r < n; ++r) {
    const Eigen::Vector2d e(g(rng), g(rng));
    x.row(r) = (pick(rng) ? Eigen::Vector2d(mu0 + l0 * e) : Eigen::Vector2d(mu1 + l1 * e)).transpose();
  }
  const CokurtosisTensor t = cokurtosis_tensor(x, false);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
          const double exact = (w0 * moment4(c0, s0, i, j, k, l) + (1.0 - w0) * moment4(c1, s1, i, j, k, l)) /
                               std::sqrt(var(i) * var(j) * var(k) * var(l));
          EXPECT_NEAR(t.at(i, j, k, l), exact, 0.02 * std::max(1.0, std::abs(exact)));
        }
}

TEST(Cokurtosis, FixedFirstIndexAveragesTheFullTensor) {
  const Eigen::MatrixXd x = normal_rows(500, 4, 7).array().cube();
  const CokurtosisTensor full = cokurtosis_tensor(x, false);
  const CokurtosisTensor avg = cokurtosis_tensor(x, true);
  ASSERT_EQ(avg.values.size(), 64u);
  for (long j = 0; j < 4; ++j)
    for (long k = 0; k < 4; ++k)
      for (long l = 0; l < 4; ++l) {
        double s = 0.0;
        for (long i = 0; i < 4; ++i) s += full.at(i, j, k, l) / 4.0;
        EXPECT_NEAR(avg.at(j, k, l), s, 1e-12);
      }
}

TEST(Cokurtosis, PanelOfGaussianData) {
  const long p = 4;
  const Image panel = cokurtosis_panel(normal_rows(200000, p, 8));
  ASSERT_EQ(panel.rows(), p);
  EXPECT_LT((panel.matrix() - panel.matrix().transpose()).cwiseAbs().maxCoeff(), 1e-12);
  // E[ybar^2 y_k y_l] for i.i.d. standard normals.
  for (long k = 0; k < p; ++k)
    for (long l = 0; l < p; ++l)
      EXPECT_NEAR(panel(k, l), k == l ? (p + 2.0) / (p * p) : 2.0 / (p * p), 0.02);
}

TEST(Cokurtosis, ZeroVarianceIsAnError) {
  EXPECT_THROW(cokurtosis_tensor(Eigen::MatrixXd::Ones(10, 3), false), ArgumentError);
  EXPECT_THROW(cokurtosis_panel(Eigen::MatrixXd::Ones(10, 3)), ArgumentError);
}

TEST(Mardia, CalibrationAgainstFiniteSampleMean) {
  const long p = 4, n = 2000;
  double mean = 0.0;
  for (std::uint64_t rep = 0; rep < 200; ++rep) mean += mardia_excess(normal_rows(n, p, 1000 + rep)).beta_hat / 200.0;
  const double expected = p * (p + 2.0) * (n - 1.0) / (n + 1.0);
  EXPECT_NEAR(mean, expected, 0.02 * expected);
}

TEST(Mardia, AffineInvariance) {
  const Eigen::MatrixXd x = normal_rows(500, 5, 9).array().cube();
  Eigen::MatrixXd a = normal_rows(5, 5, 10);
  a.diagonal().array() += 3.0;
  const Eigen::RowVectorXd b = normal_rows(1, 5, 11);
  const Eigen::MatrixXd y = (x * a.transpose()).rowwise() + b;
  const KurtosisReport rx = mardia_excess(x), ry = mardia_excess(y);
  EXPECT_NEAR(ry.beta_hat, rx.beta_hat, 1e-8 * rx.beta_hat);
  EXPECT_EQ(rx.p, 5);
  EXPECT_EQ(rx.n, 500);
  EXPECT_DOUBLE_EQ(rx.excess, rx.beta_hat - 35.0);
}

TEST(Mardia, HeavyTailsGivePositiveExcess) {
  std::mt19937_64 rng(12);
  std::student_t_distribution<double> t(5.0);
  Eigen::MatrixXd x(10000, 4);
  for (long i = 0; i < x.size(); ++i) x.data()[i] = t(rng);
  EXPECT_GT(mardia_excess(x).excess, 0.0);
}

TEST(Mardia, SingularCovariance) {
  Eigen::MatrixXd x = normal_rows(100, 3, 13);
  x.col(2) = x.col(0) + x.col(1);
  EXPECT_THROW(mardia_excess(x), NumericalError);
  MardiaOptions opts;
  opts.ridge_fallback = true;
  const KurtosisReport r = mardia_excess(x, opts);
  EXPECT_GT(r.ridge, 0.0);
  EXPECT_TRUE(std::isfinite(r.beta_hat));
  EXPECT_THROW(mardia_excess(normal_rows(3, 3, 14)), ArgumentError);
}

TEST(ImageKurtosis, WhiteNoiseMatchesGaussianCalibration) {
  const PatchOptions opts;
  const long p = 64, n = 1024;
  const int reps = 40;
  std::vector<double> excess;
  for (int s = 0; s < reps; ++s)
    excess.push_back(image_excess_kurtosis(testing::gaussian_image(256, 256, 100 + s), opts).excess);
  double m = 0.0, v = 0.0;
  for (double e : excess) m += e / reps;
  for (double e : excess) v += (e - m) * (e - m) / (reps - 1);
  const double sd = std::sqrt(v);
  const double exact = p * (p + 2.0) * ((n - 1.0) / (n + 1.0) - 1.0);
  EXPECT_LT(std::abs(m - exact), 3.0 * sd / std::sqrt(static_cast<double>(reps)));
  const KurtosisReport fresh = image_excess_kurtosis(testing::gaussian_image(256, 256, 7), opts);
  EXPECT_LT(std::abs(fresh.excess - m), 3.0 * sd);
  EXPECT_EQ(fresh.p, 64);
  EXPECT_EQ(fresh.n, 1024);
}

TEST(ImageKurtosis, ConstantImageIsAnError) {
  EXPECT_THROW(image_excess_kurtosis(Image::Constant(128, 128, 0.5)), NumericalError);
  EXPECT_THROW(extract_patches(Image::Zero(4, 4)), ShapeError);
}

TEST(ImageKurtosis, PatchLayout) {
  Image img(16, 16);
  for (long i = 0; i < img.size(); ++i) img.data()[i] = static_cast<double>(i);
  const Eigen::MatrixXd p = extract_patches(img, 8, 8);
  ASSERT_EQ(p.rows(), 4);
  ASSERT_EQ(p.cols(), 64);
  // Second patch: rows 0..7, columns 8..15; entry (r, c) at r * 8 + c.
  EXPECT_EQ(p(1, 0), img(0, 8));
  EXPECT_EQ(p(1, 9), img(1, 9));
  EXPECT_EQ(extract_patches(img, 8, 4).rows(), 9);
}

TEST(ImageKurtosis, IsingOriginalIsFurtherFromGaussianThanItsLowpass) {
  IsingSpec spec;
  const SuperResolution op(64, 64, 4);
  std::vector<Image> originals, lowpass;
  for (std::uint64_t s = 0; s < 3; ++s) {
    originals.push_back(sample_ising(spec, 50 + s));
    lowpass.push_back(op.right_inverse(op.apply(originals.back())));
  }
  PatchOptions opts;
  opts.mardia.ridge_fallback = true;
  const double orig = image_excess_kurtosis(originals, opts).excess;
  const double low = image_excess_kurtosis(lowpass, opts).excess;
  EXPECT_GT(std::abs(orig), std::abs(low));
}

}  // namespace
}  // namespace scatinv

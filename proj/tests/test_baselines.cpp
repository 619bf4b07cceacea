#include <cmath>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "scatinv/baselines.hpp"
#include "scatinv/processes.hpp"
#include "test_util.hpp"

namespace scatinv {
namespace {

using testing::random_image;

Eigen::MatrixXd dense_matrix(const ForwardOperator& op) {
  const long n = op.image_rows() * op.image_cols();
  const MeasurementShape s = op.measurement_shape();
  Eigen::MatrixXd m(s.rows * s.cols, n);
  for (long i = 0; i < n; ++i) {
    Image e = Image::Zero(op.image_rows(), op.image_cols());
    e.data()[i] = 1.0;
    m.col(i) = flatten(op.apply(e));
  }
  return m;
}

void expect_monotone(const std::vector<double>& f) {
  for (std::size_t i = 1; i < f.size(); ++i) EXPECT_LE(f[i], f[i - 1] + 1e-12 * std::abs(f[i - 1])) << "step " << i;
}

TEST(SoftThreshold, Elementwise) {
  Image v(1, 5);
  v << -3.0, -0.5, 0.0, 0.7, 2.0;
  const Image s = soft_threshold(v, 1.0);
  const double expected[] = {-2.0, 0.0, 0.0, 0.0, 1.0};
  for (long i = 0; i < 5; ++i) EXPECT_EQ(s(0, i), expected[i]);
}

TEST(SolveL1, LargeLambdaGivesZero) {
  const SuperResolution op(16, 16, 2);
  const Image y = op.apply(random_image(16, 16, 1));
  BaselineConfig cfg;
  cfg.lambda = op.adjoint(y).abs().maxCoeff();
  cfg.iterations = 50;
  EXPECT_EQ(solve_l1(y, op, cfg).solution.abs().maxCoeff(), 0.0);
}

TEST(SolveL1, ZeroLambdaMatchesDenseLeastSquares) {
  const Radon op(8, angle_range(0, 179, 5));
  const Eigen::MatrixXd g = dense_matrix(op);
  ASSERT_EQ(Eigen::FullPivLU<Eigen::MatrixXd>(g).rank(), 64);
  const Image y = random_image(op.measurement_shape().rows, op.measurement_shape().cols, 2);
  const Eigen::VectorXd oracle = (g.transpose() * g).ldlt().solve(g.transpose() * flatten(y));
  BaselineConfig cfg;
  cfg.lambda = 0.0;
  cfg.iterations = 5000;
  const BaselineResult res = solve_l1(y, op, cfg);
  EXPECT_LT((flatten(res.solution) - oracle).norm() / oracle.norm(), 1e-6);
  expect_monotone(res.objective);
}

TEST(SolveL1, ObjectiveIsMonotoneAndBoxIsRespected) {
  const SuperResolution op(32, 32, 4, SrKernel::gaussian(2.0));
  CoxSpec spec;
  spec.size = 32;
  spec.base_rate = 0.2;
  const Image y = op.apply(sample_cox(spec, 3));
  BaselineConfig cfg;
  cfg.lambda = 1e-3 * op.adjoint(y).abs().maxCoeff();
  cfg.iterations = 300;
  expect_monotone(solve_l1(y, op, cfg).objective);
  cfg.box = true;
  const BaselineResult boxed = solve_l1(y, op, cfg);
  expect_monotone(boxed.objective);
  EXPECT_GE(boxed.solution.minCoeff(), 0.0);
  EXPECT_LE(boxed.solution.maxCoeff(), 1.0);
}

TEST(SolveTv, ZeroLambdaMatchesBoxLeastSquares) {
  const long n = 16;
  const Radon op(n, angle_range(0, 179, 3));
  Image x(n, n);
  for (long r = 0; r < n; ++r)
    for (long c = 0; c < n; ++c) x(r, c) = 0.5 + 0.3 * std::sin(0.4 * r) * std::cos(0.3 * c);
  const Image y = op.apply(x);
  BaselineConfig cfg;
  cfg.regularizer = Regularizer::tv;
  cfg.lambda = 0.0;
  cfg.box = true;
  cfg.iterations = 3000;
  const Image tv = solve_tv(y, op, cfg).solution;
  const Image ri = radon_right_inverse(Sinogram{op.angles(), op.offsets(), y}, n, 3000).solution;
  EXPECT_LT(testing::relative_error(tv, ri), 1e-4);
}

TEST(SolveTv, ConstantMeasurementsGiveConstantImage) {
  const SuperResolution op(32, 32, 4);
  const Image y = op.apply(Image::Constant(32, 32, 0.4));
  BaselineConfig cfg;
  cfg.regularizer = Regularizer::tv;
  cfg.box = true;
  for (double lambda : {1e-6, 1e-3, 1e-1}) {
    cfg.lambda = lambda;
    cfg.iterations = 500;
    const Image z = solve_tv(y, op, cfg).solution;
    EXPECT_LT((z - 0.4).abs().maxCoeff(), 1e-4) << "lambda " << lambda;
  }
}

TEST(SolveTv, PaperSettingsAreStable) {
  IsingSpec spec;
  const Image x = sample_ising(spec, 4);
  BaselineConfig cfg;
  cfg.regularizer = Regularizer::tv;
  cfg.box = true;
  cfg.iterations = 100;
  {
    const SuperResolution op(64, 64, 4);
    cfg.lambda = 5e-6;
    const BaselineResult res = solve_tv(op.apply(x), op, cfg);
    expect_monotone(res.objective);
    EXPECT_TRUE(res.solution.allFinite());
    EXPECT_LT(res.objective.back(), res.objective.front());
  }
  {
    const Radon op(64, angle_range(0, 89, 2));
    cfg.lambda = 1e-6;
    const BaselineResult res = solve_tv(op.apply(x), op, cfg);
    expect_monotone(res.objective);
    EXPECT_TRUE(res.solution.allFinite());
    EXPECT_GE(res.solution.minCoeff(), 0.0);
    EXPECT_LE(res.solution.maxCoeff(), 1.0);
  }
}

TEST(TotalVariation, Basics) {
  EXPECT_EQ(total_variation(Image::Constant(8, 8, 3.0)), 0.0);
  Image step = Image::Zero(8, 8);
  step.rightCols(4).setOnes();
  // Two vertical edges (periodic), one unit jump per row each.
  EXPECT_DOUBLE_EQ(total_variation(step), 16.0);
}

TEST(TotalVariation, GradientAdjoint) {
  const Image z = random_image(9, 7, 1), px = random_image(9, 7, 2), py = random_image(9, 7, 3);
  Image dx, dy;
  detail::gradient(z, dx, dy);
  EXPECT_NEAR(dot(dx, px) + dot(dy, py), dot(z, detail::gradient_adjoint(px, py)), 1e-12);
}

TEST(OperatorNorm, BoundsTheTopSingularValue) {
  const Radon op(12, angle_range(0, 170, 10));
  const Eigen::MatrixXd g = dense_matrix(op);
  const double exact = Eigen::JacobiSVD<Eigen::MatrixXd>(g).singularValues()(0);
  const double estimate = operator_norm_squared(op);
  EXPECT_GE(estimate, exact * exact);
  EXPECT_LE(estimate, 1.06 * exact * exact);
}

TEST(BaselineConfig, Validation) {
  BaselineConfig cfg;
  cfg.lambda = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = BaselineConfig{};
  cfg.iterations = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = BaselineConfig{};
  cfg.box = true;
  cfg.box_hi = cfg.box_lo;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace scatinv

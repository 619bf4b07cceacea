#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "scatinv/processes.hpp"
#include "scatinv/solver.hpp"
#include "test_util.hpp"

namespace scatinv {
namespace {

using testing::random_image;

SolverConfig small_config() {
  SolverConfig cfg;
  cfg.outer_iterations = 3;
  cfg.inner_iterations = 10;
  cfg.shared_statistics = true;
  return cfg;
}

Image ising(long size, std::uint64_t seed, double temperature = 0.3) {
  IsingSpec spec;
  spec.size = size;
  spec.temperature = temperature;
  return sample_ising(spec, seed);
}

LinearEstimator identity_estimator(long dim) {
  LinearEstimator est;
  est.G = Eigen::MatrixXd::Identity(dim, dim);
  est.h = Eigen::VectorXd::Zero(dim);
  return est;
}

TEST(SolverConfig, Validation) {
  SolverConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.outer_iterations = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SolverConfig{};
  cfg.inner_iterations = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SolverConfig{};
  cfg.epsilon_rel = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SolverConfig{};
  cfg.backtrack = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(PhiProjection, ConsistentTargetIsAFixedPoint) {
  const FilterBank fb = build_filter_bank(32, 32, 2, 4);
  const SuperResolution op(32, 32, 4);
  const Image u_star = random_image(32, 32, 1, 0.0, 1.0);
  const Image y = op.apply(u_star);
  const SolverConfig cfg = small_config();
  const PhiProjection p = project_phi_measurements(scatter(u_star, fb).values, op, y, u_star, fb, cfg);
  EXPECT_EQ(p.objective.front(), 0.0);
  EXPECT_EQ(p.accepted_steps, 0);
  EXPECT_LT(testing::relative_error(p.u, u_star), 1e-13);
}

TEST(PhiProjection, ObjectiveIsNonIncreasing) {
  const FilterBank fb = build_filter_bank(32, 32, 2, 4);
  const SuperResolution op(32, 32, 4);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Image x = ising(32, seed);
    const Image y = op.apply(x);
    const Eigen::VectorXd target = scatter(ising(32, seed + 100), fb).values;
    SolverConfig cfg = small_config();
    cfg.inner_iterations = 15;
    const PhiProjection p = project_phi_measurements(target, op, y, op.right_inverse(y), fb, cfg);
    ASSERT_GE(p.objective.size(), 2u);
    for (std::size_t i = 1; i < p.objective.size(); ++i) EXPECT_LE(p.objective[i], p.objective[i - 1]);
    EXPECT_EQ(p.best_objective, p.objective.back());
  }
}

TEST(PhiProjection, SelfTargetImprovesOnLowpassStart) {
  const FilterBank fb = build_filter_bank(64, 64, 3, 4);
  const SuperResolution op(64, 64, 4);
  SolverConfig cfg;
  cfg.inner_iterations = 20;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Image x = ising(64, 1000 + seed);
    const Image y = op.apply(x);
    const PhiProjection p = project_phi_measurements(scatter(x, fb).values, op, y, op.right_inverse(y), fb, cfg);
    EXPECT_LT(p.best_objective, p.objective.front()) << "seed " << seed;
    EXPECT_LT(measurement_distance(op, p.u, y), 1e-12 * norm(y));
  }
}

TEST(PhiProjection, OutputLiesInTheMeasurementBall) {
  const FilterBank fb = build_filter_bank(32, 32, 2, 4);
  SolverConfig cfg = small_config();
  cfg.epsilon_rel = 1e-2;
  const Image x = ising(32, 5);
  const Eigen::VectorXd target = scatter(x, fb).values;
  {
    const SuperResolution op(32, 32, 2, SrKernel::gaussian(1.0));
    const Image y = op.apply(x);
    const PhiProjection p = project_phi_measurements(target, op, y, Image::Zero(32, 32), fb, cfg);
    EXPECT_LE(measurement_distance(op, p.u, y), cfg.epsilon(y));
  }
  {
    const Radon op(32, angle_range(0, 89, 4));
    const Image y = op.apply(x);
    const PhiProjection p = project_phi_measurements(target, op, y, Image::Zero(32, 32), fb, cfg);
    EXPECT_LE(measurement_distance(op, p.u, y), cfg.epsilon(y));
  }
}

TEST(PhiProjection, RejectsWrongTargetLength) {
  const FilterBank fb = build_filter_bank(16, 16, 2, 4);
  const SuperResolution op(16, 16, 2);
  const Image y = Image::Zero(8, 8);
  EXPECT_THROW(project_phi_measurements(Eigen::VectorXd::Zero(3), op, y, Image::Zero(16, 16), fb, small_config()),
               ShapeError);
}

TEST(Reconstruct, IdentityEstimatorsKeepTheRightInverse) {
  const FilterBank fb = build_filter_bank(32, 32, 2, 4);
  const SuperResolution op(32, 32, 4);
  const Image y = op.apply(ising(32, 7));
  SolverConfig cfg = small_config();
  cfg.init = InitKind::right_inverse;
  const long dim = scatter(Image::Zero(32, 32), fb).values.size();
  const std::vector<LinearEstimator> ests(3, identity_estimator(dim));
  const Reconstruction rec = reconstruct(y, op, fb, ests, cfg);
  EXPECT_LT(testing::relative_error(rec.x_hat, op.right_inverse(y)), 1e-13);
  ASSERT_EQ(rec.trace.records.size(), 3u);
}

TEST(Reconstruct, TruncatesToAvailableEstimators) {
  const FilterBank fb = build_filter_bank(16, 16, 2, 4);
  const SuperResolution op(16, 16, 2);
  const Image y = op.apply(ising(16, 8));
  SolverConfig cfg = small_config();
  cfg.outer_iterations = 5;
  const long dim = scatter(Image::Zero(16, 16), fb).values.size();
  const Reconstruction rec = reconstruct(y, op, fb, std::vector<LinearEstimator>(2, identity_estimator(dim)), cfg);
  EXPECT_EQ(rec.trace.records.size(), 2u);
  EXPECT_THROW(reconstruct(y, op, fb, {}, cfg), ArgumentError);
}

struct TrainedSmall {
  FilterBank fb = build_filter_bank(32, 32, 2, 4);
  SuperResolution op{32, 32, 4};
  std::vector<Image> train_set, test_set;
};

TrainedSmall small_problem() {
  TrainedSmall p;
  for (std::uint64_t s = 0; s < 6; ++s) p.train_set.push_back(ising(32, 200 + s));
  for (std::uint64_t s = 0; s < 2; ++s) p.test_set.push_back(ising(32, 300 + s));
  return p;
}

TEST(Train, OneOuterIterationGivesOneEstimator) {
  const TrainedSmall p = small_problem();
  SolverConfig cfg = small_config();
  cfg.outer_iterations = 1;
  const TrainingResult t = train(p.train_set, p.op, p.fb, cfg);
  ASSERT_EQ(t.estimators.size(), 1u);
  EXPECT_EQ(t.estimators[0].iteration_tag, 1);
  EXPECT_EQ(t.trace.records.size(), 1u);
  EXPECT_EQ(t.iterates.size(), p.train_set.size());
}

TEST(Train, IdenticalEnsembleUsesTheRidge) {
  const TrainedSmall p = small_problem();
  const std::vector<Image> same(4, p.train_set.front());
  SolverConfig cfg = small_config();
  cfg.outer_iterations = 2;
  const TrainingResult t = train(same, p.op, p.fb, cfg);
  ASSERT_EQ(t.estimators.size(), 2u);
  EXPECT_GT(t.estimators[0].ridge, 0.0);
  EXPECT_TRUE(t.estimators[0].G.allFinite());
  EXPECT_THROW(train({p.train_set.front()}, p.op, p.fb, cfg), ArgumentError);
}

TEST(Train, ResidualStaysInsideEpsilon) {
  const TrainedSmall p = small_problem();
  for (double eps_rel : {0.0, 1e-2}) {
    SolverConfig cfg = small_config();
    cfg.epsilon_rel = eps_rel;
    const TrainingResult t = train(p.train_set, p.op, p.fb, cfg);
    for (const OuterRecord& rec : t.trace.records)
      EXPECT_LE(rec.measurement_residual, rec.epsilon + 1e-12 * std::max(1.0, norm(p.op.apply(p.train_set[0]))));
    for (const Image& y_src : p.test_set) {
      const Image y = p.op.apply(y_src);
      const Reconstruction rec = reconstruct(y, p.op, p.fb, t.estimators, cfg, &y_src);
      for (const OuterRecord& r : rec.trace.records) {
        EXPECT_LE(r.measurement_residual, r.epsilon + 1e-12 * std::max(1.0, norm(y)));
        EXPECT_TRUE(std::isfinite(r.phi_mse));
      }
    }
  }
}

TEST(Train, IsDeterministicSingleThreaded) {
  const TrainedSmall p = small_problem();
  const SolverConfig cfg = small_config();
  const TrainingResult a = train(p.train_set, p.op, p.fb, cfg);
  const TrainingResult b = train(p.train_set, p.op, p.fb, cfg);
  ASSERT_EQ(a.estimators.size(), b.estimators.size());
  for (std::size_t k = 0; k < a.estimators.size(); ++k) {
    EXPECT_EQ((a.estimators[k].G - b.estimators[k].G).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((a.estimators[k].h - b.estimators[k].h).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(a.trace.records[k].inner_objective, b.trace.records[k].inner_objective);
    EXPECT_EQ(a.trace.records[k].lmmse_mse, b.trace.records[k].lmmse_mse);
  }
  const Image y = p.op.apply(p.test_set[0]);
  const Reconstruction ra = reconstruct(y, p.op, p.fb, a.estimators, cfg);
  const Reconstruction rb = reconstruct(y, p.op, p.fb, a.estimators, cfg);
  EXPECT_EQ((ra.x_hat - rb.x_hat).abs().maxCoeff(), 0.0);
}

TEST(Train, ThreadCountDoesNotChangeTheResult) {
  const TrainedSmall p = small_problem();
  SolverConfig cfg = small_config();
  cfg.outer_iterations = 2;
  const TrainingResult a = train(p.train_set, p.op, p.fb, cfg);
  cfg.threads = 3;
  const TrainingResult b = train(p.train_set, p.op, p.fb, cfg);
  for (std::size_t k = 0; k < a.estimators.size(); ++k)
    EXPECT_EQ((a.estimators[k].G - b.estimators[k].G).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Train, RegressionErrorDecreasesOverEarlyIterations) {
  const FilterBank fb = build_filter_bank(64, 64, 3, 4);
  const SuperResolution op(64, 64, 4);
  SolverConfig cfg;
  cfg.outer_iterations = 5;
  cfg.inner_iterations = 20;
  cfg.shared_statistics = true;
  int successes = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::vector<Image> ensemble;
    for (std::uint64_t i = 0; i < 10; ++i) ensemble.push_back(ising(64, seed * 100 + i));
    const TrainingResult t = train(ensemble, op, fb, cfg);
    const auto& r = t.trace.records;
    const bool ok = r[1].lmmse_mse <= r[0].lmmse_mse && r[2].lmmse_mse <= r[1].lmmse_mse;
    successes += ok ? 1 : 0;
    std::printf("seed %llu lmmse_mse %.6g %.6g %.6g\n", static_cast<unsigned long long>(seed), r[0].lmmse_mse,
                r[1].lmmse_mse, r[2].lmmse_mse);
  }
  EXPECT_GE(successes, 3);
}

}  // namespace
}  // namespace scatinv

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scatinv/error.hpp"
#include "scatinv/estimator.hpp"
#include "scatinv/filterbank.hpp"
#include "scatinv/image.hpp"
#include "scatinv/operators.hpp"
#include "scatinv/parallel.hpp"
#include "scatinv/scattering.hpp"

namespace scatinv {

enum class InitKind { zero, right_inverse };

struct SolverConfig {
  int outer_iterations = 20;
  int inner_iterations = 50;
  double inner_step = 1.0;
  double backtrack = 0.5;
  int max_backtracks = 40;
  double sufficient_decrease = 1e-4;
  /// Radius of the measurement ball: epsilon_abs + epsilon_rel * ||y||.
  double epsilon_abs = 0.0;
  double epsilon_rel = 0.0;
  InitKind init = InitKind::zero;
  ScatteringOptions scattering;
  double ridge_relative = 1e-6;
  double ridge_floor = 1e-12;
  /// Share regression statistics across locations (stationary processes).
  bool shared_statistics = false;
  int neighborhood = 0;
  unsigned threads = 1;

  double epsilon(const Image& y) const { return epsilon_abs + epsilon_rel * norm(y); }

  void validate() const {
    if (outer_iterations < 1) throw ConfigError("solver: outer_iterations must be >= 1");
    if (inner_iterations < 1) throw ConfigError("solver: inner_iterations must be >= 1");
    if (!(inner_step > 0.0)) throw ConfigError("solver: inner_step must be positive");
    if (!(backtrack > 0.0 && backtrack < 1.0)) throw ConfigError("solver: backtrack must lie in (0, 1)");
    if (max_backtracks < 1) throw ConfigError("solver: max_backtracks must be >= 1");
    if (epsilon_abs < 0.0 || epsilon_rel < 0.0) throw ConfigError("solver: epsilon must be nonnegative");
    if (ridge_relative < 0.0 || ridge_floor < 0.0) throw ConfigError("solver: ridge must be nonnegative");
    if (neighborhood < 0) throw ConfigError("solver: neighborhood must be >= 0");
    if (scattering.max_order < 0 || scattering.max_order > 2) throw ConfigError("solver: max_order must be 0, 1 or 2");
  }
};

/// One outer iteration. For training runs the per-image quantities are
/// aggregated: objectives and MSEs are ensemble means, the residual is the
/// ensemble maximum.
struct OuterRecord {
  int iteration = 0;
  std::vector<double> inner_objective;
  double inner_objective_final = 0.0;
  double measurement_residual = 0.0;
  double epsilon = 0.0;
  double phi_mse = std::numeric_limits<double>::quiet_NaN();
  /// Phi-domain MSE of the regression output G Phi z + h (training only).
  double lmmse_mse = std::numeric_limits<double>::quiet_NaN();
  bool stalled = false;
};

struct IterationTrace {
  std::vector<OuterRecord> records;
};

struct PhiProjection {
  Image u;
  /// Objective at u0 followed by the value after every accepted step.
  std::vector<double> objective;
  double best_objective = 0.0;
  int accepted_steps = 0;
  /// Set when a step found no descent after max_backtracks.
  bool stalled = false;
};

/// Approximately minimizes ||Phi u - target||^2 over the measurement set by
/// projected gradient descent with Armijo backtracking, starting at u0. The
/// step starts at inner_step and doubles after every accepted step. Returns
/// the best iterate (the earliest on ties), passed through
/// enforce_measurements so it lies in the measurement set.
inline PhiProjection project_phi_measurements(const Eigen::VectorXd& target, const ForwardOperator& op,
                                              const Image& y, const Image& u0, const FilterBank& fb,
                                              const SolverConfig& cfg) {
  op.check_image(u0, "project_phi_measurements");
  op.check_measurement(y, "project_phi_measurements");
  const double eps = cfg.epsilon(y);
  const double step_cap = cfg.inner_step * std::ldexp(1.0, 30);

  Image u = u0;
  auto tape = std::make_unique<ScatteringTape>(u, fb, cfg.scattering);
  if (tape->value().values.size() != target.size())
    throw ShapeError("project_phi_measurements: target has " + std::to_string(target.size()) +
                     " entries, scattering layout has " + std::to_string(tape->value().values.size()));
  Eigen::VectorXd residual = tape->value().values - target;
  double f = residual.squaredNorm();

  PhiProjection out;
  out.objective.push_back(f);
  Image best = u;
  double f_best = f;
  double eta = cfg.inner_step;

  for (int it = 0; it < cfg.inner_iterations && f > 0.0; ++it) {
    const Image g = tape->vjp(2.0 * residual);
    if (!g.allFinite()) throw NumericalError("project_phi_measurements: non-finite gradient");
    if (g.abs().maxCoeff() == 0.0) break;
    bool accepted = false;
    for (int b = 0; b < cfg.max_backtracks; ++b) {
      Image cand = op.project_measurements(u - eta * g, y, eps);
      const double slope = dot(g, cand - u);
      auto cand_tape = std::make_unique<ScatteringTape>(cand, fb, cfg.scattering);
      Eigen::VectorXd cand_residual = cand_tape->value().values - target;
      const double fc = cand_residual.squaredNorm();
      if (std::isfinite(fc) && fc <= f && fc <= f + cfg.sufficient_decrease * std::min(slope, 0.0)) {
        u = std::move(cand);
        tape = std::move(cand_tape);
        residual = std::move(cand_residual);
        f = fc;
        accepted = true;
        break;
      }
      eta *= cfg.backtrack;
    }
    if (!accepted) {
      out.stalled = true;
      break;
    }
    ++out.accepted_steps;
    out.objective.push_back(f);
    if (f < f_best) {
      f_best = f;
      best = u;
    }
    eta = std::min(eta / cfg.backtrack, step_cap);
  }
  out.u = op.enforce_measurements(best, y, eps);
  out.best_objective = f_best;
  return out;
}

inline double phi_mse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

inline EstimatorLayout estimator_layout(const ScatteringVector& sv, const SolverConfig& cfg) {
  EstimatorLayout lay;
  lay.shared = cfg.shared_statistics;
  lay.paths = sv.path_count();
  lay.grid_rows = sv.grid_rows();
  lay.grid_cols = sv.grid_cols();
  lay.radius = cfg.neighborhood;
  return lay;
}

/// z^(0): the measurement-set projection of 0, or of the right inverse.
inline Image initial_estimate(const Image& y, const ForwardOperator& op, const SolverConfig& cfg) {
  const Image start = cfg.init == InitKind::zero ? Image::Zero(op.image_rows(), op.image_cols())
                                                 : op.right_inverse(y);
  return op.enforce_measurements(start, y, cfg.epsilon(y));
}

struct Reconstruction {
  Image x_hat;
  Image initial;  // z^(0)
  Image first;    // z^(1)
  IterationTrace trace;
};

/// Alternates the regression step in the scattering domain with the
/// projection onto Phi(A). `truth`, when given, only feeds the trace.
inline Reconstruction reconstruct(const Image& y, const ForwardOperator& op, const FilterBank& fb,
                                  const std::vector<LinearEstimator>& estimators, const SolverConfig& cfg,
                                  const Image* truth = nullptr) {
  cfg.validate();
  if (estimators.empty()) throw ArgumentError("reconstruct: no estimators given");
  const int r = std::min<int>(cfg.outer_iterations, static_cast<int>(estimators.size()));
  const double eps = cfg.epsilon(y);
  Eigen::VectorXd phi_truth;
  if (truth) phi_truth = scatter(*truth, fb, cfg.scattering).values;

  Reconstruction out;
  Image z = initial_estimate(y, op, cfg);
  out.initial = z;
  for (int k = 0; k < r; ++k) {
    const Eigen::VectorXd phi_z = scatter(z, fb, cfg.scattering).values;
    const Eigen::VectorXd target = apply_estimator(estimators[static_cast<std::size_t>(k)], phi_z);
    PhiProjection proj = project_phi_measurements(target, op, y, z, fb, cfg);
    z = std::move(proj.u);
    OuterRecord rec;
    rec.iteration = k + 1;
    rec.inner_objective = std::move(proj.objective);
    rec.inner_objective_final = proj.best_objective;
    rec.measurement_residual = measurement_distance(op, z, y);
    rec.epsilon = eps;
    rec.stalled = proj.stalled;
    if (truth) rec.phi_mse = phi_mse(scatter(z, fb, cfg.scattering).values, phi_truth);
    out.trace.records.push_back(std::move(rec));
    if (k == 0) out.first = z;
  }
  out.x_hat = z;
  return out;
}

struct TrainingResult {
  std::vector<LinearEstimator> estimators;
  IterationTrace trace;
  std::vector<Image> iterates;  // z_i^(r) for every training image
};

/// Runs the outer loop on the whole training ensemble with noiseless
/// measurements y_i = Gamma x_i. Estimator k is fitted on the pairs
/// (Phi x_i, Phi z_i^(k-1)) and then drives the step to z_i^(k).
inline TrainingResult train(const std::vector<Image>& ensemble, const ForwardOperator& op, const FilterBank& fb,
                            const SolverConfig& cfg) {
  cfg.validate();
  if (ensemble.size() < 2) throw ArgumentError("train: the ensemble needs at least two images");
  const std::size_t n = ensemble.size();
  std::vector<Image> ys(n), zs(n);
  std::vector<Eigen::VectorXd> phi_x(n), phi_z(n), targets(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    op.check_image(ensemble[i], "train");
    ys[i] = op.apply(ensemble[i]);
    phi_x[i] = scatter(ensemble[i], fb, cfg.scattering).values;
    zs[i] = initial_estimate(ys[i], op, cfg);
    phi_z[i] = scatter(zs[i], fb, cfg.scattering).values;
  });
  const EstimatorLayout layout = estimator_layout(scatter(ensemble.front(), fb, cfg.scattering), cfg);

  TrainingResult out;
  for (int k = 0; k < cfg.outer_iterations; ++k) {
    LinearEstimator est = layout.shared
                              ? fit_shared_lmmse(phi_x, phi_z, layout, cfg.ridge_relative, cfg.ridge_floor)
                              : fit_dense_lmmse(phi_x, phi_z, layout, cfg.ridge_relative, cfg.ridge_floor);
    est.iteration_tag = k + 1;

    std::vector<double> objective(n), residual(n), mse_after(n), mse_lmmse(n);
    std::vector<std::vector<double>> inner(n);
    std::vector<char> stalled(n, 0);
    parallel_for(n, cfg.threads, [&](std::size_t i) {
      targets[i] = apply_estimator(est, phi_z[i]);
      mse_lmmse[i] = phi_mse(targets[i], phi_x[i]);
      PhiProjection proj = project_phi_measurements(targets[i], op, ys[i], zs[i], fb, cfg);
      zs[i] = std::move(proj.u);
      phi_z[i] = scatter(zs[i], fb, cfg.scattering).values;
      objective[i] = proj.best_objective;
      inner[i] = std::move(proj.objective);
      residual[i] = measurement_distance(op, zs[i], ys[i]);
      mse_after[i] = phi_mse(phi_z[i], phi_x[i]);
      stalled[i] = proj.stalled ? 1 : 0;
    });

    OuterRecord rec;
    rec.iteration = k + 1;
    const double inv_n = 1.0 / static_cast<double>(n);
    std::size_t longest = 0;
    for (const auto& v : inner) longest = std::max(longest, v.size());
    rec.inner_objective.assign(longest, 0.0);
    for (const auto& v : inner)
      for (std::size_t s = 0; s < longest; ++s) rec.inner_objective[s] += inv_n * (v.empty() ? 0.0 : v[std::min(s, v.size() - 1)]);
    for (std::size_t i = 0; i < n; ++i) {
      rec.inner_objective_final += inv_n * objective[i];
      rec.measurement_residual = std::max(rec.measurement_residual, residual[i]);
      rec.epsilon = std::max(rec.epsilon, cfg.epsilon(ys[i]));
      rec.stalled = rec.stalled || stalled[i] != 0;
    }
    rec.phi_mse = 0.0;
    rec.lmmse_mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      rec.phi_mse += inv_n * mse_after[i];
      rec.lmmse_mse += inv_n * mse_lmmse[i];
    }
    out.trace.records.push_back(std::move(rec));
    out.estimators.push_back(std::move(est));
  }
  out.iterates = std::move(zs);
  return out;
}

}  // namespace scatinv

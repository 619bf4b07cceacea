#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "scatinv/error.hpp"
#include "scatinv/image.hpp"
#include "scatinv/operators.hpp"

namespace scatinv {

enum class Regularizer { l1, tv };

struct BaselineConfig {
  Regularizer regularizer = Regularizer::l1;
  double lambda = 0.0;
  int iterations = 500;
  bool box = false;
  double box_lo = 0.0;
  double box_hi = 1.0;
  /// Dual iterations of the TV proximal step.
  int tv_inner_iterations = 20;
  /// Upper bound on ||Gamma||^2; 0 means estimate it by power iteration.
  double lipschitz = 0.0;

  void validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("baseline: lambda must be >= 0");
    if (iterations < 1) throw ConfigError("baseline: iterations must be >= 1");
    if (box && !(box_lo < box_hi)) throw ConfigError("baseline: empty box");
    if (tv_inner_iterations < 1) throw ConfigError("baseline: tv_inner_iterations must be >= 1");
  }
};

struct BaselineResult {
  Image solution;
  std::vector<double> objective;  // per iteration, starting at the initial point
};

inline Image soft_threshold(const Image& v, double t) {
  return v.sign() * (v.abs() - t).max(0.0);
}

/// ||Gamma||^2 by power iteration on Gamma^T Gamma, inflated by 5%.
inline double operator_norm_squared(const ForwardOperator& op, int iterations = 60) {
  Image v = Image::Constant(op.image_rows(), op.image_cols(), 1.0);
  // A deterministic non-constant component so the iteration does not start
  // orthogonal to the top eigenvector of operators that kill constants.
  for (long i = 0; i < v.size(); ++i) v.data()[i] += 0.5 * std::sin(0.7 * static_cast<double>(i));
  v /= norm(v);
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Image w = op.adjoint(op.apply(v));
    lambda = norm(w);
    if (lambda == 0.0) throw NumericalError("operator_norm_squared: operator is zero");
    v = w / lambda;
  }
  return 1.05 * lambda;
}

namespace detail {

/// Periodic forward differences.
inline void gradient(const Image& z, Image& dx, Image& dy) {
  const long rows = z.rows(), cols = z.cols();
  dx.resize(rows, cols);
  dy.resize(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) {
      dx(r, c) = z(r, (c + 1) % cols) - z(r, c);
      dy(r, c) = z((r + 1) % rows, c) - z(r, c);
    }
}

/// Adjoint of `gradient` (minus the divergence).
inline Image gradient_adjoint(const Image& px, const Image& py) {
  const long rows = px.rows(), cols = px.cols();
  Image out(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c)
      out(r, c) = px(r, (c + cols - 1) % cols) - px(r, c) + py((r + rows - 1) % rows, c) - py(r, c);
  return out;
}

}  // namespace detail

/// Isotropic total variation with periodic forward differences.
inline double total_variation(const Image& z) {
  Image dx, dy;
  detail::gradient(z, dx, dy);
  return (dx.square() + dy.square()).sqrt().sum();
}

/// Fast gradient projection on the dual of
/// argmin_z ||z - b||^2 + 2 mu TV(z) over the box (or unconstrained).
/// The dual variables (px, py) are updated in place for warm starts.
inline Image tv_prox(const Image& b, double mu, const BaselineConfig& cfg, Image& px, Image& py) {
  auto clamp = [&](Image v) {
    if (cfg.box) v = v.max(cfg.box_lo).min(cfg.box_hi);
    return v;
  };
  if (mu <= 0.0) return clamp(b);
  if (px.rows() != b.rows() || px.cols() != b.cols()) {
    px = Image::Zero(b.rows(), b.cols());
    py = Image::Zero(b.rows(), b.cols());
  }
  Image rx = px, ry = py;
  double t = 1.0;
  Image dx, dy;
  for (int k = 0; k < cfg.tv_inner_iterations; ++k) {
    const Image x = clamp(b - mu * detail::gradient_adjoint(rx, ry));
    detail::gradient(x, dx, dy);
    Image qx = rx + dx / (8.0 * mu), qy = ry + dy / (8.0 * mu);
    const Image scale = (qx.square() + qy.square()).sqrt().max(1.0);
    qx /= scale;
    qy /= scale;
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    rx = qx + ((t - 1.0) / tn) * (qx - px);
    ry = qy + ((t - 1.0) / tn) * (qy - py);
    px = std::move(qx);
    py = std::move(qy);
    t = tn;
  }
  return clamp(b - mu * detail::gradient_adjoint(px, py));
}

namespace detail {

/// FISTA with function-value restart for F(u) = fidelity_weight * ||Gamma u - y||^2 + g(u),
/// with prox(v, step) = argmin_u g(u) + ||u - v||^2 / (2 step).
/// Steps are accepted when F(z) - F(x) <= 0, evaluated from d = z - x as
/// w (||Gamma d||^2 + 2 <Gamma d, Gamma x - y>) + g(z) - g(x) so a large
/// optimal residual does not swamp the comparison.
template <class Regularizer, class Prox>
BaselineResult monotone_fista(const Image& y, const ForwardOperator& op, const BaselineConfig& cfg,
                              double fidelity_weight, Regularizer&& regularizer, Prox&& prox) {
  op.check_measurement(y, "baseline");
  double lip = 2.0 * fidelity_weight * (cfg.lipschitz > 0.0 ? cfg.lipschitz : operator_norm_squared(op));
  Image x = prox(Image::Zero(op.image_rows(), op.image_cols()), 1.0 / lip);
  Image rx = op.apply(x) - y;
  double gx = regularizer(x);
  Image v = x;
  double t = 1.0;
  BaselineResult out;
  out.objective.push_back(fidelity_weight * rx.square().sum() + gx);
  for (int it = 0; it < cfg.iterations; ++it) {
    const Image grad = 2.0 * fidelity_weight * op.adjoint(op.apply(v) - y);
    Image z = prox(v - grad / lip, 1.0 / lip);
    Image gd = op.apply(z - x);
    double gz = regularizer(z);
    double delta = fidelity_weight * (gd.square().sum() + 2.0 * dot(gd, rx)) + (gz - gx);
    int guard = 0;
    while (!std::isfinite(delta) && guard++ < 30) {
      lip *= 2.0;
      z = prox(v - grad / lip, 1.0 / lip);
      gd = op.apply(z - x);
      gz = regularizer(z);
      delta = fidelity_weight * (gd.square().sum() + 2.0 * dot(gd, rx)) + (gz - gx);
    }
    if (!std::isfinite(delta)) throw NumericalError("baseline: iterates diverged");
    if (delta <= 0.0) {
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      v = z + ((t - 1.0) / tn) * (z - x);
      x = std::move(z);
      rx = op.apply(x) - y;
      gx = gz;
      t = tn;
    } else {
      // Restart the momentum from the last accepted iterate.
      v = x;
      t = 1.0;
    }
    out.objective.push_back(fidelity_weight * rx.square().sum() + gx);
  }
  out.solution = std::move(x);
  return out;
}

}  // namespace detail

/// argmin 1/2 ||y - Gamma u||^2 + lambda ||u||_1 (optionally over the box) by
/// monotone FISTA with the soft-threshold prox.
inline BaselineResult solve_l1(const Image& y, const ForwardOperator& op, const BaselineConfig& cfg) {
  cfg.validate();
  auto prox = [&](const Image& v, double step) {
    Image u = soft_threshold(v, cfg.lambda * step);
    if (cfg.box) u = u.max(cfg.box_lo).min(cfg.box_hi);
    return u;
  };
  auto penalty = [&](const Image& u) { return cfg.lambda * u.abs().sum(); };
  return detail::monotone_fista(y, op, cfg, 0.5, penalty, prox);
}

/// argmin ||y - Gamma z||^2 + lambda TV(z) (optionally over the box) by
/// monotone FISTA whose proximal step is solved by fast gradient projection.
inline BaselineResult solve_tv(const Image& y, const ForwardOperator& op, const BaselineConfig& cfg) {
  cfg.validate();
  Image px, py;
  auto prox = [&](const Image& v, double step) { return tv_prox(v, cfg.lambda * step, cfg, px, py); };
  auto penalty = [&](const Image& z) { return cfg.lambda * total_variation(z); };
  return detail::monotone_fista(y, op, cfg, 1.0, penalty, prox);
}

inline BaselineResult solve_baseline(const Image& y, const ForwardOperator& op, const BaselineConfig& cfg) {
  return cfg.regularizer == Regularizer::l1 ? solve_l1(y, op, cfg) : solve_tv(y, op, cfg);
}

}  // namespace scatinv

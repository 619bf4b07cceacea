#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "scatinv/baselines.hpp"
#include "scatinv/config.hpp"
#include "scatinv/error.hpp"
#include "scatinv/filterbank.hpp"
#include "scatinv/io.hpp"
#include "scatinv/metrics.hpp"
#include "scatinv/operators.hpp"
#include "scatinv/parallel.hpp"
#include "scatinv/processes.hpp"
#include "scatinv/solver.hpp"

namespace scatinv::pipeline {

namespace fs = std::filesystem;

struct RunOptions {
  unsigned threads = 1;
  std::ostream* log = nullptr;
};

/// Stream 0 draws training realizations, stream 1 test realizations.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint32_t stream, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32), stream, index};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline std::string item_name(const std::string& prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%03d", prefix.c_str(), i);
  return buf;
}

inline fs::path data_dir(const ExperimentConfig& c) { return c.output / "data"; }
inline fs::path models_dir(const ExperimentConfig& c) { return c.output / "models"; }
inline fs::path recon_dir(const ExperimentConfig& c) { return c.output / "recon"; }
inline fs::path baseline_dir(const ExperimentConfig& c) { return c.output / "baseline"; }
inline fs::path eval_dir(const ExperimentConfig& c) { return c.output / "eval"; }
inline fs::path report_dir(const ExperimentConfig& c) { return c.output / "report"; }

inline fs::path estimator_path(const ExperimentConfig& c, int k) {
  return models_dir(c) / (item_name("estimator", k) + ".est");
}

/// The panel set written for every test image.
inline const std::vector<std::string>& panel_names() {
  static const std::vector<std::string> names = {"original", "projection", "iter1", "final"};
  return names;
}

namespace detail {

inline void note(const RunOptions& opts, const std::string& msg) {
  if (opts.log) *opts.log << msg << '\n';
}

inline void write_provenance(const fs::path& dir, const ExperimentConfig& c) {
  io::write_text(dir / "config.ini", to_ini(c));
}

inline void save_image_pair(const fs::path& stem, const Image& img, double lo = 0.0, double hi = 0.0) {
  io::write_image(fs::path(stem).concat(".img"), img);
  io::write_pgm(fs::path(stem).concat(".pgm"), img, lo, hi);
}

inline Image sample_item(const ExperimentConfig& c, std::uint32_t stream, int i) {
  ProcessSpec spec = c.process;
  spec.seed = derive_seed(c.seed, stream, static_cast<std::uint32_t>(i));
  return sample(spec);
}

inline void write_measurement(const fs::path& path, const ForwardOperator& op, const Image& y) {
  if (const auto* radon = dynamic_cast<const Radon*>(&op)) {
    io::write_sinogram(path, Sinogram{radon->angles(), radon->offsets(), y});
  } else {
    io::write_image(path, y);
  }
}

inline Image read_measurement(const fs::path& path, const ForwardOperator& op) {
  Image y;
  if (const auto* radon = dynamic_cast<const Radon*>(&op)) {
    const Sinogram s = io::read_sinogram(path);
    if (s.angles != radon->angles() || s.offsets != radon->offsets())
      throw ConfigError(path.string() + ": sinogram geometry does not match the configured operator");
    y = s.values;
  } else {
    y = io::read_image(path);
  }
  const MeasurementShape shape = op.measurement_shape();
  if (y.rows() != shape.rows || y.cols() != shape.cols)
    throw ConfigError(path.string() + ": measurement shape does not match the configured operator");
  return y;
}

inline std::vector<Image> read_set(const ExperimentConfig& c, const std::string& prefix, int n) {
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) {
    Image img = io::read_image(data_dir(c) / (item_name(prefix, i) + ".img"));
    if (img.rows() != c.size() || img.cols() != c.size())
      throw ConfigError(item_name(prefix, i) + ": image size does not match the configured process");
    out.push_back(std::move(img));
  }
  return out;
}

inline SolverConfig solver_config(const ExperimentConfig& c, unsigned threads) {
  SolverConfig s = c.solver;
  s.threads = threads;
  return s;
}

inline FilterBank filter_bank(const ExperimentConfig& c) { return build_filter_bank(c.size(), c.size(), c.J, c.K); }

inline void require_dir(const fs::path& dir, const std::string& what) {
  if (!fs::is_directory(dir) || fs::is_empty(dir))
    throw MissingInputError("no " + what + " found in " + dir.string() + "; run the earlier stages first");
}

}  // namespace detail

/// Writes the train and test realizations, the test measurements and a copy
/// of the configuration.
inline void cmd_generate(const ExperimentConfig& c, const RunOptions& opts = {}) {
  const fs::path dir = data_dir(c);
  fs::create_directories(dir);
  const auto op = c.op.make(c.size());
  detail::note(opts, "generate: " + std::to_string(c.n_train) + " train, " + std::to_string(c.n_test) +
                         " test realizations of " + to_string(c.process.kind));
  parallel_for(static_cast<std::size_t>(c.n_train), opts.threads, [&](std::size_t i) {
    const Image x = detail::sample_item(c, 0, static_cast<int>(i));
    detail::save_image_pair(dir / item_name("train", static_cast<int>(i)), x);
  });
  parallel_for(static_cast<std::size_t>(c.n_test), opts.threads, [&](std::size_t i) {
    const Image x = detail::sample_item(c, 1, static_cast<int>(i));
    const std::string name = item_name("test", static_cast<int>(i));
    detail::save_image_pair(dir / name, x);
    detail::write_measurement(dir / (name + ".meas"), *op, op->apply(x));
  });
  detail::write_provenance(dir, c);
}

/// Runs the outer loop on the training set and stores one estimator per
/// outer iteration plus the training trace.
inline void cmd_train(const ExperimentConfig& c, const RunOptions& opts = {}) {
  detail::require_dir(data_dir(c), "realizations");
  const std::vector<Image> ensemble = detail::read_set(c, "train", c.n_train);
  const auto op = c.op.make(c.size());
  const FilterBank fb = detail::filter_bank(c);
  detail::note(opts, "train: " + std::to_string(c.solver.outer_iterations) + " outer iterations on " +
                         std::to_string(ensemble.size()) + " images");
  const TrainingResult tr = train(ensemble, *op, fb, detail::solver_config(c, opts.threads));
  const fs::path dir = models_dir(c);
  fs::create_directories(dir);
  std::vector<fs::path> stale;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".est") stale.push_back(entry.path());
  for (const fs::path& p : stale) fs::remove(p);
  for (std::size_t k = 0; k < tr.estimators.size(); ++k)
    io::write_estimator(estimator_path(c, static_cast<int>(k) + 1), tr.estimators[k]);
  io::write_text(dir / "train_trace.csv", io::trace_csv(tr.trace, true));
  detail::write_provenance(dir, c);
}

inline std::vector<LinearEstimator> load_estimators(const ExperimentConfig& c) {
  std::vector<LinearEstimator> out;
  for (int k = 1; k <= c.solver.outer_iterations; ++k) {
    const fs::path p = estimator_path(c, k);
    if (!fs::exists(p)) break;
    out.push_back(io::read_estimator(p));
  }
  if (out.empty()) throw MissingInputError("no estimator files in " + models_dir(c).string() + "; run train first");
  return out;
}

/// Reconstructs every test image and writes the four panels and the trace.
inline void cmd_reconstruct(const ExperimentConfig& c, const RunOptions& opts = {}) {
  detail::require_dir(data_dir(c), "realizations");
  const std::vector<LinearEstimator> estimators = load_estimators(c);
  const std::vector<Image> truth = detail::read_set(c, "test", c.n_test);
  const auto op = c.op.make(c.size());
  const FilterBank fb = detail::filter_bank(c);
  // Items run in parallel; each solve is single-threaded.
  const SolverConfig cfg = detail::solver_config(c, 1);
  detail::note(opts, "reconstruct: " + std::to_string(truth.size()) + " test images, " +
                         std::to_string(estimators.size()) + " estimators");
  parallel_for(truth.size(), opts.threads, [&](std::size_t i) {
    const std::string name = item_name("test", static_cast<int>(i));
    const Image y = detail::read_measurement(data_dir(c) / (name + ".meas"), *op);
    const Reconstruction rec = reconstruct(y, *op, fb, estimators, cfg, &truth[i]);
    const fs::path dir = recon_dir(c) / name;
    fs::create_directories(dir);
    const double lo = truth[i].minCoeff(), hi = truth[i].maxCoeff();
    const Image panels[] = {truth[i], op->right_inverse(y), rec.first, rec.x_hat};
    for (std::size_t p = 0; p < panel_names().size(); ++p) detail::save_image_pair(dir / panel_names()[p], panels[p], lo, hi);
    io::write_text(dir / "trace.csv", io::trace_csv(rec.trace));
  });
  detail::write_provenance(recon_dir(c), c);
}

/// Regularization weight for one measurement: the relative form scales with
/// ||Gamma^T y||_inf, the smallest lambda for which the l1 solution is zero.
inline double baseline_lambda(const BaselineSpec& b, const ForwardOperator& op, const Image& y) {
  if (b.lambda_relative > 0.0) return b.lambda_relative * op.adjoint(y).abs().maxCoeff();
  return b.config.lambda;
}

inline void cmd_baseline(const ExperimentConfig& c, const RunOptions& opts = {}) {
  detail::require_dir(data_dir(c), "realizations");
  if (c.baselines.empty()) throw ConfigError("baseline: no methods configured ([baseline] methods)");
  const auto op = c.op.make(c.size());
  const double lipschitz = operator_norm_squared(*op);
  const fs::path dir = baseline_dir(c);
  fs::create_directories(dir);
  for (const BaselineSpec& b : c.baselines) {
    detail::note(opts, "baseline: " + b.name + " on " + std::to_string(c.n_test) + " test images");
    parallel_for(static_cast<std::size_t>(c.n_test), opts.threads, [&](std::size_t i) {
      const std::string name = item_name("test", static_cast<int>(i));
      const Image y = detail::read_measurement(data_dir(c) / (name + ".meas"), *op);
      BaselineConfig cfg = b.config;
      cfg.lambda = baseline_lambda(b, *op, y);
      cfg.lipschitz = lipschitz;
      const BaselineResult res = solve_baseline(y, *op, cfg);
      const Image truth = io::read_image(data_dir(c) / (name + ".img"));
      detail::save_image_pair(dir / (name + "_" + b.name), res.solution, truth.minCoeff(), truth.maxCoeff());
      io::write_text(dir / (name + "_" + b.name + "_objective.csv"), io::objective_csv(res.objective));
    });
  }
  detail::write_provenance(dir, c);
}

/// One row of the evaluation: a set of images compared with the originals.
struct SetMetrics {
  std::string set;
  double mse = 0.0;
  KurtosisReport kurtosis;
  std::vector<Image> images;
};

/// Loads every reconstruction set (panels and configured baselines) from the
/// lossless files and computes the pooled metrics, in a fixed order.
inline std::vector<SetMetrics> collect_sets(const ExperimentConfig& c) {
  detail::require_dir(recon_dir(c), "reconstructions");
  std::vector<std::string> sets = panel_names();
  for (const BaselineSpec& b : c.baselines) sets.push_back(b.name);
  std::vector<SetMetrics> out;
  for (const std::string& set : sets) {
    SetMetrics m;
    m.set = set;
    const bool baseline = std::find(panel_names().begin(), panel_names().end(), set) == panel_names().end();
    for (int i = 0; i < c.n_test; ++i) {
      const std::string name = item_name("test", i);
      const fs::path p = baseline ? baseline_dir(c) / (name + "_" + set + ".img") : recon_dir(c) / name / (set + ".img");
      m.images.push_back(io::read_image(p));
    }
    out.push_back(std::move(m));
  }
  const std::vector<Image>& original = out.front().images;
  for (SetMetrics& m : out) {
    double total = 0.0;
    for (std::size_t i = 0; i < m.images.size(); ++i) total += mse(m.images[i], original[i]);
    m.mse = total / static_cast<double>(m.images.size());
    m.kurtosis = image_excess_kurtosis(m.images, c.metrics);
  }
  return out;
}

/// Detailed metrics per set plus the measurement residual of every final
/// reconstruction.
inline void cmd_evaluate(const ExperimentConfig& c, const RunOptions& opts = {}) {
  const std::vector<SetMetrics> sets = collect_sets(c);
  detail::note(opts, "evaluate: " + std::to_string(sets.size()) + " image sets");
  std::ostringstream csv;
  csv << "set,mse,excess_kurtosis,beta_hat,p,n,condition,ridge\n";
  for (const SetMetrics& m : sets)
    csv << m.set << ',' << io::format_double(m.mse) << ',' << io::format_double(m.kurtosis.excess) << ','
        << io::format_double(m.kurtosis.beta_hat) << ',' << m.kurtosis.p << ',' << m.kurtosis.n << ','
        << io::format_double(m.kurtosis.condition) << ',' << io::format_double(m.kurtosis.ridge) << '\n';
  const fs::path dir = eval_dir(c);
  io::write_text(dir / "evaluation.csv", csv.str());

  const auto op = c.op.make(c.size());
  std::ostringstream res;
  res << "item,residual,epsilon,feasible\n";
  const std::vector<Image>& finals = sets[3].images;
  for (int i = 0; i < c.n_test; ++i) {
    const std::string name = item_name("test", i);
    const Image y = detail::read_measurement(data_dir(c) / (name + ".meas"), *op);
    const double r = measurement_distance(*op, finals[static_cast<std::size_t>(i)], y);
    const double eps = c.solver.epsilon(y);
    res << name << ',' << io::format_double(r) << ',' << io::format_double(eps) << ','
        << (r <= eps + 1e-12 * std::max(1.0, norm(y)) ? "true" : "false") << '\n';
  }
  io::write_text(dir / "measurement.csv", res.str());
  detail::write_provenance(dir, c);
}

/// Horizontal strip of equally sized panels separated by `gap` pixels at
/// the top of the range.
inline Image montage(const std::vector<Image>& panels, long gap = 2, double fill = 1.0) {
  if (panels.empty()) throw ArgumentError("montage: no panels");
  const long rows = panels.front().rows(), cols = panels.front().cols();
  const long n = static_cast<long>(panels.size());
  Image out = Image::Constant(rows, n * cols + (n - 1) * gap, fill);
  for (long i = 0; i < n; ++i) {
    require_same_shape(panels.front(), panels[static_cast<std::size_t>(i)], "montage");
    out.block(0, i * (cols + gap), rows, cols) = panels[static_cast<std::size_t>(i)];
  }
  return out;
}

/// Table of figures of merit (one row per image set), cokurtosis panels and
/// a montage of the panels of every test image.
inline void cmd_report(const ExperimentConfig& c, const RunOptions& opts = {}) {
  const std::vector<SetMetrics> sets = collect_sets(c);
  detail::note(opts, "report: " + std::to_string(sets.size()) + " rows");
  std::vector<io::ReportRow> rows;
  for (const SetMetrics& m : sets) rows.push_back({c.name + " " + m.set, m.mse, m.kurtosis.excess});
  const fs::path dir = report_dir(c);
  io::write_text(dir / "report.csv", io::report_csv(rows));

  for (const SetMetrics& m : sets) {
    try {
      const Image panel = cokurtosis_panel(extract_patches(m.images, c.metrics.patch, c.metrics.stride));
      detail::save_image_pair(dir / ("cokurtosis_" + m.set), panel);
    } catch (const ArgumentError& e) {
      // Constant patch coordinates have no standardized moments.
      detail::note(opts, "report: no cokurtosis panel for " + m.set + " (" + e.what() + ")");
    }
  }
  for (int i = 0; i < c.n_test; ++i) {
    const Image& original = sets.front().images[static_cast<std::size_t>(i)];
    const double lo = original.minCoeff(), hi = original.maxCoeff();
    std::vector<Image> panels;
    for (const SetMetrics& m : sets) panels.push_back(m.images[static_cast<std::size_t>(i)]);
    io::write_pgm(dir / ("montage_" + item_name("test", i) + ".pgm"), montage(panels, 2, hi), lo, hi);
  }
  detail::write_provenance(dir, c);
}

/// All stages in order.
inline void run_all(const ExperimentConfig& c, const RunOptions& opts = {}) {
  cmd_generate(c, opts);
  cmd_train(c, opts);
  cmd_reconstruct(c, opts);
  if (!c.baselines.empty()) cmd_baseline(c, opts);
  cmd_evaluate(c, opts);
  cmd_report(c, opts);
}

}  // namespace scatinv::pipeline

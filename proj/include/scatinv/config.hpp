#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "scatinv/baselines.hpp"
#include "scatinv/error.hpp"
#include "scatinv/io.hpp"
#include "scatinv/metrics.hpp"
#include "scatinv/operators.hpp"
#include "scatinv/processes.hpp"
#include "scatinv/solver.hpp"

namespace scatinv {

enum class OperatorKind { super_resolution, radon };

struct OperatorSpec {
  OperatorKind kind = OperatorKind::super_resolution;
  int factor = 4;
  SrKernel kernel;
  double angle_start = 0.0;
  double angle_stop = 89.0;
  double angle_step = 1.0;
  RadonOptions radon;

  std::unique_ptr<ForwardOperator> make(long size) const {
    if (kind == OperatorKind::super_resolution) return std::make_unique<SuperResolution>(size, size, factor, kernel);
    return std::make_unique<Radon>(size, angle_range(angle_start, angle_stop, angle_step), radon);
  }
};

struct BaselineSpec {
  std::string name;  // "l1" or "tv"
  BaselineConfig config;
  /// When positive, lambda = lambda_relative * ||Gamma^T y||_inf per image.
  double lambda_relative = 0.0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::filesystem::path output = "out";
  int n_train = 10;
  int n_test = 3;
  std::uint64_t seed = 1;
  ProcessSpec process;
  OperatorSpec op;
  int J = 3;
  int K = 4;
  SolverConfig solver;
  std::vector<BaselineSpec> baselines;
  PatchOptions metrics;

  long size() const { return process.kind == ProcessKind::ising ? process.ising.size : process.cox.size; }
};

namespace detail {

using boost::property_tree::ptree;

inline const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"experiment", {"name", "output", "n_train", "n_test", "seed"}},
      {"process",
       {"kind", "size", "temperature", "sweeps", "init", "smoothing", "base_rate", "log_std", "constant_intensity",
        "splat"}},
      {"operator",
       {"kind", "factor", "kernel", "sigma", "angle_start", "angle_stop", "angle_step", "box_lo", "box_hi",
        "projection_steps", "max_steps"}},
      {"scattering", {"J", "K", "max_order", "modulus_smoothing"}},
      {"solver",
       {"outer_iterations", "inner_iterations", "inner_step", "backtrack", "max_backtracks", "sufficient_decrease",
        "epsilon_abs", "epsilon_rel", "init", "ridge_relative", "ridge_floor", "shared_statistics", "neighborhood"}},
      {"baseline",
       {"methods", "l1_lambda", "l1_lambda_relative", "l1_iterations", "l1_box", "tv_lambda", "tv_iterations",
        "tv_box", "tv_inner_iterations"}},
      {"metrics", {"patch", "stride", "ridge_fallback", "ridge_relative", "max_condition"}},
  };
  return keys;
}

template <class T>
T get(const ptree& pt, const std::string& path, T fallback) {
  const auto node = pt.get_child_optional(ptree::path_type(path, '.'));
  if (!node) return fallback;
  const std::string raw = node->get_value<std::string>();
  if constexpr (std::is_same_v<T, std::string>) {
    return raw;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (raw == "true" || raw == "1" || raw == "yes") return true;
    if (raw == "false" || raw == "0" || raw == "no") return false;
    throw ConfigError("config: '" + path + "' must be a boolean, got '" + raw + "'");
  } else {
    try {
      if constexpr (std::is_floating_point_v<T>) {
        return static_cast<T>(io::parse_double(raw));
      } else {
        return static_cast<T>(io::parse_long(raw));
      }
    } catch (const FormatError&) {
      throw ConfigError("config: '" + path + "' has invalid value '" + raw + "'");
    }
  }
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace detail

/// Applies "section.key=value" overrides on top of a parsed INI tree.
inline void apply_overrides(boost::property_tree::ptree& pt, const std::vector<std::string>& overrides) {
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || o.find('.') > eq) throw ConfigError("override '" + o + "' is not section.key=value");
    pt.put(boost::property_tree::ptree::path_type(o.substr(0, eq), '.'), o.substr(eq + 1));
  }
}

inline ExperimentConfig parse_config(const boost::property_tree::ptree& pt) {
  using detail::get;
  for (const auto& [section, body] : pt) {
    const auto it = detail::known_keys().find(section);
    if (it == detail::known_keys().end()) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
  }

  ExperimentConfig c;
  c.name = get<std::string>(pt, "experiment.name", c.name);
  if (c.name.empty() || c.name.find(',') != std::string::npos) throw ConfigError("config: bad experiment name");
  c.output = get<std::string>(pt, "experiment.output", c.output.string());
  c.n_train = get<int>(pt, "experiment.n_train", c.n_train);
  c.n_test = get<int>(pt, "experiment.n_test", c.n_test);
  c.seed = get<std::uint64_t>(pt, "experiment.seed", c.seed);
  if (c.n_train < 2) throw ConfigError("config: n_train must be >= 2");
  if (c.n_test < 1) throw ConfigError("config: n_test must be >= 1");

  const std::string kind = get<std::string>(pt, "process.kind", "ising");
  if (kind == "ising") c.process.kind = ProcessKind::ising;
  else if (kind == "cox") c.process.kind = ProcessKind::cox;
  else throw ConfigError("config: process.kind must be ising or cox");
  const long size = get<long>(pt, "process.size", 64);
  c.process.ising.size = size;
  c.process.cox.size = size;
  c.process.ising.temperature = get<double>(pt, "process.temperature", c.process.ising.temperature);
  c.process.ising.sweeps = get<int>(pt, "process.sweeps", c.process.ising.sweeps);
  const std::string init = get<std::string>(pt, "process.init", "random");
  if (init == "random") c.process.ising.init = IsingInit::random;
  else if (init == "up") c.process.ising.init = IsingInit::up;
  else if (init == "down") c.process.ising.init = IsingInit::down;
  else throw ConfigError("config: process.init must be random, up or down");
  c.process.cox.smoothing = get<double>(pt, "process.smoothing", c.process.cox.smoothing);
  c.process.cox.base_rate = get<double>(pt, "process.base_rate", c.process.cox.base_rate);
  c.process.cox.log_std = get<double>(pt, "process.log_std", c.process.cox.log_std);
  c.process.cox.constant_intensity = get<bool>(pt, "process.constant_intensity", false);
  const std::string splat = get<std::string>(pt, "process.splat", "delta");
  if (splat == "delta") c.process.cox.splat = SplatKernel::delta;
  else if (splat == "bilinear") c.process.cox.splat = SplatKernel::bilinear;
  else throw ConfigError("config: process.splat must be delta or bilinear");
  c.process.validate();
  if (!is_power_of_two(size)) throw ConfigError("config: process.size must be a power of two");

  const std::string op = get<std::string>(pt, "operator.kind", "sr");
  if (op == "sr") c.op.kind = OperatorKind::super_resolution;
  else if (op == "radon") c.op.kind = OperatorKind::radon;
  else throw ConfigError("config: operator.kind must be sr or radon");
  c.op.factor = get<int>(pt, "operator.factor", c.op.factor);
  const std::string kernel = get<std::string>(pt, "operator.kernel", "ideal");
  if (kernel == "ideal") c.op.kernel = SrKernel::ideal();
  else if (kernel == "gaussian") c.op.kernel = SrKernel::gaussian(get<double>(pt, "operator.sigma", 1.0));
  else throw ConfigError("config: operator.kernel must be ideal or gaussian");
  c.op.angle_start = get<double>(pt, "operator.angle_start", c.op.angle_start);
  c.op.angle_stop = get<double>(pt, "operator.angle_stop", c.op.angle_stop);
  c.op.angle_step = get<double>(pt, "operator.angle_step", c.op.angle_step);
  c.op.radon.box_lo = get<double>(pt, "operator.box_lo", c.op.radon.box_lo);
  c.op.radon.box_hi = get<double>(pt, "operator.box_hi", c.op.radon.box_hi);
  c.op.radon.projection_steps = get<int>(pt, "operator.projection_steps", c.op.radon.projection_steps);
  c.op.radon.max_steps = get<int>(pt, "operator.max_steps", c.op.radon.max_steps);

  c.J = get<int>(pt, "scattering.J", c.J);
  c.K = get<int>(pt, "scattering.K", c.K);
  if (c.J < 1 || c.K < 1 || c.J > log2_exact(size)) throw ConfigError("config: invalid scattering J or K");
  SolverConfig& s = c.solver;
  s.scattering.max_order = get<int>(pt, "scattering.max_order", s.scattering.max_order);
  s.scattering.modulus_smoothing = get<double>(pt, "scattering.modulus_smoothing", s.scattering.modulus_smoothing);
  s.outer_iterations = get<int>(pt, "solver.outer_iterations", s.outer_iterations);
  s.inner_iterations = get<int>(pt, "solver.inner_iterations", s.inner_iterations);
  s.inner_step = get<double>(pt, "solver.inner_step", s.inner_step);
  s.backtrack = get<double>(pt, "solver.backtrack", s.backtrack);
  s.max_backtracks = get<int>(pt, "solver.max_backtracks", s.max_backtracks);
  s.sufficient_decrease = get<double>(pt, "solver.sufficient_decrease", s.sufficient_decrease);
  s.epsilon_abs = get<double>(pt, "solver.epsilon_abs", s.epsilon_abs);
  s.epsilon_rel = get<double>(pt, "solver.epsilon_rel", s.epsilon_rel);
  const std::string sinit = get<std::string>(pt, "solver.init", "zero");
  if (sinit == "zero") s.init = InitKind::zero;
  else if (sinit == "right_inverse") s.init = InitKind::right_inverse;
  else throw ConfigError("config: solver.init must be zero or right_inverse");
  s.ridge_relative = get<double>(pt, "solver.ridge_relative", s.ridge_relative);
  s.ridge_floor = get<double>(pt, "solver.ridge_floor", s.ridge_floor);
  s.shared_statistics = get<bool>(pt, "solver.shared_statistics", s.shared_statistics);
  s.neighborhood = get<int>(pt, "solver.neighborhood", s.neighborhood);
  s.validate();

  for (const std::string& m : detail::split_list(get<std::string>(pt, "baseline.methods", ""))) {
    BaselineSpec b;
    b.name = m;
    if (m == "l1") {
      b.config.regularizer = Regularizer::l1;
      b.config.lambda = get<double>(pt, "baseline.l1_lambda", 0.0);
      b.lambda_relative = get<double>(pt, "baseline.l1_lambda_relative", 0.0);
      b.config.iterations = get<int>(pt, "baseline.l1_iterations", 2000);
      b.config.box = get<bool>(pt, "baseline.l1_box", false);
    } else if (m == "tv") {
      b.config.regularizer = Regularizer::tv;
      b.config.lambda = get<double>(pt, "baseline.tv_lambda", 0.0);
      b.config.iterations = get<int>(pt, "baseline.tv_iterations", 300);
      b.config.box = get<bool>(pt, "baseline.tv_box", true);
      b.config.tv_inner_iterations = get<int>(pt, "baseline.tv_inner_iterations", b.config.tv_inner_iterations);
    } else {
      throw ConfigError("config: unknown baseline method '" + m + "'");
    }
    if (b.lambda_relative < 0.0) throw ConfigError("config: lambda_relative must be >= 0");
    b.config.validate();
    c.baselines.push_back(b);
  }

  c.metrics.patch = get<long>(pt, "metrics.patch", c.metrics.patch);
  c.metrics.stride = get<long>(pt, "metrics.stride", c.metrics.stride);
  c.metrics.mardia.ridge_fallback = get<bool>(pt, "metrics.ridge_fallback", true);
  c.metrics.mardia.ridge_relative = get<double>(pt, "metrics.ridge_relative", c.metrics.mardia.ridge_relative);
  c.metrics.mardia.max_condition = get<double>(pt, "metrics.max_condition", c.metrics.mardia.max_condition);
  if (c.metrics.patch < 1 || c.metrics.stride < 1 || c.metrics.patch > size)
    throw ConfigError("config: invalid patch settings");
  return c;
}

inline boost::property_tree::ptree read_config_tree(const std::filesystem::path& path,
                                                    const std::vector<std::string>& overrides = {}) {
  if (!std::filesystem::exists(path)) throw MissingInputError("config file not found: " + path.string());
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::read_ini(path.string(), pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  apply_overrides(pt, overrides);
  return pt;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  return parse_config(read_config_tree(path, overrides));
}

/// The resolved configuration as INI text; stored next to every output.
inline std::string to_ini(const ExperimentConfig& c) {
  using io::format_double;
  std::ostringstream o;
  const auto& p = c.process;
  o << "[experiment]\nname = " << c.name << "\noutput = " << c.output.string() << "\nn_train = " << c.n_train
    << "\nn_test = " << c.n_test << "\nseed = " << c.seed << "\n\n";
  o << "[process]\nkind = " << to_string(p.kind) << "\nsize = " << c.size() << '\n';
  if (p.kind == ProcessKind::ising) {
    const char* init = p.ising.init == IsingInit::random ? "random" : p.ising.init == IsingInit::up ? "up" : "down";
    o << "temperature = " << format_double(p.ising.temperature) << "\nsweeps = " << p.ising.sweeps
      << "\ninit = " << init << '\n';
  } else {
    o << "smoothing = " << format_double(p.cox.smoothing) << "\nbase_rate = " << format_double(p.cox.base_rate)
      << "\nlog_std = " << format_double(p.cox.log_std)
      << "\nconstant_intensity = " << (p.cox.constant_intensity ? "true" : "false")
      << "\nsplat = " << (p.cox.splat == SplatKernel::delta ? "delta" : "bilinear") << '\n';
  }
  o << "\n[operator]\n";
  if (c.op.kind == OperatorKind::super_resolution) {
    o << "kind = sr\nfactor = " << c.op.factor << "\nkernel = "
      << (c.op.kernel.kind == LowpassKind::ideal ? "ideal" : "gaussian") << '\n';
    if (c.op.kernel.kind == LowpassKind::gaussian) o << "sigma = " << format_double(c.op.kernel.sigma) << '\n';
  } else {
    o << "kind = radon\nangle_start = " << format_double(c.op.angle_start)
      << "\nangle_stop = " << format_double(c.op.angle_stop) << "\nangle_step = " << format_double(c.op.angle_step)
      << "\nbox_lo = " << format_double(c.op.radon.box_lo) << "\nbox_hi = " << format_double(c.op.radon.box_hi)
      << "\nprojection_steps = " << c.op.radon.projection_steps << "\nmax_steps = " << c.op.radon.max_steps << '\n';
  }
  const SolverConfig& s = c.solver;
  o << "\n[scattering]\nJ = " << c.J << "\nK = " << c.K << "\nmax_order = " << s.scattering.max_order
    << "\nmodulus_smoothing = " << format_double(s.scattering.modulus_smoothing) << "\n\n";
  o << "[solver]\nouter_iterations = " << s.outer_iterations << "\ninner_iterations = " << s.inner_iterations
    << "\ninner_step = " << format_double(s.inner_step) << "\nbacktrack = " << format_double(s.backtrack)
    << "\nmax_backtracks = " << s.max_backtracks
    << "\nsufficient_decrease = " << format_double(s.sufficient_decrease)
    << "\nepsilon_abs = " << format_double(s.epsilon_abs) << "\nepsilon_rel = " << format_double(s.epsilon_rel)
    << "\ninit = " << (s.init == InitKind::zero ? "zero" : "right_inverse")
    << "\nridge_relative = " << format_double(s.ridge_relative) << "\nridge_floor = " << format_double(s.ridge_floor)
    << "\nshared_statistics = " << (s.shared_statistics ? "true" : "false") << "\nneighborhood = " << s.neighborhood
    << "\n\n";
  o << "[baseline]\nmethods = ";
  for (std::size_t i = 0; i < c.baselines.size(); ++i) o << (i ? "," : "") << c.baselines[i].name;
  o << '\n';
  for (const BaselineSpec& b : c.baselines) {
    const std::string& n = b.name;
    o << n << "_lambda = " << format_double(b.config.lambda) << '\n';
    if (n == "l1") o << "l1_lambda_relative = " << format_double(b.lambda_relative) << '\n';
    o << n << "_iterations = " << b.config.iterations << '\n' << n << "_box = " << (b.config.box ? "true" : "false") << '\n';
    if (n == "tv") o << "tv_inner_iterations = " << b.config.tv_inner_iterations << '\n';
  }
  o << "\n[metrics]\npatch = " << c.metrics.patch << "\nstride = " << c.metrics.stride
    << "\nridge_fallback = " << (c.metrics.mardia.ridge_fallback ? "true" : "false")
    << "\nridge_relative = " << format_double(c.metrics.mardia.ridge_relative)
    << "\nmax_condition = " << format_double(c.metrics.mardia.max_condition) << '\n';
  return o.str();
}

}  // namespace scatinv

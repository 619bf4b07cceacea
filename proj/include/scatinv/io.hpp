#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <Eigen/Core>

#include "scatinv/error.hpp"
#include "scatinv/estimator.hpp"
#include "scatinv/filterbank.hpp"
#include "scatinv/image.hpp"
#include "scatinv/metrics.hpp"
#include "scatinv/operators.hpp"
#include "scatinv/scattering.hpp"
#include "scatinv/solver.hpp"

namespace scatinv::io {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError("not a number: '" + s + "'");
  return v;
}

inline long parse_long(const std::string& s) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError("not an integer: '" + s + "'");
  return v;
}

/// Binary container: a text header ("scatinv <kind> 1", then "key value..."
/// lines, then "data") followed by little-endian float64 values.
struct Container {
  std::string kind;
  std::vector<std::pair<std::string, std::vector<std::string>>> fields;
  std::vector<double> data;

  void set(const std::string& key, std::vector<std::string> values) { fields.emplace_back(key, std::move(values)); }
  void set(const std::string& key, const std::string& value) { set(key, std::vector<std::string>{value}); }
  void set(const std::string& key, long value) { set(key, std::to_string(value)); }
  void set(const std::string& key, double value) { set(key, format_double(value)); }

  const std::vector<std::string>& get(const std::string& key) const {
    for (const auto& [k, v] : fields)
      if (k == key) return v;
    throw FormatError(kind + " file: missing header field '" + key + "'");
  }
  std::string get_string(const std::string& key) const {
    const auto& v = get(key);
    if (v.size() != 1) throw FormatError(kind + " file: field '" + key + "' must have one value");
    return v.front();
  }
  long get_long(const std::string& key) const { return parse_long(get_string(key)); }
  double get_double(const std::string& key) const { return parse_double(get_string(key)); }
  std::vector<double> get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : get(key)) out.push_back(parse_double(s));
    return out;
  }
};

namespace detail {

inline std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return out;
}

inline void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

}  // namespace detail

inline void write_container(const std::filesystem::path& path, const Container& c) {
  detail::ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "scatinv " << c.kind << " 1\n";
  for (const auto& [key, values] : c.fields) {
    out << key;
    for (const auto& v : values) out << ' ' << v;
    out << '\n';
  }
  out << "count " << c.data.size() << "\ndata\n";
  std::vector<std::uint64_t> raw(c.data.size());
  for (std::size_t i = 0; i < c.data.size(); ++i) raw[i] = detail::to_little(std::bit_cast<std::uint64_t>(c.data[i]));
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 8));
  if (!out) throw Error("write failed: " + path.string());
}

inline Container read_container(const std::filesystem::path& path, const std::string& expected_kind) {
  if (!std::filesystem::exists(path)) throw MissingInputError("missing input: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path.string());
  Container c;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  {
    std::istringstream ss(line);
    std::string magic, version;
    ss >> magic >> c.kind >> version;
    if (magic != "scatinv" || version != "1") throw FormatError(path.string() + ": not a scatinv file");
    if (c.kind != expected_kind)
      throw FormatError(path.string() + ": expected a " + expected_kind + " file, found " + c.kind);
  }
  long count = -1;
  while (std::getline(in, line)) {
    if (line == "data") break;
    std::istringstream ss(line);
    std::string key, v;
    ss >> key;
    std::vector<std::string> values;
    while (ss >> v) values.push_back(v);
    if (key == "count") {
      if (values.size() != 1) throw FormatError(path.string() + ": bad count line");
      count = parse_long(values.front());
    } else {
      c.set(key, std::move(values));
    }
  }
  if (line != "data" || count < 0) throw FormatError(path.string() + ": truncated header");
  std::vector<std::uint64_t> raw(static_cast<std::size_t>(count));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 8));
  if (in.gcount() != static_cast<std::streamsize>(raw.size() * 8)) throw FormatError(path.string() + ": truncated data");
  c.data.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) c.data[i] = std::bit_cast<double>(detail::to_little(raw[i]));
  return c;
}

// ---------------------------------------------------------------------------
// Images

inline void write_image(const std::filesystem::path& path, const Image& img) {
  Container c;
  c.kind = "image";
  c.set("rows", static_cast<long>(img.rows()));
  c.set("cols", static_cast<long>(img.cols()));
  c.data.assign(img.data(), img.data() + img.size());
  write_container(path, c);
}

inline Image read_image(const std::filesystem::path& path) {
  const Container c = read_container(path, "image");
  const long rows = c.get_long("rows"), cols = c.get_long("cols");
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != c.data.size())
    throw FormatError(path.string() + ": size does not match header");
  return Eigen::Map<const Image>(c.data.data(), rows, cols);
}

/// 16-bit binary graymap. Values are mapped linearly from [lo, hi] to
/// [0, 65535] and clamped; lo == hi selects the image's own range.
inline void write_pgm(const std::filesystem::path& path, const Image& img, double lo = 0.0, double hi = 0.0) {
  detail::ensure_parent(path);
  if (lo == hi && img.size() > 0) {
    lo = img.minCoeff();
    hi = img.maxCoeff();
  }
  const double span = hi > lo ? hi - lo : 1.0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "P5\n" << img.cols() << ' ' << img.rows() << "\n65535\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(img.size()) * 2);
  for (long i = 0; i < img.size(); ++i) {
    const double t = std::clamp((img.data()[i] - lo) / span, 0.0, 1.0);
    const auto v = static_cast<std::uint16_t>(std::lround(t * 65535.0));
    bytes[static_cast<std::size_t>(2 * i)] = static_cast<unsigned char>(v >> 8);
    bytes[static_cast<std::size_t>(2 * i + 1)] = static_cast<unsigned char>(v & 0xffu);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

/// Reads a 16-bit graymap back as values in [0, 1].
inline Image read_pgm(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingInputError("missing input: " + path.string());
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  long cols = 0, rows = 0, maxval = 0;
  in >> magic >> cols >> rows >> maxval;
  if (magic != "P5" || maxval != 65535 || rows <= 0 || cols <= 0) throw FormatError(path.string() + ": not a 16-bit P5 file");
  in.get();
  std::vector<unsigned char> bytes(static_cast<std::size_t>(rows * cols * 2));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw FormatError(path.string() + ": truncated");
  Image img(rows, cols);
  for (long i = 0; i < img.size(); ++i)
    img.data()[i] = ((bytes[static_cast<std::size_t>(2 * i)] << 8) | bytes[static_cast<std::size_t>(2 * i + 1)]) / 65535.0;
  return img;
}

// ---------------------------------------------------------------------------
// Sinograms

inline void write_sinogram(const std::filesystem::path& path, const Sinogram& s) {
  Container c;
  c.kind = "sinogram";
  c.set("n_angles", static_cast<long>(s.angles.size()));
  c.set("n_offsets", static_cast<long>(s.offsets.size()));
  std::vector<std::string> a, o;
  for (double v : s.angles) a.push_back(format_double(v));
  for (double v : s.offsets) o.push_back(format_double(v));
  c.set("angles", a);
  c.set("offsets", o);
  c.data.assign(s.values.data(), s.values.data() + s.values.size());
  write_container(path, c);
}

inline Sinogram read_sinogram(const std::filesystem::path& path) {
  const Container c = read_container(path, "sinogram");
  Sinogram s;
  s.angles = c.get_doubles("angles");
  s.offsets = c.get_doubles("offsets");
  const long na = c.get_long("n_angles"), no = c.get_long("n_offsets");
  if (static_cast<long>(s.angles.size()) != na || static_cast<long>(s.offsets.size()) != no ||
      static_cast<std::size_t>(na * no) != c.data.size())
    throw FormatError(path.string() + ": sinogram header does not match data");
  validate_angles(s.angles);
  s.values = Eigen::Map<const Image>(c.data.data(), na, no);
  return s;
}

// ---------------------------------------------------------------------------
// Scattering vectors

inline void write_scattering(const std::filesystem::path& path, const ScatteringVector& sv) {
  Container c;
  c.kind = "scattering";
  c.set("source_shape", {std::to_string(sv.source_rows), std::to_string(sv.source_cols)});
  c.set("J", static_cast<long>(sv.J));
  c.set("K", static_cast<long>(sv.K));
  c.set("max_order", static_cast<long>(sv.max_order));
  c.set("stride", sv.stride);
  c.set("paths", sv.path_count());
  for (const PathDescriptor& p : sv.paths)
    c.set("path", {std::to_string(p.order), std::to_string(p.j1), std::to_string(p.k1), std::to_string(p.j2),
                   std::to_string(p.k2)});
  c.data.assign(sv.values.data(), sv.values.data() + sv.values.size());
  write_container(path, c);
}

inline ScatteringVector read_scattering(const std::filesystem::path& path) {
  const Container c = read_container(path, "scattering");
  ScatteringVector sv;
  const auto& shape = c.get("source_shape");
  if (shape.size() != 2) throw FormatError(path.string() + ": bad source_shape");
  sv.source_rows = parse_long(shape[0]);
  sv.source_cols = parse_long(shape[1]);
  sv.J = static_cast<int>(c.get_long("J"));
  sv.K = static_cast<int>(c.get_long("K"));
  sv.max_order = static_cast<int>(c.get_long("max_order"));
  sv.stride = c.get_long("stride");
  for (const auto& [key, v] : c.fields) {
    if (key != "path") continue;
    if (v.size() != 5) throw FormatError(path.string() + ": bad path entry");
    sv.paths.push_back({static_cast<int>(parse_long(v[0])), static_cast<int>(parse_long(v[1])),
                        static_cast<int>(parse_long(v[2])), static_cast<int>(parse_long(v[3])),
                        static_cast<int>(parse_long(v[4]))});
  }
  if (sv.path_count() != c.get_long("paths")) throw FormatError(path.string() + ": path table is incomplete");
  if (sv.stride < 1 || static_cast<std::size_t>(sv.path_count() * sv.block_size()) != c.data.size())
    throw FormatError(path.string() + ": data does not match the path layout");
  sv.values = Eigen::Map<const Eigen::VectorXd>(c.data.data(), static_cast<long>(c.data.size()));
  return sv;
}

// ---------------------------------------------------------------------------
// Estimators

inline void write_estimator(const std::filesystem::path& path, const LinearEstimator& est) {
  Container c;
  c.kind = "estimator";
  c.set("dim_x", static_cast<long>(est.G.rows()));
  c.set("dim_z", static_cast<long>(est.G.cols()));
  c.set("ridge", est.ridge);
  c.set("iteration_tag", static_cast<long>(est.iteration_tag));
  c.set("layout", std::string(est.layout.shared ? "shared" : "dense"));
  c.set("paths", est.layout.paths);
  c.set("grid", {std::to_string(est.layout.grid_rows), std::to_string(est.layout.grid_cols)});
  c.set("radius", static_cast<long>(est.layout.radius));
  c.data.reserve(static_cast<std::size_t>(est.G.size() + est.h.size()));
  for (long r = 0; r < est.G.rows(); ++r)
    for (long col = 0; col < est.G.cols(); ++col) c.data.push_back(est.G(r, col));
  c.data.insert(c.data.end(), est.h.data(), est.h.data() + est.h.size());
  write_container(path, c);
}

inline LinearEstimator read_estimator(const std::filesystem::path& path) {
  const Container c = read_container(path, "estimator");
  LinearEstimator est;
  const long dx = c.get_long("dim_x"), dz = c.get_long("dim_z");
  if (dx < 0 || dz < 0 || static_cast<std::size_t>(dx * dz + dx) != c.data.size())
    throw FormatError(path.string() + ": estimator size does not match header");
  est.ridge = c.get_double("ridge");
  est.iteration_tag = static_cast<int>(c.get_long("iteration_tag"));
  const std::string layout = c.get_string("layout");
  if (layout != "shared" && layout != "dense") throw FormatError(path.string() + ": unknown layout " + layout);
  est.layout.shared = layout == "shared";
  est.layout.paths = c.get_long("paths");
  const auto& grid = c.get("grid");
  if (grid.size() != 2) throw FormatError(path.string() + ": bad grid");
  est.layout.grid_rows = parse_long(grid[0]);
  est.layout.grid_cols = parse_long(grid[1]);
  est.layout.radius = static_cast<int>(c.get_long("radius"));
  if (est.layout.input_dim() != dz || est.layout.output_dim() != dx)
    throw FormatError(path.string() + ": layout does not match the matrix dimensions");
  est.G = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(c.data.data(), dx, dz);
  est.h = Eigen::Map<const Eigen::VectorXd>(c.data.data() + dx * dz, dx);
  return est;
}

// ---------------------------------------------------------------------------
// Filter banks (inspection only)

/// Per filter: the real grid, then the imaginary grid (identically zero, the
/// filters being real in frequency); psi in (j, k) order, then phi.
inline void write_filter_bank(const std::filesystem::path& path, const FilterBank& fb) {
  Container c;
  c.kind = "filterbank";
  c.set("width", fb.width);
  c.set("height", fb.height);
  c.set("J", static_cast<long>(fb.J));
  c.set("K", static_cast<long>(fb.K));
  c.set("epsilon_lp", fb.epsilon_lp);
  auto push = [&](const Image& img) {
    c.data.insert(c.data.end(), img.data(), img.data() + img.size());
    c.data.insert(c.data.end(), static_cast<std::size_t>(img.size()), 0.0);
  };
  for (const Image& psi : fb.psi_hat) push(psi);
  push(fb.phi_hat);
  write_container(path, c);
}

// ---------------------------------------------------------------------------
// CSV

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  detail::ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingInputError("missing input: " + path.string());
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// iteration,inner_objective_final,measurement_residual,phi_mse[,lmmse_mse]
inline std::string trace_csv(const IterationTrace& trace, bool with_lmmse = false) {
  std::ostringstream out;
  out << "iteration,inner_objective_final,measurement_residual,phi_mse";
  if (with_lmmse) out << ",lmmse_mse";
  out << '\n';
  auto num = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  for (const OuterRecord& r : trace.records) {
    out << r.iteration << ',' << num(r.inner_objective_final) << ',' << num(r.measurement_residual) << ','
        << num(r.phi_mse);
    if (with_lmmse) out << ',' << num(r.lmmse_mse);
    out << '\n';
  }
  return out.str();
}

inline std::string objective_csv(const std::vector<double>& objective) {
  std::ostringstream out;
  out << "iteration,objective\n";
  for (std::size_t i = 0; i < objective.size(); ++i) out << i << ',' << format_double(objective[i]) << '\n';
  return out.str();
}

struct ReportRow {
  std::string experiment;
  double mse = 0.0;
  double excess_kurtosis = 0.0;
};

inline std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "experiment,mse,excess_kurtosis\n";
  for (const ReportRow& r : rows)
    out << r.experiment << ',' << format_double(r.mse) << ',' << format_double(r.excess_kurtosis) << '\n';
  return out.str();
}

}  // namespace scatinv::io

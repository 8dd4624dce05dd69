#pragma once

// Analysis configuration: strict JSON schema, unknown keys rejected, errors
// reported as "<source>:<line>: <json pointer>: <message>".

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "oddcert/certify.hpp"
#include "oddcert/cli/json_lines.hpp"
#include "oddcert/errors.hpp"
#include "oddcert/model.hpp"
#include "oddcert/sector.hpp"
#include "oddcert/sim.hpp"

namespace oddcert::cli {

using json = nlohmann::json;

struct SimulationSpec {
  std::vector<Eigen::VectorXd> x0;
  /// Random initial states drawn uniformly from the certified x0 ball.
  int x0_samples = 0;
  double dt = kDefaultDt;
  double t_end = 30.0;
  std::vector<Disturbance> disturbances;
  /// Ball radius for time-to-eps; unset picks the smallest radius for which
  /// the settling-time formula is finite, times 1.01.
  std::optional<double> eps;
  double tail_fraction = 0.25;
  bool write_csv = true;
};

struct SweepSpec {
  /// One or two (parameter name, values) axes.
  std::vector<std::pair<std::string, std::vector<double>>> axes;
};

struct AnalysisConfig {
  Plant plant;
  Gain gain;
  /// Function spec(s) as given; one entry, or n entries for per-component functions.
  std::vector<json> function_specs;
  TauSchedule tau;
  std::vector<VertexMode> modes;
  CertifyOptions options;
  SimulationSpec simulation;
  std::optional<SweepSpec> sweep;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  /// Config as read, with command-line overrides applied.
  json echo;
};

class Reader {
 public:
  Reader(std::string source, const JsonLineIndex& index) : source_(std::move(source)), index_(index) {}

  [[nodiscard]] const std::string& source() const { return source_; }

  [[noreturn]] void fail(const std::string& pointer, const std::string& message) const {
    throw Error(ErrorCode::ConfigError, source_ + ":" + std::to_string(index_.line(pointer)) + ": " +
                                            (pointer.empty() ? "/" : pointer) + ": " + message);
  }

  void allow_keys(const json& obj, const std::string& pointer, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(pointer, "expected an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items()) {
      if (!allowed.count(k)) fail(pointer + "/" + JsonLineIndex::escape(k), "unknown key '" + k + "'");
    }
  }

  void require(const json& obj, const std::string& pointer, const char* key) const {
    if (!obj.contains(key)) fail(pointer, std::string("missing required key '") + key + "'");
  }

  double number(const json& v, const std::string& pointer) const {
    if (!v.is_number()) fail(pointer, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(pointer, "expected a finite number");
    return d;
  }

  double positive(const json& v, const std::string& pointer) const {
    const double d = number(v, pointer);
    if (!(d > 0.0)) fail(pointer, "expected a positive number");
    return d;
  }

  bool boolean(const json& v, const std::string& pointer) const {
    if (!v.is_boolean()) fail(pointer, "expected true or false");
    return v.get<bool>();
  }

  std::int64_t integer(const json& v, const std::string& pointer) const {
    if (!v.is_number_integer() && !v.is_number_unsigned()) fail(pointer, "expected an integer");
    return v.get<std::int64_t>();
  }

  std::string string(const json& v, const std::string& pointer) const {
    if (!v.is_string()) fail(pointer, "expected a string");
    return v.get<std::string>();
  }

  Eigen::VectorXd vector(const json& v, const std::string& pointer) const {
    if (!v.is_array() || v.empty()) fail(pointer, "expected a non-empty array of numbers");
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = number(v[i], pointer + "/" + std::to_string(i));
    return out;
  }

  /// Row-major nested arrays; a flat array is read as a column.
  Eigen::MatrixXd matrix(const json& v, const std::string& pointer) const {
    if (!v.is_array() || v.empty()) fail(pointer, "expected a non-empty matrix (array of rows)");
    if (!v[0].is_array()) return vector(v, pointer);
    const std::size_t cols = v[0].size();
    if (cols == 0) fail(pointer + "/0", "empty row");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < v.size(); ++r) {
      const std::string rp = pointer + "/" + std::to_string(r);
      if (!v[r].is_array()) fail(rp, "expected a row array");
      if (v[r].size() != cols) {
        fail(rp, "row has " + std::to_string(v[r].size()) + " entries, expected " + std::to_string(cols));
      }
      for (std::size_t c = 0; c < cols; ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            number(v[r][c], rp + "/" + std::to_string(c));
      }
    }
    return m;
  }

 private:
  std::string source_;
  const JsonLineIndex& index_;
};

/// Two-column whitespace-separated text file of (s, phi(s)) rows; '#' starts
/// a comment. Relative paths resolve against the config file's directory.
inline Eigen::MatrixXd read_table(const json& v, const std::string& pointer, const Reader& rd) {
  std::filesystem::path path(rd.string(v, pointer));
  if (path.is_relative()) path = std::filesystem::path(rd.source()).parent_path() / path;
  std::ifstream in(path);
  if (!in) rd.fail(pointer, "cannot open table file '" + path.string() + "'");
  std::vector<std::pair<double, double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double a = 0.0;
    double b = 0.0;
    if (!(ls >> a)) continue;
    if (!(ls >> b)) rd.fail(pointer, path.string() + ":" + std::to_string(lineno) + ": expected two columns");
    rows.emplace_back(a, b);
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = rows[i].first;
    m(static_cast<Eigen::Index>(i), 1) = rows[i].second;
  }
  return m;
}

/// Builds an odd function from its JSON spec.
inline OddFunction parse_function(const json& spec, const std::string& pointer, const Reader& rd) {
  rd.require(spec, pointer, "family");
  const std::string fam = rd.string(spec["family"], pointer + "/family");
  const auto param = [&](const char* key, std::optional<double> fallback = std::nullopt) {
    if (!spec.contains(key)) {
      if (fallback) return *fallback;
      rd.fail(pointer, std::string("family '") + fam + "' needs '" + key + "'");
    }
    return rd.number(spec[key], pointer + "/" + key);
  };
  try {
    if (fam == "identity") {
      rd.allow_keys(spec, pointer, {"family"});
      return OddFunction::identity();
    }
    if (fam == "saturation" || fam == "arctan" || fam == "sigmoid") {
      rd.allow_keys(spec, pointer, {"family", "mu", "sigma"});
      const double mu = param("mu", 1.0);
      const double sigma = param("sigma", 1.0);
      if (fam == "saturation") return OddFunction::saturation(mu, sigma);
      if (fam == "arctan") return OddFunction::arctan(mu, sigma);
      return OddFunction::sigmoid(mu, sigma);
    }
    if (fam == "power" || fam == "power_sum") {
      rd.allow_keys(spec, pointer, {"family", "lambda"});
      const double lambda = param("lambda", 0.5);
      return fam == "power" ? OddFunction::power(lambda) : OddFunction::power_sum(lambda);
    }
    if (fam == "variable_power") {
      rd.allow_keys(spec, pointer, {"family", "mu"});
      return OddFunction::variable_power(param("mu", 2.0));
    }
    if (fam == "affine_plus") {
      rd.allow_keys(spec, pointer, {"family", "base", "theta"});
      rd.require(spec, pointer, "base");
      return OddFunction::affine_plus(parse_function(spec["base"], pointer + "/base", rd), param("theta", 1.0));
    }
    if (fam == "tabulated") {
      rd.allow_keys(spec, pointer, {"family", "points", "file"});
      if (spec.contains("points") == spec.contains("file")) rd.fail(pointer, "give exactly one of 'points' or 'file'");
      const Eigen::MatrixXd pts = spec.contains("points") ? rd.matrix(spec["points"], pointer + "/points")
                                                          : read_table(spec["file"], pointer + "/file", rd);
      if (pts.cols() != 2) rd.fail(pointer + "/points", "expected rows [s, phi(s)]");
      std::vector<std::pair<double, double>> rows;
      for (Eigen::Index r = 0; r < pts.rows(); ++r) rows.emplace_back(pts(r, 0), pts(r, 1));
      return OddFunction::tabulated(std::move(rows));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    rd.fail(pointer, e.what());
  }
  rd.fail(pointer + "/family", "unknown family '" + fam +
                                   "' (identity, saturation, arctan, sigmoid, power, variable_power, power_sum, "
                                   "affine_plus, tabulated)");
}

inline Disturbance parse_disturbance(const json& spec, const std::string& pointer, const Reader& rd, double f_bar,
                                     std::uint64_t seed, std::size_t index) {
  if (spec.is_string()) {
    const std::string k = spec.get<std::string>();
    if (k == "zero") return Disturbance::zero();
    if (k == "constant") return Disturbance::constant(f_bar);
    rd.fail(pointer, "shorthand disturbance must be \"zero\" or \"constant\"");
  }
  rd.require(spec, pointer, "kind");
  const std::string kind = rd.string(spec["kind"], pointer + "/kind");
  const auto amp = [&]() { return spec.contains("amplitude") ? rd.number(spec["amplitude"], pointer + "/amplitude") : f_bar; };
  try {
    if (kind == "zero") {
      rd.allow_keys(spec, pointer, {"kind"});
      return Disturbance::zero();
    }
    if (kind == "constant") {
      rd.allow_keys(spec, pointer, {"kind", "value"});
      if (!spec.contains("value")) return Disturbance::constant(f_bar);
      if (spec["value"].is_array()) return Disturbance::constant(rd.vector(spec["value"], pointer + "/value"));
      return Disturbance::constant(rd.number(spec["value"], pointer + "/value"));
    }
    if (kind == "sinusoid") {
      rd.allow_keys(spec, pointer, {"kind", "amplitude", "frequency", "phase"});
      const double w = spec.contains("frequency") ? rd.number(spec["frequency"], pointer + "/frequency") : 1.0;
      const double ph = spec.contains("phase") ? rd.number(spec["phase"], pointer + "/phase") : 0.0;
      return Disturbance::sinusoid(amp(), w, ph);
    }
    if (kind == "noise") {
      rd.allow_keys(spec, pointer, {"kind", "amplitude", "cutoff", "seed"});
      const double cutoff = spec.contains("cutoff") ? rd.positive(spec["cutoff"], pointer + "/cutoff") : 1.0;
      std::uint64_t s = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
      if (spec.contains("seed")) s = static_cast<std::uint64_t>(rd.integer(spec["seed"], pointer + "/seed"));
      return Disturbance::bounded_noise(s, amp(), cutoff);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    rd.fail(pointer, e.what());
  }
  rd.fail(pointer + "/kind", "unknown disturbance kind '" + kind + "' (zero, constant, sinusoid, noise)");
}

/// Command-line overrides applied on top of the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  bool strict_energy = false;
  std::optional<double> region_cap;
  std::optional<std::string> out_dir;
};

inline AnalysisConfig parse_config(const std::string& text, const std::string& source = "config",
                                   const Overrides& ov = {}) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, source + ": " + e.what());
  }
  const JsonLineIndex index(text);
  const Reader rd(source, index);
  rd.allow_keys(root, "", {"plant", "gain", "law", "tau", "mode", "options", "simulation", "sweep", "seed", "output"});
  for (const char* key : {"plant", "gain", "law"}) rd.require(root, "", key);

  AnalysisConfig cfg;
  if (root.contains("seed")) cfg.seed = static_cast<std::uint64_t>(rd.integer(root["seed"], "/seed"));
  if (ov.seed) cfg.seed = *ov.seed;

  const json& pj = root["plant"];
  rd.allow_keys(pj, "/plant", {"A", "B", "D", "f_bar"});
  for (const char* key : {"A", "B", "D", "f_bar"}) rd.require(pj, "/plant", key);
  cfg.plant.A = rd.matrix(pj["A"], "/plant/A");
  cfg.plant.B = rd.matrix(pj["B"], "/plant/B");
  cfg.plant.D = rd.matrix(pj["D"], "/plant/D");
  cfg.plant.f_bar = rd.number(pj["f_bar"], "/plant/f_bar");
  if (cfg.plant.A.rows() != cfg.plant.A.cols()) {
    rd.fail("/plant/A", "A must be square, got " + std::to_string(cfg.plant.A.rows()) + "x" +
                            std::to_string(cfg.plant.A.cols()));
  }
  if (cfg.plant.B.rows() != cfg.plant.A.rows() || cfg.plant.B.cols() != 1) {
    rd.fail("/plant/B", "B must be " + std::to_string(cfg.plant.A.rows()) + "x1");
  }
  if (cfg.plant.D.rows() != cfg.plant.A.rows()) {
    rd.fail("/plant/D", "D must have " + std::to_string(cfg.plant.A.rows()) + " rows");
  }
  if (cfg.plant.f_bar < 0.0) rd.fail("/plant/f_bar", "f_bar must be >= 0");

  cfg.gain.k = rd.vector(root["gain"], "/gain").transpose();
  if (cfg.gain.size() != cfg.plant.n()) {
    rd.fail("/gain", "gain has " + std::to_string(cfg.gain.size()) + " entries, plant order is " +
                         std::to_string(cfg.plant.n()));
  }

  const json& lj = root["law"];
  rd.allow_keys(lj, "/law", {"function", "functions"});
  if (lj.contains("function") == lj.contains("functions")) rd.fail("/law", "give exactly one of 'function' or 'functions'");
  if (lj.contains("function")) {
    parse_function(lj["function"], "/law/function", rd);
    cfg.function_specs.push_back(lj["function"]);
  } else {
    const json& fs = lj["functions"];
    if (!fs.is_array() || fs.size() != static_cast<std::size_t>(cfg.plant.n())) {
      rd.fail("/law/functions", "expected one function per state (" + std::to_string(cfg.plant.n()) + ")");
    }
    for (std::size_t i = 0; i < fs.size(); ++i) {
      parse_function(fs[i], "/law/functions/" + std::to_string(i), rd);
      cfg.function_specs.push_back(fs[i]);
    }
  }

  if (root.contains("tau")) {
    const json& tj = root["tau"];
    if (tj.is_array()) {
      const Eigen::VectorXd t = rd.vector(tj, "/tau");
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        if (!(t(i) > 0.0)) rd.fail("/tau/" + std::to_string(i), "tau must be positive");
        cfg.tau.per_interval.push_back(t(i));
      }
      cfg.tau.tau = t(t.size() - 1);
    } else {
      cfg.tau.tau = rd.positive(tj, "/tau");
    }
  }

  const std::string mode = root.contains("mode") ? rd.string(root["mode"], "/mode") : "theorem1";
  if (mode == "theorem1") cfg.modes = {VertexMode::Componentwise};
  else if (mode == "theorem2") cfg.modes = {VertexMode::Scalar};
  else if (mode == "both") cfg.modes = {VertexMode::Componentwise, VertexMode::Scalar};
  else rd.fail("/mode", "mode must be theorem1, theorem2 or both");
  if (cfg.function_specs.size() > 1) {
    for (auto m : cfg.modes) {
      if (m == VertexMode::Scalar) rd.fail("/law/functions", "per-component functions need mode theorem1");
    }
  }

  auto& o = cfg.options;
  if (root.contains("options")) {
    const json& oj = root["options"];
    rd.allow_keys(oj, "/options",
                  {"rho_start", "rho_cap", "region_cap", "initial_step", "growth", "min_step_ratio",
                   "max_intervals", "anchor_scan_start", "anchor_scan_factor", "strict_energy", "literal_chi_block",
                   "bisection_gap", "tune_rho_lo", "rho_lo_candidates_per_interval", "vertex_cap", "margin",
                   "chi_cap", "verify_tol"});
    const auto num = [&](const char* key, double& dst) {
      if (oj.contains(key)) dst = rd.number(oj[key], std::string("/options/") + key);
    };
    const auto pos = [&](const char* key, double& dst) {
      if (oj.contains(key)) dst = rd.positive(oj[key], std::string("/options/") + key);
    };
    num("rho_start", o.rho_start);
    if (o.rho_start < 0.0) rd.fail("/options/rho_start", "rho_start must be >= 0");
    pos("rho_cap", o.rho_cap);
    pos("region_cap", o.region_cap);
    num("initial_step", o.initial_step);
    pos("growth", o.growth);
    if (o.growth <= 1.0) rd.fail("/options/growth", "growth must exceed 1");
    pos("min_step_ratio", o.min_step_ratio);
    pos("anchor_scan_start", o.anchor_scan_start);
    pos("anchor_scan_factor", o.anchor_scan_factor);
    if (o.anchor_scan_factor <= 1.0) rd.fail("/options/anchor_scan_factor", "factor must exceed 1");
    pos("bisection_gap", o.bisection_gap);
    pos("margin", o.lmi.margin);
    pos("chi_cap", o.lmi.chi_cap);
    pos("verify_tol", o.lmi.verify_tol);
    if (oj.contains("max_intervals")) {
      o.max_intervals = static_cast<int>(rd.integer(oj["max_intervals"], "/options/max_intervals"));
      if (o.max_intervals < 1) rd.fail("/options/max_intervals", "must be >= 1");
    }
    if (oj.contains("rho_lo_candidates_per_interval")) {
      o.rho_lo_candidates_per_interval =
          static_cast<int>(rd.integer(oj["rho_lo_candidates_per_interval"], "/options/rho_lo_candidates_per_interval"));
      if (o.rho_lo_candidates_per_interval < 1) rd.fail("/options/rho_lo_candidates_per_interval", "must be >= 1");
    }
    if (oj.contains("vertex_cap")) {
      const auto cap = rd.integer(oj["vertex_cap"], "/options/vertex_cap");
      if (cap < 1) rd.fail("/options/vertex_cap", "must be >= 1");
      o.vertex_cap = static_cast<std::uint64_t>(cap);
    }
    if (oj.contains("strict_energy")) o.strict_energy = rd.boolean(oj["strict_energy"], "/options/strict_energy");
    if (oj.contains("literal_chi_block")) {
      o.literal_chi_block = rd.boolean(oj["literal_chi_block"], "/options/literal_chi_block");
    }
    if (oj.contains("tune_rho_lo")) o.tune_rho_lo = rd.boolean(oj["tune_rho_lo"], "/options/tune_rho_lo");
  }
  if (ov.strict_energy) o.strict_energy = true;
  if (ov.region_cap) {
    if (!(*ov.region_cap > 0.0)) throw Error(ErrorCode::ConfigError, "--region-cap must be positive");
    o.region_cap = *ov.region_cap;
  }

  auto& s = cfg.simulation;
  s.disturbances = {Disturbance::zero(), Disturbance::constant(cfg.plant.f_bar),
                    Disturbance::sinusoid(cfg.plant.f_bar, 1.0)};
  if (root.contains("simulation")) {
    const json& sj = root["simulation"];
    rd.allow_keys(sj, "/simulation", {"x0", "x0_samples", "dt", "t_end", "disturbances", "eps", "tail_fraction", "write_csv"});
    if (sj.contains("x0")) {
      const Eigen::MatrixXd x0 = rd.matrix(sj["x0"], "/simulation/x0");
      const bool rows = sj["x0"][0].is_array();
      const Eigen::MatrixXd m = rows ? x0 : Eigen::MatrixXd(x0.transpose());
      if (m.cols() != cfg.plant.n()) rd.fail("/simulation/x0", "initial states must have length n");
      for (Eigen::Index r = 0; r < m.rows(); ++r) s.x0.emplace_back(m.row(r).transpose());
    }
    if (sj.contains("x0_samples")) {
      s.x0_samples = static_cast<int>(rd.integer(sj["x0_samples"], "/simulation/x0_samples"));
      if (s.x0_samples < 0) rd.fail("/simulation/x0_samples", "must be >= 0");
    }
    if (sj.contains("dt")) s.dt = rd.positive(sj["dt"], "/simulation/dt");
    if (sj.contains("t_end")) s.t_end = rd.positive(sj["t_end"], "/simulation/t_end");
    if (s.t_end < s.dt) rd.fail("/simulation/t_end", "t_end must be >= dt");
    if (sj.contains("eps")) s.eps = rd.positive(sj["eps"], "/simulation/eps");
    if (sj.contains("tail_fraction")) {
      s.tail_fraction = rd.positive(sj["tail_fraction"], "/simulation/tail_fraction");
      if (s.tail_fraction > 1.0) rd.fail("/simulation/tail_fraction", "must lie in (0, 1]");
    }
    if (sj.contains("write_csv")) s.write_csv = rd.boolean(sj["write_csv"], "/simulation/write_csv");
    if (sj.contains("disturbances")) {
      const json& dj = sj["disturbances"];
      if (!dj.is_array() || dj.empty()) rd.fail("/simulation/disturbances", "expected a non-empty array");
      s.disturbances.clear();
      for (std::size_t i = 0; i < dj.size(); ++i) {
        const std::string p = "/simulation/disturbances/" + std::to_string(i);
        Disturbance d = parse_disturbance(dj[i], p, rd, cfg.plant.f_bar, cfg.seed, i);
        if (d.bound() > cfg.plant.f_bar) rd.fail(p, "disturbance exceeds f_bar");
        if (d.kind() == DisturbanceKind::Constant && d.vector().size() > cfg.plant.l()) {
          rd.fail(p, "constant value longer than the disturbance dimension");
        }
        s.disturbances.push_back(std::move(d));
      }
    }
  }
  if (s.x0.empty() && s.x0_samples == 0) s.x0_samples = 10;

  if (root.contains("sweep")) {
    const json& wj = root["sweep"];
    rd.allow_keys(wj, "/sweep", {"grid"});
    rd.require(wj, "/sweep", "grid");
    const json& gj = wj["grid"];
    if (!gj.is_object() || gj.empty() || gj.size() > 2) rd.fail("/sweep/grid", "expected one or two parameter axes");
    SweepSpec sw;
    for (const auto& [name, values] : gj.items()) {
      const std::string p = "/sweep/grid/" + JsonLineIndex::escape(name);
      if (name != "mu" && name != "sigma" && name != "lambda" && name != "theta") {
        rd.fail(p, "sweep parameter must be mu, sigma, lambda or theta");
      }
      const Eigen::VectorXd v = rd.vector(values, p);
      sw.axes.emplace_back(name, std::vector<double>(v.data(), v.data() + v.size()));
    }
    cfg.sweep = std::move(sw);
  }

  if (root.contains("output")) {
    const json& outj = root["output"];
    rd.allow_keys(outj, "/output", {"dir"});
    if (outj.contains("dir")) cfg.out_dir = rd.string(outj["dir"], "/output/dir");
  }
  if (ov.out_dir) cfg.out_dir = *ov.out_dir;

  cfg.echo = root;
  cfg.echo["seed"] = cfg.seed;
  cfg.echo["options"]["strict_energy"] = o.strict_energy;
  cfg.echo["options"]["region_cap"] = o.region_cap;
  cfg.echo["output"]["dir"] = cfg.out_dir;
  return cfg;
}

inline AnalysisConfig load_config(const std::string& path, const Overrides& ov = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path, ov);
}

/// The control law certified under `mode`.
inline ControlLaw law_for(const AnalysisConfig& cfg, VertexMode mode, const std::vector<json>& specs) {
  const JsonLineIndex empty;
  const Reader rd("config", empty);
  std::vector<OddFunction> funcs;
  for (std::size_t i = 0; i < specs.size(); ++i) funcs.push_back(parse_function(specs[i], "/law/function", rd));
  if (mode == VertexMode::Scalar) return ControlLaw::scalar_wrapped(cfg.gain, funcs.front());
  if (funcs.size() == 1) return ControlLaw::componentwise(cfg.gain, funcs.front());
  return ControlLaw::componentwise(cfg.gain, std::move(funcs));
}

inline ControlLaw law_for(const AnalysisConfig& cfg, VertexMode mode) {
  return law_for(cfg, mode, cfg.function_specs);
}

}  // namespace oddcert::cli

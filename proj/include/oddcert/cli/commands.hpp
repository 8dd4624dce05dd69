#pragma once

// certify | compare | simulate | sweep. Each command reads an
// AnalysisConfig, writes its outputs under cfg.out_dir and returns the
// process exit code.

#include <Eigen/Dense>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oddcert/certify.hpp"
#include "oddcert/cli/config.hpp"
#include "oddcert/cli/report.hpp"
#include "oddcert/sim.hpp"

namespace oddcert::cli {

enum ExitCode : int { kExitCertified = 0, kExitInputError = 1, kExitInfeasible = 2, kExitDiverged = 3 };

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoFeasibleInterval:
    case ErrorCode::Infeasible:
    case ErrorCode::EmptyRegion:
    case ErrorCode::NumericalFailure:
      return kExitInfeasible;
    case ErrorCode::NonFiniteState:
      return kExitDiverged;
    default:
      return kExitInputError;
  }
}

/// Runs fn(i) for i in [0, count) on at most `workers` threads.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, count); ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

/// Uniform sample from the ball of radius r in R^n (Box-Muller direction,
/// r u^(1/n) radius), driven by a splitmix64 stream.
inline Eigen::VectorXd sample_ball(std::uint64_t& state, Eigen::Index n, double r) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u1 = 0.5 * (splitmix_uniform(state) + 1.0);
    const double u2 = 0.5 * (splitmix_uniform(state) + 1.0);
    v(i) = std::sqrt(-2.0 * std::log(std::max(u1, 1e-300))) * std::cos(2.0 * M_PI * u2);
  }
  const double norm = v.norm();
  if (!(norm > 0.0)) v = Eigen::VectorXd::Unit(n, 0);
  else v /= norm;
  const double u = 0.5 * (splitmix_uniform(state) + 1.0);
  Eigen::VectorXd x = r * std::pow(u, 1.0 / static_cast<double>(n)) * v;
  if (x.norm() > r) x *= r / x.norm() * std::nextafter(1.0, 0.0);
  return x;
}

/// Ball radius for time-to-eps checks: the configured eps, or 1.01 times the
/// smallest radius with tau gamma eps^2 > 2 chi f.
inline double choose_eps(const AnalysisConfig& cfg, const Certificate& cert) {
  if (cfg.simulation.eps) return *cfg.simulation.eps;
  const auto& a = cert.aggregates;
  const double f_term = cert.disturbance_term();
  if (f_term > 0.0) return 1.01 * std::sqrt(2.0 * a.chi_max * f_term / (a.tau_min * a.gamma_min));
  return cert.x0_radius > 0.0 ? 0.1 * cert.x0_radius : 1e-3;
}

struct ModeOutcome {
  VertexMode mode;
  std::optional<Certificate> cert;
  std::optional<Error> error;
};

inline std::vector<ModeOutcome> certify_modes(const AnalysisConfig& cfg, int workers) {
  std::vector<ModeOutcome> out;
  for (auto m : cfg.modes) out.push_back(ModeOutcome{m, std::nullopt, std::nullopt});
  parallel_for(out.size(), workers, [&](std::size_t i) {
    try {
      out[i].cert = certify(cfg.plant, law_for(cfg, out[i].mode), cfg.tau, out[i].mode, cfg.options);
    } catch (const Error& e) {
      out[i].error = e;
    }
  });
  return out;
}

inline json base_report(const AnalysisConfig& cfg, const std::string& command) {
  return json{{"tool", kToolName},
              {"version", kToolVersion},
              {"command", command},
              {"config", cfg.echo},
              {"effective_options", options_json(cfg.options)},
              {"readings", readings_json(cfg.options)},
              {"simulation_settings",
               {{"dt", num(cfg.simulation.dt)},
                {"t_end", num(cfg.simulation.t_end)},
                {"tail_fraction", num(cfg.simulation.tail_fraction)},
                {"divergence_cutoff", num(kDivergenceCutoff)}}},
              {"seed", cfg.seed}};
}

inline json error_json(VertexMode mode, const Error& e) {
  return json{{"mode", to_string(mode)}, {"code", std::string(to_string(e.code()))}, {"message", e.what()}};
}

inline std::filesystem::path ensure_out_dir(const AnalysisConfig& cfg) {
  std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline int cmd_certify(const AnalysisConfig& cfg, int workers, std::ostream& log) {
  const auto outcomes = certify_modes(cfg, workers);
  json report = base_report(cfg, "certify");
  report["certificates"] = json::array();
  report["failures"] = json::array();
  int code = kExitCertified;
  const Certificate* first = nullptr;
  for (const auto& o : outcomes) {
    if (o.error) {
      report["failures"].push_back(error_json(o.mode, *o.error));
      code = std::max(code, exit_code_for(o.error->code()));
      log << to_string(o.mode) << ": " << o.error->what() << '\n';
      continue;
    }
    const Certificate& c = *o.cert;
    if (!first) first = &c;
    json cj = certificate_json(c);
    const double eps = choose_eps(cfg, c);
    cj["settling"] = {{"eps", num(eps)},
                      {"x0_norm", num(c.x0_radius)},
                      {"T", num(settling_time(c, c.x0_radius, eps, c.f_bar))}};
    report["certificates"].push_back(std::move(cj));
    log << to_string(c.mode) << ": rho [" << c.rho_lo << ", " << c.rho_hi << "], x [" << c.x_lo << ", " << c.x_hi
        << "], x0 radius " << c.x0_radius << ", delta " << c.delta << '\n';
  }
  if (first) {
    try {
      report["comparison"] = comparison_json(compare_report(cfg.plant, cfg.gain, *first, cfg.tau.at(0), cfg.options));
    } catch (const Error& e) {
      report["comparison"] = error_json(first->mode, e);
    }
  }
  report["exit_code"] = code;
  write_json(ensure_out_dir(cfg) / "report.json", report);
  return code;
}

struct RunSummary {
  std::string law;
  std::size_t x0_index = 0;
  Eigen::VectorXd x0;
  std::string disturbance;
  double delta_emp = 0.0;
  std::optional<double> t_star;
  double max_abs_component = 0.0;
  bool diverged = false;
  std::string csv;
};

inline json run_json(const RunSummary& r) {
  return json{{"law", r.law},
              {"x0_index", r.x0_index},
              {"x0", matrix_json(r.x0.transpose())[0]},
              {"disturbance", r.disturbance},
              {"delta_emp", num(r.delta_emp)},
              {"t_star", r.t_star ? num(*r.t_star) : json(nullptr)},
              {"max_abs_component", num(r.max_abs_component)},
              {"diverged", r.diverged},
              {"csv", r.csv}};
}

inline RunSummary summarize(const Trajectory& traj, double tail_fraction, double eps) {
  RunSummary r;
  r.delta_emp = empirical_ultimate_bound(traj, tail_fraction);
  r.t_star = time_to_ball(traj, eps);
  for (const auto& x : traj.states) r.max_abs_component = std::max(r.max_abs_component, x.cwiseAbs().maxCoeff());
  r.diverged = traj.diverged;
  return r;
}

inline int cmd_simulate(const AnalysisConfig& cfg, int workers, std::ostream& log) {
  const auto outcomes = certify_modes(cfg, workers);
  json report = base_report(cfg, "simulate");
  report["certificates"] = json::array();
  report["failures"] = json::array();
  report["runs"] = json::array();
  const auto dir = ensure_out_dir(cfg);
  int code = kExitCertified;
  std::uint64_t rng = cfg.seed;

  for (const auto& o : outcomes) {
    std::vector<Eigen::VectorXd> x0s = cfg.simulation.x0;
    std::optional<double> eps = cfg.simulation.eps;
    double T = kInf;
    json block{{"mode", to_string(o.mode)}};
    if (o.cert) {
      const Certificate& c = *o.cert;
      for (int i = 0; i < cfg.simulation.x0_samples; ++i) x0s.push_back(sample_ball(rng, cfg.plant.n(), c.x0_radius));
      eps = choose_eps(cfg, c);
      T = settling_time(c, c.x0_radius, *eps, c.f_bar);
      block["certificate"] = certificate_json(c);
      block["eps"] = num(*eps);
      block["T"] = num(T);
    } else {
      report["failures"].push_back(error_json(o.mode, *o.error));
      log << to_string(o.mode) << ": " << o.error->what() << '\n';
      if (cfg.simulation.x0.empty()) {
        code = std::max(code, exit_code_for(o.error->code()));
        continue;
      }
    }
    const double eps_used = eps.value_or(1e-3);
    const ControlLaw law = law_for(cfg, o.mode);
    const auto& dists = cfg.simulation.disturbances;
    std::vector<RunSummary> runs(x0s.size() * dists.size());
    parallel_for(runs.size(), workers, [&](std::size_t idx) {
      const std::size_t xi = idx / dists.size();
      const std::size_t di = idx % dists.size();
      const Trajectory traj = simulate(cfg.plant, law, dists[di], x0s[xi], cfg.simulation.dt, cfg.simulation.t_end);
      RunSummary r = summarize(traj, cfg.simulation.tail_fraction, eps_used);
      r.law = to_string(o.mode);
      r.x0_index = xi;
      r.x0 = x0s[xi];
      r.disturbance = dists[di].describe();
      if (cfg.simulation.write_csv) {
        const std::string name = "sim_" + to_string(o.mode) + "_x" + std::to_string(xi) + "_d" + std::to_string(di) + ".csv";
        std::ofstream out(dir / name);
        write_csv(out, traj);
        r.csv = name;
      }
      runs[idx] = std::move(r);
    });
    bool contained = true;
    bool settled = true;
    bool bounded = true;
    for (const auto& r : runs) {
      if (r.diverged) code = std::max(code, static_cast<int>(kExitDiverged));
      if (o.cert) {
        contained = contained && r.max_abs_component <= o.cert->x_hi * 1.01;
        settled = settled && r.t_star && *r.t_star <= T * 1.01;
        bounded = bounded && r.delta_emp <= o.cert->delta * 1.01;
      }
      report["runs"].push_back(run_json(r));
    }
    if (o.cert) {
      block["checks"] = {{"contained", contained}, {"time_to_eps_within_T", settled}, {"delta_emp_within_delta", bounded}};
      log << to_string(o.mode) << ": " << runs.size() << " runs, contained " << contained << ", settled " << settled
          << ", bounded " << bounded << '\n';
    }
    report["certificates"].push_back(std::move(block));
  }
  report["exit_code"] = code;
  write_json(dir / "simulation.json", report);
  return code;
}

inline int cmd_compare(const AnalysisConfig& cfg, int workers, std::ostream& log) {
  const auto outcomes = certify_modes(cfg, workers);
  json report = base_report(cfg, "compare");
  report["failures"] = json::array();
  const Certificate* cert = nullptr;
  for (const auto& o : outcomes) {
    if (o.cert && !cert) cert = &*o.cert;
    if (o.error) report["failures"].push_back(error_json(o.mode, *o.error));
  }
  if (!cert) {
    report["exit_code"] = kExitInfeasible;
    write_json(ensure_out_dir(cfg) / "compare.json", report);
    for (const auto& o : outcomes) log << to_string(o.mode) << ": " << o.error->what() << '\n';
    return exit_code_for(outcomes.front().error->code());
  }
  const Comparison cmp = compare_report(cfg.plant, cfg.gain, *cert, cfg.tau.at(0), cfg.options);
  report["certificate"] = certificate_json(*cert);
  report["comparison"] = comparison_json(cmp);

  struct Row {
    std::string law;
    std::string disturbance;
    double delta_emp = 0.0;
    bool diverged = false;
  };
  std::vector<std::pair<std::string, ControlLaw>> laws{{"linear", ControlLaw::linear(cfg.gain)}};
  if (cfg.function_specs.size() == 1) {
    laws.emplace_back("componentwise", law_for(cfg, VertexMode::Componentwise));
    laws.emplace_back("scalar", law_for(cfg, VertexMode::Scalar));
  } else {
    laws.emplace_back("componentwise", law_for(cfg, VertexMode::Componentwise));
  }
  const auto& dists = cfg.simulation.disturbances;
  std::vector<Row> rows(laws.size() * dists.size());
  const Eigen::VectorXd x0 = cfg.simulation.x0.empty() ? Eigen::VectorXd::Zero(cfg.plant.n()) : cfg.simulation.x0.front();
  parallel_for(rows.size(), workers, [&](std::size_t idx) {
    const auto& [name, law] = laws[idx / dists.size()];
    const auto& d = dists[idx % dists.size()];
    const Trajectory traj = simulate(cfg.plant, law, d, x0, cfg.simulation.dt, cfg.simulation.t_end);
    rows[idx] = Row{name, d.describe(), empirical_ultimate_bound(traj, cfg.simulation.tail_fraction), traj.diverged};
  });

  int code = kExitCertified;
  json table = json::array();
  std::ofstream csv(ensure_out_dir(cfg) / "compare.csv");
  csv << std::setprecision(17) << "law,disturbance,delta_emp,delta_lin,delta_nl\n";
  for (const auto& r : rows) {
    if (r.diverged) code = kExitDiverged;
    table.push_back({{"law", r.law}, {"disturbance", r.disturbance}, {"delta_emp", num(r.delta_emp)}, {"diverged", r.diverged}});
    csv << r.law << ",\"" << r.disturbance << "\"," << r.delta_emp << ',' << cmp.linear.delta << ','
        << cmp.nonlinear.delta << '\n';
  }
  report["empirical"] = std::move(table);
  report["exit_code"] = code;
  write_json(ensure_out_dir(cfg) / "compare.json", report);
  log << "delta_lin " << cmp.linear.delta << ", delta_nl " << cmp.nonlinear.delta << " (rho_hi " << cmp.rho_hi
      << "), delta_nl <= delta_lin: " << (cmp.nonlinear_not_worse ? "true" : "false") << '\n';
  return code;
}

/// Function spec with one parameter replaced. For affine_plus, theta is the
/// outer parameter and everything else goes to the base function.
inline json with_parameter(json spec, const std::string& name, double value) {
  if (spec.value("family", "") == "affine_plus" && name != "theta") {
    spec["base"] = with_parameter(spec["base"], name, value);
    return spec;
  }
  spec[name] = value;
  return spec;
}

struct SweepRow {
  std::vector<double> params;
  VertexMode mode = VertexMode::Componentwise;
  std::string status;
  std::optional<Certificate> cert;
  std::string message;
};

inline std::vector<SweepRow> run_sweep(const AnalysisConfig& cfg, int workers) {
  if (!cfg.sweep) throw Error(ErrorCode::ConfigError, "config has no 'sweep' section");
  if (cfg.function_specs.size() != 1) throw Error(ErrorCode::ConfigError, "sweep needs a single 'function'");
  const auto& axes = cfg.sweep->axes;
  std::vector<std::vector<double>> points{{}};
  for (const auto& [name, values] : axes) {
    std::vector<std::vector<double>> next;
    for (const auto& p : points) {
      for (double v : values) {
        auto q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  std::vector<SweepRow> rows;
  for (const auto& p : points) {
    for (auto m : cfg.modes) rows.push_back(SweepRow{p, m, "", std::nullopt, ""});
  }
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    auto& row = rows[i];
    try {
      json spec = cfg.function_specs.front();
      for (std::size_t a = 0; a < axes.size(); ++a) spec = with_parameter(spec, axes[a].first, row.params[a]);
      const ControlLaw law = law_for(cfg, row.mode, {spec});
      row.cert = certify(cfg.plant, law, cfg.tau, row.mode, cfg.options);
      row.status = "certified";
    } catch (const Error& e) {
      row.status = exit_code_for(e.code()) == kExitInfeasible ? "infeasible" : "invalid";
      row.message = e.what();
    }
  });
  return rows;
}

inline int cmd_sweep(const AnalysisConfig& cfg, int workers, std::ostream& log) {
  const auto rows = run_sweep(cfg, workers);
  const auto dir = ensure_out_dir(cfg);
  std::ofstream csv(dir / "sweep.csv");
  csv << std::setprecision(17) << "mode";
  for (const auto& [name, values] : cfg.sweep->axes) csv << ',' << name;
  csv << ",status,rho_lo,rho_hi,x_lo,x_hi,region_capped,x0_radius,gamma_star,delta,message\n";
  json jrows = json::array();
  bool any = false;
  for (const auto& r : rows) {
    csv << to_string(r.mode);
    for (double p : r.params) csv << ',' << p;
    csv << ',' << r.status;
    json jr{{"mode", to_string(r.mode)}, {"params", r.params}, {"status", r.status}, {"message", r.message}};
    if (r.cert) {
      any = true;
      const auto& c = *r.cert;
      const auto fmt = [](double v) {
        std::ostringstream os;
        os << std::setprecision(17);
        if (std::isinf(v)) os << (v > 0 ? "inf" : "-inf");
        else os << v;
        return os.str();
      };
      csv << ',' << fmt(c.rho_lo) << ',' << fmt(c.rho_hi) << ',' << fmt(c.x_lo) << ',' << fmt(c.x_hi) << ','
          << (c.region_capped ? "true" : "false") << ',' << fmt(c.x0_radius) << ',' << fmt(c.gamma_star) << ','
          << fmt(c.delta) << ",";
      jr["certificate"] = certificate_json(c);
    } else {
      csv << ",,,,,,,,,\"" << r.message << '"';
    }
    csv << '\n';
    jrows.push_back(std::move(jr));
  }
  json report = base_report(cfg, "sweep");
  report["rows"] = std::move(jrows);
  report["exit_code"] = any ? kExitCertified : kExitInfeasible;
  write_json(dir / "sweep.json", report);
  log << rows.size() << " sweep rows written to " << (dir / "sweep.csv").string() << '\n';
  return any ? kExitCertified : kExitInfeasible;
}

/// Entry point shared by the executable and the tests.
inline int run_command(const std::string& command, const std::string& config_path, const Overrides& ov, int workers,
                       std::ostream& log) {
  try {
    const AnalysisConfig cfg = load_config(config_path, ov);
    if (command == "certify") return cmd_certify(cfg, workers, log);
    if (command == "compare") return cmd_compare(cfg, workers, log);
    if (command == "simulate") return cmd_simulate(cfg, workers, log);
    if (command == "sweep") return cmd_sweep(cfg, workers, log);
    log << "unknown command '" << command << "'\n";
    return kExitInputError;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitInputError;
  }
}

}  // namespace oddcert::cli

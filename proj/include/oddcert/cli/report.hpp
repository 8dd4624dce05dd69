#pragma once

// JSON serialization of certificates and reports. Non-finite numbers are
// written as the strings "inf", "-inf" and "nan".

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "oddcert/certify.hpp"
#include "oddcert/errors.hpp"

namespace oddcert::cli {

using json = nlohmann::json;

inline constexpr const char* kToolName = "oddcert";
inline constexpr const char* kToolVersion = "1.0.0";

inline json num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

inline double read_num(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::nan("");
  }
  throw Error(ErrorCode::ConfigError, "expected a number in report, got " + j.dump());
}

inline json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(num(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd read_matrix(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = read_num(j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
  }
  return m;
}

inline json options_json(const CertifyOptions& o) {
  return json{{"rho_start", num(o.rho_start)},
              {"rho_cap", num(o.rho_cap)},
              {"region_cap", num(o.region_cap)},
              {"initial_step", num(o.initial_step)},
              {"growth", num(o.growth)},
              {"min_step_ratio", num(o.min_step_ratio)},
              {"max_intervals", o.max_intervals},
              {"anchor_scan_start", num(o.anchor_scan_start)},
              {"anchor_scan_factor", num(o.anchor_scan_factor)},
              {"strict_energy", o.strict_energy},
              {"literal_chi_block", o.literal_chi_block},
              {"bisection_gap", num(o.bisection_gap)},
              {"tune_rho_lo", o.tune_rho_lo},
              {"rho_lo_candidates_per_interval", o.rho_lo_candidates_per_interval},
              {"vertex_cap", o.vertex_cap},
              {"margin", num(o.lmi.margin)},
              {"chi_cap", num(o.lmi.chi_cap)},
              {"verify_tol", num(o.lmi.verify_tol)},
              {"sdp_gap_tol", num(o.lmi.solver.gap_tol)},
              {"sdp_newton_tol", num(o.lmi.solver.newton_tol)},
              {"sector_points_per_decade", o.grid.points_per_decade},
              {"sector_log10_range", json::array({o.grid.log10_min, o.grid.log10_max})},
              {"sector_bisection_rel_tol", num(o.grid.bisection_rel_tol)},
              {"sector_membership_rel_tol", num(o.grid.membership_rel_tol)}};
}

/// How the certificate formulas were read, so a report can be audited.
inline json readings_json(const CertifyOptions& o) {
  return json{
      {"decay_rate", "tau_i per interval in the (1,1) block tau_i P_i"},
      {"disturbance_term", o.strict_energy ? "f_bar^2 (strict_energy)" : "f_bar"},
      {"ultimate_bound_block",
       o.literal_chi_block ? "(2,2) block pinned to -tau I, gamma maximized" : "(2,2) block -chi I, bisection on gamma tau/chi"},
      {"scalar_region",
       "|s| in [x_lo, x_hi] (symmetric); estimated along x_1 = ... = x_n with K x = sum(k) s, checked by simulation"},
      {"x0_radius", "x0_radius^2 = (tau_min gamma_min x_hi^2 - 2 chi_max f_term) / (n^2 tau_min p_norm_max), clamped to x_hi"},
      {"unbounded_rho_hi", "a search cap on rho_hi is never reported as certified infinity"}};
}

inline json solution_json(const LMISolution& s) {
  return json{{"P", matrix_json(s.P)}, {"chi", num(s.chi)}, {"gamma", num(s.gamma)}, {"margin", num(s.margin)}};
}

inline LMISolution read_solution(const json& j) {
  LMISolution s;
  s.P = read_matrix(j.at("P"));
  s.chi = read_num(j.at("chi"));
  s.gamma = read_num(j.at("gamma"));
  s.margin = read_num(j.at("margin"));
  return s;
}

inline json certificate_json(const Certificate& c) {
  json intervals = json::array();
  for (const auto& iv : c.intervals) {
    intervals.push_back(json{{"rho_prev", num(iv.rho_prev)},
                             {"rho_cur", num(iv.rho_cur)},
                             {"tau", num(iv.tau)},
                             {"vertex_count", iv.vertex_count},
                             {"solution", solution_json(iv.solution)}});
  }
  const auto& a = c.aggregates;
  const double f_term = c.disturbance_term();
  const double nn = static_cast<double>(c.n * c.n);
  const double radicand = a.tau_min * a.gamma_min * c.x_hi_used * c.x_hi_used - 2.0 * a.chi_max * f_term;
  const double r0 = c.x0_radius_unclamped;
  json initial_set{
      {"inputs", {{"tau_min", num(a.tau_min)},
                  {"gamma_min", num(a.gamma_min)},
                  {"chi_max", num(a.chi_max)},
                  {"p_norm_max", num(a.p_norm_max)},
                  {"x_hi_used", num(c.x_hi_used)},
                  {"f_term", num(f_term)},
                  {"n", c.n}}},
      {"formula", "x0_radius^2 = (tau_min*gamma_min*x_hi^2 - 2*chi_max*f_term) / (n^2*tau_min*p_norm_max)"},
      {"radicand", num(radicand)},
      {"x0_radius_unclamped", num(r0)},
      {"x0_radius", num(c.x0_radius)},
      {"audit", json::array({
                    {{"relation", "x0_radius^2*n^2*tau_min*p_norm_max + 2*chi_max*f_term = tau_min*gamma_min*x_hi^2"},
                     {"residual", num(r0 * r0 * nn * a.tau_min * a.p_norm_max + 2.0 * a.chi_max * f_term -
                                      a.tau_min * a.gamma_min * c.x_hi_used * c.x_hi_used)}},
                    {{"relation", "gamma_min*n^2*x_hi^2 = 2*chi_max*f_term/tau_min + p_norm_max*x0_radius^2"},
                     {"residual", num(a.gamma_min * nn * c.x_hi_used * c.x_hi_used -
                                      2.0 * a.chi_max * f_term / a.tau_min - a.p_norm_max * r0 * r0)}}})}};
  json warnings = c.warnings;
  return json{{"mode", to_string(c.mode)},
              {"n", c.n},
              {"intervals", std::move(intervals)},
              {"rho_lo", num(c.rho_lo)},
              {"rho_hi", num(c.rho_hi)},
              {"x_lo", num(c.x_lo)},
              {"x_hi", num(c.x_hi)},
              {"x_hi_used", num(c.x_hi_used)},
              {"region_capped", c.region_capped},
              {"x0_radius", num(c.x0_radius)},
              {"x0_radius_unclamped", num(c.x0_radius_unclamped)},
              {"x0_clamped", c.x0_clamped},
              {"degenerate_initial_set", c.degenerate_initial_set},
              {"aggregates", {{"tau_min", num(a.tau_min)},
                              {"gamma_min", num(a.gamma_min)},
                              {"chi_max", num(a.chi_max)},
                              {"p_norm_max", num(a.p_norm_max)}}},
              {"f_bar", num(c.f_bar)},
              {"strict_energy", c.strict_energy},
              {"gamma_star", num(c.gamma_star)},
              {"delta", num(c.delta)},
              {"counters", {{"lmi_solves", c.counters.lmi_solves}, {"vertex_solves", c.counters.vertex_solves}}},
              {"search_length", num(c.search_length)},
              {"search_anchor", num(c.search_anchor)},
              {"initial_set", std::move(initial_set)},
              {"warnings", std::move(warnings)}};
}

inline Certificate read_certificate(const json& j) {
  Certificate c;
  const auto mode = j.at("mode").get<std::string>();
  c.mode = mode == "scalar" ? VertexMode::Scalar : VertexMode::Componentwise;
  c.n = j.at("n").get<Eigen::Index>();
  for (const auto& iv : j.at("intervals")) {
    IntervalCertificate ic;
    ic.rho_prev = read_num(iv.at("rho_prev"));
    ic.rho_cur = read_num(iv.at("rho_cur"));
    ic.tau = read_num(iv.at("tau"));
    ic.vertex_count = iv.at("vertex_count").get<int>();
    ic.solution = read_solution(iv.at("solution"));
    c.intervals.push_back(std::move(ic));
  }
  c.rho_lo = read_num(j.at("rho_lo"));
  c.rho_hi = read_num(j.at("rho_hi"));
  c.x_lo = read_num(j.at("x_lo"));
  c.x_hi = read_num(j.at("x_hi"));
  c.x_hi_used = read_num(j.at("x_hi_used"));
  c.region_capped = j.at("region_capped").get<bool>();
  c.x0_radius = read_num(j.at("x0_radius"));
  c.x0_radius_unclamped = read_num(j.at("x0_radius_unclamped"));
  c.x0_clamped = j.at("x0_clamped").get<bool>();
  c.degenerate_initial_set = j.at("degenerate_initial_set").get<bool>();
  const auto& a = j.at("aggregates");
  c.aggregates = Aggregates{read_num(a.at("tau_min")), read_num(a.at("gamma_min")), read_num(a.at("chi_max")),
                            read_num(a.at("p_norm_max"))};
  c.f_bar = read_num(j.at("f_bar"));
  c.strict_energy = j.at("strict_energy").get<bool>();
  c.gamma_star = read_num(j.at("gamma_star"));
  c.delta = read_num(j.at("delta"));
  c.counters.lmi_solves = j.at("counters").at("lmi_solves").get<std::int64_t>();
  c.counters.vertex_solves = j.at("counters").at("vertex_solves").get<std::int64_t>();
  c.search_length = read_num(j.at("search_length"));
  c.search_anchor = read_num(j.at("search_anchor"));
  c.warnings = j.at("warnings").get<std::vector<std::string>>();
  return c;
}

inline json ultimate_bound_json(const UltimateBound& ub) {
  return json{{"gamma_star", num(ub.gamma_star)},
              {"delta", num(ub.delta)},
              {"bisection_steps", ub.bisection_steps},
              {"monotone", ub.monotone},
              {"solution", solution_json(ub.solution)}};
}

inline json comparison_json(const Comparison& c) {
  return json{{"rho_hi", num(c.rho_hi)},
              {"linear", ultimate_bound_json(c.linear)},
              {"nonlinear", ultimate_bound_json(c.nonlinear)},
              {"region", {{"x_lo", num(c.region.x_lo)}, {"x_hi", num(c.region.x_hi)}}},
              {"delta_nl_le_delta_lin", c.nonlinear_not_worse}};
}

}  // namespace oddcert::cli

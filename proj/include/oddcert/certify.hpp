#pragma once

// Stability certificates for the componentwise law u = sum k_i phi_i(x_i) and
// the scalar-wrapped law u = phi(K x).
//
// The slope axis is covered by a chain of adjacent boxes [rho_0, rho_1],
// [rho_1, rho_2], ... each carrying its own Lyapunov matrix. From the chain
// we get the sector [rho_lo, rho_hi], the region where that sector holds,
// the admissible initial ball, a settling-time bound and an ultimate bound.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oddcert/errors.hpp"
#include "oddcert/lmi.hpp"
#include "oddcert/model.hpp"
#include "oddcert/sector.hpp"

namespace oddcert {

/// Decay rate per interval: one value for all, optionally overridden.
struct TauSchedule {
  double tau = 0.1;
  std::vector<double> per_interval;

  [[nodiscard]] double at(std::size_t i) const { return i < per_interval.size() ? per_interval[i] : tau; }
};

struct CertifyOptions {
  double rho_start = 0.0;
  /// Search ceiling used when the origin slope is unbounded.
  double rho_cap = 1e3;
  /// Substitute for an unbounded x_hi in the initial-set formula.
  double region_cap = 1e3;
  /// Initial step; <= 0 means 0.1 * max(anchor, 1).
  double initial_step = 0.0;
  double growth = 2.0;
  /// Steps are refined down to this fraction of the initial step.
  double min_step_ratio = 1e-3;
  int max_intervals = 64;
  double anchor_scan_start = 1e-3;
  double anchor_scan_factor = 2.0;
  /// Use f_bar^2 instead of f_bar in the chi*f terms (energy reading of the
  /// dissipation inequality).
  bool strict_energy = false;
  /// Ultimate bound from the fixed chi = tau form instead of the normalized
  /// ratio bisection. Both give the same optimum.
  bool literal_chi_block = false;
  /// Relative gap at which the gamma bisection stops.
  double bisection_gap = 1e-4;
  /// Move rho_lo up through the chain to maximize the x0 radius.
  bool tune_rho_lo = true;
  int rho_lo_candidates_per_interval = 4;
  std::uint64_t vertex_cap = kDefaultVertexCap;
  SolveOptions lmi;
  SectorGridOptions grid;
};

struct IntervalCertificate {
  double rho_prev = 0.0;
  double rho_cur = 0.0;
  double tau = 0.0;
  LMISolution solution;
  int vertex_count = 0;
};

struct SearchCounters {
  std::int64_t lmi_solves = 0;
  std::int64_t vertex_solves = 0;
};

struct SearchResult {
  std::vector<IntervalCertificate> intervals;
  double anchor = 0.0;
  double ceiling = 0.0;
  bool ceiling_from_origin_slope = false;
  bool hit_ceiling = false;
  SearchCounters counters;
  std::vector<std::string> notes;

  [[nodiscard]] double total_length() const {
    return intervals.empty() ? 0.0 : intervals.back().rho_cur - intervals.front().rho_prev;
  }
};

struct Aggregates {
  double tau_min = 0.0;
  double gamma_min = 0.0;
  double chi_max = 0.0;
  double p_norm_max = 0.0;
};

inline Aggregates aggregate(const std::vector<IntervalCertificate>& intervals) {
  if (intervals.empty()) throw Error(ErrorCode::InvalidParameter, "no intervals to aggregate");
  Aggregates a{kInf, kInf, 0.0, 0.0};
  for (const auto& iv : intervals) {
    a.tau_min = std::min(a.tau_min, iv.tau);
    a.gamma_min = std::min(a.gamma_min, iv.solution.gamma);
    a.chi_max = std::max(a.chi_max, iv.solution.chi);
    a.p_norm_max = std::max(a.p_norm_max, spectral_norm(iv.solution.P));
  }
  return a;
}

struct UltimateBound {
  double gamma_star = 0.0;
  double delta = 0.0;
  LMISolution solution;
  int bisection_steps = 0;
  /// Feasibility re-checked at three points below gamma_star.
  bool monotone = true;
};

struct Certificate {
  VertexMode mode = VertexMode::Componentwise;
  std::vector<IntervalCertificate> intervals;
  double rho_lo = 0.0;
  double rho_hi = 0.0;
  double x_lo = 0.0;
  /// Region bound as found (may be +inf).
  double x_hi = kInf;
  /// Bound used in the initial-set formula (x_hi, or region_cap if unbounded).
  double x_hi_used = 0.0;
  bool region_capped = false;
  double x0_radius = 0.0;
  double x0_radius_unclamped = 0.0;
  bool x0_clamped = false;
  bool degenerate_initial_set = false;
  Aggregates aggregates;
  double f_bar = 0.0;
  bool strict_energy = false;
  Eigen::Index n = 0;
  double gamma_star = 0.0;
  double delta = 0.0;
  SearchCounters counters;
  /// Slope length covered by the untrimmed chain and where it started.
  double search_length = 0.0;
  double search_anchor = 0.0;
  std::vector<std::string> warnings;

  /// f_bar as it enters the chi * f terms.
  [[nodiscard]] double disturbance_term() const { return strict_energy ? f_bar * f_bar : f_bar; }
};

namespace detail {

struct IntervalProbe {
  SolveStatus status;
  std::optional<LMISolution> solution;
  int vertex_count = 0;
};

class IntervalSolver {
 public:
  IntervalSolver(const Plant& plant, const Gain& gain, VertexMode mode, const CertifyOptions& opt,
                 SearchCounters& counters)
      : plant_(plant), gain_(gain), mode_(mode), opt_(opt), counters_(counters) {}

  IntervalProbe probe(double lo, double hi, double tau, const SolveOptions& solve_opt) const {
    const auto corners = vertex_set(lo, hi, plant_.n(), mode_, opt_.vertex_cap);
    std::vector<VertexLMI> vertices;
    vertices.reserve(corners.size());
    for (const auto& psi : corners) vertices.push_back(assemble(plant_, gain_, psi, tau));
    ++counters_.lmi_solves;
    counters_.vertex_solves += static_cast<std::int64_t>(vertices.size());
    const SolveResult r = solve_feasibility(vertices, solve_opt);
    return {r.status, r.solution, static_cast<int>(vertices.size())};
  }

  IntervalProbe probe(double lo, double hi, double tau) const { return probe(lo, hi, tau, opt_.lmi); }

 private:
  const Plant& plant_;
  const Gain& gain_;
  VertexMode mode_;
  const CertifyOptions& opt_;
  SearchCounters& counters_;
};

inline std::vector<SlopeProfile> profiles_of(const ControlLaw& law) {
  std::vector<SlopeProfile> out;
  if (law.variant() == LawVariant::Linear) {
    out.emplace_back(OddFunction::identity());
  } else {
    for (const auto& f : law.functions()) out.emplace_back(f);
  }
  return out;
}

inline std::optional<double> common_constant_slope(const std::vector<SlopeProfile>& profiles) {
  std::optional<double> c;
  for (const auto& p : profiles) {
    const auto s = p.func.constant_slope();
    if (!s) return std::nullopt;
    if (c && *c != *s) return std::nullopt;
    c = s;
  }
  return c;
}

}  // namespace detail

/// Chains slope boxes upward from the lowest feasible anchor until no step of
/// at least min_step_ratio * initial_step is feasible, the ceiling is
/// reached, or max_intervals boxes exist. The ceiling is the largest slope
/// the functions attain when the origin slope is finite, rho_cap otherwise.
inline SearchResult multistep_search(const Plant& plant, const Gain& gain, const std::vector<SlopeProfile>& profiles,
                                     const TauSchedule& taus, VertexMode mode, const CertifyOptions& opt = {}) {
  check_gain(plant, gain);
  if (profiles.empty()) throw Error(ErrorCode::InvalidParameter, "at least one function is required");
  SearchResult res;
  detail::IntervalSolver solver(plant, gain, mode, opt, res.counters);

  // Linear laws: the slope box is the single point rho = c.
  if (const auto c = detail::common_constant_slope(profiles)) {
    const auto pr = solver.probe(*c, *c, taus.at(0));
    if (pr.status != SolveStatus::Feasible) {
      throw Error(ErrorCode::NoFeasibleInterval, "the linear loop admits no certificate at rho = " + std::to_string(*c));
    }
    res.intervals.push_back({*c, *c, taus.at(0), *pr.solution, pr.vertex_count});
    res.anchor = *c;
    res.ceiling = *c;
    res.ceiling_from_origin_slope = true;
    res.hit_ceiling = true;
    res.notes.emplace_back("linear function: slope box degenerates to the point rho = " + std::to_string(*c));
    return res;
  }

  double inf_slope = kInf;
  double sup_slope = 0.0;
  bool origin_finite = true;
  for (const auto& p : profiles) {
    const auto [lo, hi] = slope_range(p, opt.grid);
    inf_slope = std::min(inf_slope, lo);
    sup_slope = std::max(sup_slope, hi);
    origin_finite = origin_finite && std::isfinite(p.rho_at_origin);
  }
  if (origin_finite && std::isfinite(sup_slope)) {
    res.ceiling = sup_slope;
    res.ceiling_from_origin_slope = true;
  } else {
    res.ceiling = opt.rho_cap;
    res.notes.emplace_back("origin slope unbounded: search ceiling rho_cap = " + std::to_string(opt.rho_cap));
  }
  const double ceiling = res.ceiling;
  const double start = std::max(opt.rho_start, std::max(0.0, inf_slope));
  if (!(start < ceiling)) {
    throw Error(ErrorCode::NoFeasibleInterval, "search start is not below the ceiling");
  }

  // An anchor must carry a box ten refinement steps wide, so the chain can
  // leave it.
  const auto anchor_ok = [&](double rho) {
    const double width = 10.0 * opt.min_step_ratio * 0.1 * std::max(rho, 1.0);
    return solver.probe(rho, std::min(rho + width, ceiling), taus.at(0)).status == SolveStatus::Feasible;
  };

  double anchor = start;
  if (!anchor_ok(start)) {
    double bad = start;
    double cand = start > 0.0 ? start * opt.anchor_scan_factor : opt.anchor_scan_start;
    bool found = false;
    while (cand < ceiling) {
      if (anchor_ok(cand)) {
        found = true;
        break;
      }
      bad = cand;
      cand *= opt.anchor_scan_factor;
    }
    if (!found) {
      throw Error(ErrorCode::NoFeasibleInterval, "no slope in [" + std::to_string(start) + ", " +
                                                     std::to_string(ceiling) + ") admits a certificate");
    }
    double good = cand;
    while (good - bad > 1e-3 * good) {
      const double mid = 0.5 * (good + bad);
      if (anchor_ok(mid)) good = mid;
      else bad = mid;
    }
    anchor = good;
    res.notes.emplace_back("rho_lo raised from " + std::to_string(start) + " to feasible anchor " +
                           std::to_string(anchor));
  }
  res.anchor = anchor;

  const double step0 = opt.initial_step > 0.0 ? opt.initial_step : 0.1 * std::max(anchor, 1.0);
  const double min_step = opt.min_step_ratio * step0;
  double step = step0;
  double current = anchor;

  while (static_cast<int>(res.intervals.size()) < opt.max_intervals && current < ceiling) {
    const std::size_t idx = res.intervals.size();
    const double tau = taus.at(idx);
    const double hi = std::min(current + step, ceiling);
    auto pr = solver.probe(current, hi, tau);
    if (pr.status == SolveStatus::Feasible) {
      res.intervals.push_back({current, hi, tau, *pr.solution, pr.vertex_count});
      current = hi;
      step *= opt.growth;
      continue;
    }
    // Largest feasible length below the failed one, to min_step resolution.
    double good_len = 0.0;
    double bad_len = hi - current;
    std::optional<detail::IntervalProbe> good_probe;
    while (bad_len - good_len > min_step) {
      const double mid = 0.5 * (good_len + bad_len);
      auto trial = solver.probe(current, current + mid, tau);
      if (trial.status == SolveStatus::Feasible) {
        good_len = mid;
        good_probe = std::move(trial);
      } else {
        bad_len = mid;
      }
    }
    if (!good_probe || good_len < min_step) break;
    res.intervals.push_back({current, current + good_len, tau, *good_probe->solution, good_probe->vertex_count});
    current += good_len;
    step = good_len;
  }

  if (res.intervals.empty()) {
    throw Error(ErrorCode::NoFeasibleInterval, "no interval of length >= " + std::to_string(min_step) +
                                                   " above anchor " + std::to_string(anchor));
  }
  res.hit_ceiling = current >= ceiling;
  return res;
}

/// Longest single box [anchor, hi] certified by one common P, for comparison
/// with the chained search. Same ceiling and resolution as the chain.
inline double single_interval_length(const Plant& plant, const Gain& gain, const SearchResult& chain, VertexMode mode,
                                     double tau, const CertifyOptions& opt = {}) {
  SearchCounters counters;
  detail::IntervalSolver solver(plant, gain, mode, opt, counters);
  const double anchor = chain.anchor;
  const double ceiling = chain.ceiling;
  if (!(anchor < ceiling)) return 0.0;
  if (solver.probe(anchor, ceiling, tau).status == SolveStatus::Feasible) return ceiling - anchor;
  const double step0 = opt.initial_step > 0.0 ? opt.initial_step : 0.1 * std::max(anchor, 1.0);
  const double min_step = opt.min_step_ratio * step0;
  double good = 0.0;
  double bad = ceiling - anchor;
  while (bad - good > min_step) {
    const double mid = 0.5 * (good + bad);
    if (solver.probe(anchor, anchor + mid, tau).status == SolveStatus::Feasible) good = mid;
    else bad = mid;
  }
  return good;
}

/// Largest gamma (in the chi = tau scaling) for the loop M = A + B K Theta,
/// and delta = sqrt(f_bar / gamma).
///
/// Default route: bisection on r = gamma tau / chi under the P <= I
/// normalization. With literal_chi_block the (2,2) block is pinned to -tau I
/// and gamma is maximized directly.
inline UltimateBound ultimate_bound(const Plant& plant, const Gain& gain, const Eigen::VectorXd& theta, double tau,
                                    const CertifyOptions& opt = {});

namespace detail {

inline double delta_from_gamma(double f_bar, double gamma, bool strict_energy) {
  if (f_bar == 0.0) return 0.0;
  const double f_term = strict_energy ? f_bar * f_bar : f_bar;
  return std::sqrt(f_term / gamma);
}

inline LMISolution rescale_to_chi(const LMISolution& s, double chi_target) {
  const double c = chi_target / s.chi;
  return {c * s.P, chi_target, c * s.gamma, c * s.margin};
}

}  // namespace detail

/// gamma maximized with chi pinned to `chi`; P bounded by p_cap I.
inline std::optional<LMISolution> maximize_gamma_fixed_chi(const VertexLMI& vertex, double chi, double p_cap = 1e6,
                                                           double margin = 1e-9, const sdp::Options& solver = {},
                                                           double verify_tol = kDefaultVerifyTol) {
  const Eigen::Index n = vertex.n();
  const Eigen::Index l = vertex.l();
  const Eigen::Index size = n + l;
  const Eigen::MatrixXd In = Eigen::MatrixXd::Identity(n, n);
  detail::UnknownLayout layout(n, false);
  // Variables: upper triangle of P, then gamma (in the chi slot of the layout).
  const int g = layout.chi_index();
  sdp::Program prog;
  prog.num_vars = layout.num_vars();
  {
    sdp::Block b;
    b.constant = -margin * Eigen::MatrixXd::Identity(size, size);
    b.constant.bottomRightCorner(l, l) += chi * Eigen::MatrixXd::Identity(l, l);
    for (int k = 0; k < layout.num_p(); ++k) {
      const Eigen::MatrixXd S = layout.basis(k);
      Eigen::MatrixXd G = Eigen::MatrixXd::Zero(size, size);
      G.topLeftCorner(n, n) = -(vertex.closed_loop.transpose() * S + S * vertex.closed_loop + vertex.tau * S);
      G.topRightCorner(n, l) = -S * vertex.disturbance;
      G.bottomLeftCorner(l, n) = G.topRightCorner(n, l).transpose();
      b.terms.emplace_back(k, std::move(G));
    }
    prog.blocks.push_back(std::move(b));
  }
  {
    sdp::Block b;
    b.constant = -margin * In;
    for (int k = 0; k < layout.num_p(); ++k) b.terms.emplace_back(k, layout.basis(k));
    b.terms.emplace_back(g, -In);
    prog.blocks.push_back(std::move(b));
  }
  {
    sdp::Block b;
    b.constant = p_cap * In;
    for (int k = 0; k < layout.num_p(); ++k) b.terms.emplace_back(k, -layout.basis(k));
    prog.blocks.push_back(std::move(b));
  }
  prog.blocks.push_back(detail::scalar_block(-margin, {{g, 1.0}}));

  Eigen::VectorXd guess = layout.pack(In, 0.5, 0.0);
  const auto p1 = sdp::find_feasible(prog, guess, solver, 1.0 + p_cap);
  if (p1.status != sdp::Status::Solved) return std::nullopt;
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(layout.num_vars());
  cost(g) = -1.0;
  sdp::Options o = solver;
  o.gap_tol = 1e-13;
  const auto p2 = sdp::minimize(prog, cost, p1.y, o);
  const auto at = [&](const Eigen::VectorXd& y) {
    LMISolution sol;
    sol.P = layout.unpack_p(y);
    sol.chi = chi;
    sol.gamma = y(g);
    sol.margin = -max_eigenvalue(vertex.block(sol.P, sol.chi));
    return sol;
  };
  if (p2.status != sdp::Status::Solved) return at(p1.y);
  // The optimum sits on the boundary; step back toward the Phase I point
  // until the eigenvalue check passes.
  for (double t = 0.0; t < 1.0; t = t == 0.0 ? 1e-8 : 4.0 * t) {
    const LMISolution sol = at((1.0 - t) * p2.y + t * p1.y);
    if (verify(vertex, sol, verify_tol)) return sol;
  }
  return at(p1.y);
}

/// Bisection on r = gamma tau / chi. `r_seed` lets a caller start from a
/// different bracket (used to cross-check the result).
inline UltimateBound ultimate_bound_bisection(const VertexLMI& vertex, double f_bar, const CertifyOptions& opt,
                                              std::optional<double> r_seed = std::nullopt) {
  const double tau = vertex.tau;
  const auto feasible_at = [&](double r) -> std::optional<LMISolution> {
    SolveOptions so = opt.lmi;
    so.objective.reset();
    so.gamma_chi_ratio = r;
    auto res = solve_feasibility({vertex}, so);
    return res.status == SolveStatus::Feasible ? res.solution : std::nullopt;
  };

  UltimateBound ub;
  double r_lo = 0.0;
  std::optional<LMISolution> best;
  if (r_seed && *r_seed > 0.0) {
    double r = *r_seed;
    while (r > 1e-14) {
      if (auto s = feasible_at(r)) {
        r_lo = r;
        best = s;
        break;
      }
      r *= 0.5;
      ++ub.bisection_steps;
    }
  } else {
    SolveOptions so = opt.lmi;
    so.objective.reset();
    so.gamma_chi_ratio.reset();
    auto first = solve_feasibility({vertex}, so);
    if (first.status == SolveStatus::Feasible) {
      r_lo = first.solution->gamma * tau / first.solution->chi;
      best = first.solution;
    }
  }
  if (!best) {
    throw Error(ErrorCode::Infeasible, "the ultimate-bound LMI has no solution for this Theta");
  }

  double r_hi = 2.0 * r_lo;
  while (r_hi < 1e15) {
    if (auto s = feasible_at(r_hi)) {
      r_lo = r_hi;
      best = s;
      r_hi *= 2.0;
      ++ub.bisection_steps;
    } else {
      break;
    }
  }
  while ((r_hi - r_lo) > opt.bisection_gap * r_lo) {
    const double mid = 0.5 * (r_lo + r_hi);
    ++ub.bisection_steps;
    if (auto s = feasible_at(mid)) {
      r_lo = mid;
      best = s;
    } else {
      r_hi = mid;
    }
  }
  for (double frac : {0.25, 0.5, 0.9}) {
    if (!feasible_at(frac * r_lo)) ub.monotone = false;
  }
  ub.solution = detail::rescale_to_chi(*best, tau);
  ub.gamma_star = r_lo;
  ub.solution.gamma = r_lo;
  ub.delta = detail::delta_from_gamma(f_bar, r_lo, opt.strict_energy);
  return ub;
}

inline UltimateBound ultimate_bound(const Plant& plant, const Gain& gain, const Eigen::VectorXd& theta, double tau,
                                    const CertifyOptions& opt) {
  const VertexLMI vertex = assemble(plant, gain, theta, tau);
  if (!opt.literal_chi_block) return ultimate_bound_bisection(vertex, plant.f_bar, opt);
  auto sol = maximize_gamma_fixed_chi(vertex, tau, 1e6, opt.lmi.margin * 1e-3, opt.lmi.solver, opt.lmi.verify_tol);
  if (!sol || !verify(vertex, *sol, opt.lmi.verify_tol)) {
    throw Error(ErrorCode::Infeasible, "the ultimate-bound LMI (chi = tau) has no verified solution");
  }
  UltimateBound ub;
  ub.gamma_star = sol->gamma;
  ub.solution = *sol;
  ub.delta = detail::delta_from_gamma(plant.f_bar, sol->gamma, opt.strict_energy);
  return ub;
}

inline UltimateBound ultimate_bound(const Plant& plant, const Gain& gain, double theta, double tau,
                                    const CertifyOptions& opt = {}) {
  return ultimate_bound(plant, gain, Eigen::VectorXd::Constant(plant.n(), theta), tau, opt);
}

/// x0 radius from the aggregates: sqrt((tau gamma x^2 - 2 chi f) / (n^2 tau ||P||)).
inline double initial_radius(const Aggregates& a, double x_hi, double f_term, Eigen::Index n) {
  const double radicand = a.tau_min * a.gamma_min * x_hi * x_hi - 2.0 * a.chi_max * f_term;
  if (!(radicand > 0.0)) return 0.0;
  const double nn = static_cast<double>(n);
  return std::sqrt(radicand / (nn * nn * a.tau_min * a.p_norm_max));
}

namespace detail {

inline Region certified_region(const std::vector<SlopeProfile>& profiles, const Gain& gain, VertexMode mode,
                               double rho_lo, double rho_hi, const SectorGridOptions& grid) {
  Region out{0.0, kInf};
  for (const auto& p : profiles) {
    Region r;
    if (rho_lo == rho_hi) {
      // Degenerate box: only exactly linear functions are covered.
      const auto c = p.func.constant_slope();
      if (!c || *c != rho_lo) throw Error(ErrorCode::EmptyRegion, "degenerate sector does not contain phi");
      r = Region{0.0, kInf};
      if (mode == VertexMode::Scalar && gain.sum() == 0.0) {
        throw Error(ErrorCode::ZeroGainSum, "sum of gains is zero; scalar-law region is undefined");
      }
    } else if (mode == VertexMode::Scalar) {
      r = sector_region_scalar(p, gain.sum(), rho_lo, rho_hi, grid);
    } else {
      r = sector_region(p, rho_lo, rho_hi, grid);
    }
    out.x_lo = std::max(out.x_lo, r.x_lo);
    out.x_hi = std::min(out.x_hi, r.x_hi);
  }
  if (!(out.x_lo < out.x_hi)) throw Error(ErrorCode::EmptyRegion, "per-component regions do not overlap");
  return out;
}

}  // namespace detail

namespace detail {

struct ChainEvaluation {
  std::vector<IntervalCertificate> intervals;
  Region region;
  double x_hi_used = 0.0;
  bool region_capped = false;
  Aggregates aggregates;
  double x0_radius = 0.0;
};

/// Region, polished per-box solutions, aggregates and x0 radius for a chain.
/// Each box is re-solved to maximize tau gamma x_hi^2 - 2 chi f; a box whose
/// best value is not positive keeps the solution it already carries.
inline ChainEvaluation evaluate_chain(const std::vector<SlopeProfile>& profiles, const Gain& gain, VertexMode mode,
                                      std::vector<IntervalCertificate> chain, double f_term, Eigen::Index n,
                                      const CertifyOptions& opt, const IntervalSolver& solver) {
  ChainEvaluation ev;
  ev.region = certified_region(profiles, gain, mode, chain.front().rho_prev, chain.back().rho_cur, opt.grid);
  ev.x_hi_used = ev.region.x_hi;
  if (!std::isfinite(ev.region.x_hi)) {
    ev.x_hi_used = opt.region_cap;
    ev.region_capped = true;
  }
  for (auto& iv : chain) {
    SolveOptions polish = opt.lmi;
    const double w_gamma = iv.tau * ev.x_hi_used * ev.x_hi_used;
    const double w_chi = 2.0 * f_term + 1e-9 * w_gamma;
    polish.objective = std::make_pair(w_gamma, w_chi);
    polish.solver.gap_tol = std::max(polish.solver.gap_tol, 1e-7);
    auto pr = solver.probe(iv.rho_prev, iv.rho_cur, iv.tau, polish);
    if (pr.status == SolveStatus::Feasible && w_gamma * pr.solution->gamma - w_chi * pr.solution->chi > 0.0) {
      iv.solution = *pr.solution;
    }
  }
  ev.intervals = std::move(chain);
  ev.aggregates = aggregate(ev.intervals);
  ev.x0_radius = initial_radius(ev.aggregates, ev.x_hi_used, f_term, n);
  return ev;
}

/// The chain restricted to slopes >= rho_lo; the first box is cut at rho_lo
/// and keeps its solution (a sub-box of a certified box stays certified).
inline std::vector<IntervalCertificate> truncate_chain(const std::vector<IntervalCertificate>& chain, double rho_lo) {
  std::vector<IntervalCertificate> out;
  for (const auto& iv : chain) {
    if (iv.rho_cur <= rho_lo && iv.rho_prev < iv.rho_cur) continue;
    out.push_back(iv);
    if (out.size() == 1 && rho_lo > iv.rho_prev) out.back().rho_prev = rho_lo;
  }
  return out;
}

}  // namespace detail

/// Full pipeline for one vertex mode: search, choice of rho_lo, region,
/// per-box polish of (P, chi, gamma), aggregates, x0 radius and the ultimate
/// bound at Theta = rho_hi I.
///
/// The chain found by the search starts at the lowest feasible slope, which
/// maximizes the sector but usually leaves the x0 radius at zero. With
/// tune_rho_lo the lower end is moved up through the chain to the candidate
/// that maximizes the x0 radius.
inline Certificate certify(const Plant& plant_in, const ControlLaw& law, const TauSchedule& taus, VertexMode mode,
                           const CertifyOptions& opt = {}) {
  const Plant plant = validate_plant(plant_in);
  const Gain& gain = law.gain();
  check_gain(plant, gain);
  if (mode == VertexMode::Scalar && gain.sum() == 0.0) {
    throw Error(ErrorCode::ZeroGainSum, "sum of gains is zero; scalar-law region is undefined");
  }
  const auto profiles = detail::profiles_of(law);

  SearchResult search = multistep_search(plant, gain, profiles, taus, mode, opt);
  Certificate cert;
  cert.mode = mode;
  cert.n = plant.n();
  cert.f_bar = plant.f_bar;
  cert.strict_energy = opt.strict_energy;
  for (const auto& note : search.notes) cert.warnings.push_back(note);
  if (!search.ceiling_from_origin_slope && search.hit_ceiling) {
    cert.warnings.emplace_back("rho_hi equals the search cap; an unbounded rho_hi is not certified");
  }

  const double f_term = cert.disturbance_term();
  detail::IntervalSolver solver(plant, gain, mode, opt, search.counters);
  detail::ChainEvaluation best =
      detail::evaluate_chain(profiles, gain, mode, search.intervals, f_term, cert.n, opt, solver);
  double best_rho_lo = search.intervals.front().rho_prev;

  if (opt.tune_rho_lo && search.intervals.front().rho_prev < search.intervals.back().rho_cur) {
    const auto score = [](const detail::ChainEvaluation& ev) { return std::min(ev.x0_radius, ev.x_hi_used); };
    for (const auto& iv : search.intervals) {
      for (int j = 0; j < opt.rho_lo_candidates_per_interval; ++j) {
        const double c = iv.rho_prev + (iv.rho_cur - iv.rho_prev) * j / opt.rho_lo_candidates_per_interval;
        if (c <= search.intervals.front().rho_prev) continue;
        try {
          // gamma_min <= p_norm_max, so the x0 radius never exceeds x_hi / n.
          const Region r = detail::certified_region(profiles, gain, mode, c, search.intervals.back().rho_cur, opt.grid);
          const double x_hi = std::isfinite(r.x_hi) ? r.x_hi : opt.region_cap;
          if (x_hi / static_cast<double>(cert.n) <= score(best)) continue;
          auto ev = detail::evaluate_chain(profiles, gain, mode, detail::truncate_chain(search.intervals, c), f_term,
                                           cert.n, opt, solver);
          if (score(ev) > score(best)) {
            best = std::move(ev);
            best_rho_lo = c;
          }
        } catch (const Error& e) {
          if (e.code() != ErrorCode::EmptyRegion) throw;
        }
      }
    }
    if (best_rho_lo > search.intervals.front().rho_prev) {
      cert.warnings.emplace_back("rho_lo moved from " + std::to_string(search.intervals.front().rho_prev) + " to " +
                                 std::to_string(best_rho_lo) + " to maximize the x0 radius");
    }
  }

  cert.intervals = std::move(best.intervals);
  cert.rho_lo = cert.intervals.front().rho_prev;
  cert.rho_hi = cert.intervals.back().rho_cur;
  cert.x_lo = best.region.x_lo;
  cert.x_hi = best.region.x_hi;
  cert.x_hi_used = best.x_hi_used;
  cert.region_capped = best.region_capped;
  cert.aggregates = best.aggregates;
  cert.counters = search.counters;
  cert.search_length = search.total_length();
  cert.search_anchor = search.anchor;
  if (cert.region_capped) {
    cert.warnings.emplace_back("region unbounded; x_hi replaced by region_cap = " + std::to_string(opt.region_cap));
  }
  if (cert.x_lo > 0.0) {
    cert.warnings.emplace_back("region excludes a neighbourhood of the origin: x_lo = " + std::to_string(cert.x_lo));
  }

  const double r0 = best.x0_radius;
  cert.x0_radius_unclamped = r0;
  cert.x0_radius = r0;
  if (r0 == 0.0) {
    cert.degenerate_initial_set = true;
    cert.warnings.emplace_back("DegenerateInitialSet: tau gamma x_hi^2 <= 2 chi f_bar; x0 radius set to 0");
  }
  if (r0 > cert.x_hi_used) {
    cert.x0_radius = cert.x_hi_used;
    cert.x0_clamped = true;
    cert.warnings.emplace_back("x0 radius clamped to x_hi");
  }

  const UltimateBound ub = ultimate_bound(plant, gain, cert.rho_hi, taus.at(0), opt);
  cert.gamma_star = ub.gamma_star;
  cert.delta = ub.delta;
  return cert;
}

inline Certificate certify_componentwise(const Plant& plant, const ControlLaw& law, const TauSchedule& taus,
                                         const CertifyOptions& opt = {}) {
  return certify(plant, law, taus, VertexMode::Componentwise, opt);
}

inline Certificate certify_scalar(const Plant& plant, const ControlLaw& law, const TauSchedule& taus,
                                  const CertifyOptions& opt = {}) {
  return certify(plant, law, taus, VertexMode::Scalar, opt);
}

/// Time after which |x(t)| < eps is guaranteed; +inf when the eps-ball is
/// smaller than the certified invariant set. Clamped at 0 when x0 already
/// lies inside.
inline double settling_time(const Certificate& cert, double x0_norm, double eps, double f_bar) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidParameter, "eps must be > 0");
  const auto& a = cert.aggregates;
  const double f_term = cert.strict_energy ? f_bar * f_bar : f_bar;
  const double denom = a.tau_min * a.gamma_min * eps * eps - a.chi_max * f_term;
  if (!(denom > 0.0)) return kInf;
  const double numer = a.tau_min * x0_norm * x0_norm * a.p_norm_max + a.chi_max * f_term;
  return std::max(0.0, std::log(numer / denom) / a.tau_min);
}

struct Comparison {
  double rho_hi = 0.0;
  UltimateBound linear;
  UltimateBound nonlinear;
  Region region;
  bool nonlinear_not_worse = false;
};

/// delta at Theta = I versus Theta = rho_hi I, with rho_hi taken from `cert`.
inline Comparison compare_report(const Plant& plant, const Gain& gain, const Certificate& cert, double tau,
                                 const CertifyOptions& opt = {}) {
  Comparison c;
  c.rho_hi = cert.rho_hi;
  c.linear = ultimate_bound(plant, gain, 1.0, tau, opt);
  c.nonlinear = cert.rho_hi == 1.0 ? c.linear : ultimate_bound(plant, gain, cert.rho_hi, tau, opt);
  c.region = Region{cert.x_lo, cert.x_hi};
  c.nonlinear_not_worse = c.nonlinear.delta <= c.linear.delta;
  return c;
}

}  // namespace oddcert

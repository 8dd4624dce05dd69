#pragma once

// Odd scalar functions phi and their slope representation phi(s) = rho(s) s.
//
// Every family is evaluated on |s| and the sign is reapplied afterwards, so
// phi(-s) == -phi(s) holds bit-for-bit and rho(-s) == rho(s) likewise.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "oddcert/errors.hpp"

namespace oddcert {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace family {

struct Identity {};
struct ScaledSaturation {
  double mu;
  double sigma;
};
struct ScaledArctan {
  double mu;
  double sigma;
};
/// mu * (1 - exp(-sigma s / 2)) / (1 + exp(-sigma s / 2))
struct ScaledSigmoid {
  double mu;
  double sigma;
};
struct Power {
  double lambda;
};
/// sign(s) |s|^psi(s),  psi(s) = mu (s^2 + mu^-2) / (s^2 + 1)
struct VariablePower {
  double mu;
};
struct PowerSum {
  double lambda;
};
struct AffinePlus;
struct Tabulated;

}  // namespace family

class OddFunction;

namespace family {

struct AffinePlus {
  std::shared_ptr<const OddFunction> base;
  double theta;
};

/// Piecewise-linear table, antisymmetrized on evaluation. Linear
/// extrapolation from the end segments outside the grid.
struct Tabulated {
  std::shared_ptr<const std::vector<std::pair<double, double>>> points;
};

}  // namespace family

class OddFunction {
 public:
  using Family = std::variant<family::Identity, family::ScaledSaturation, family::ScaledArctan,
                              family::ScaledSigmoid, family::Power, family::VariablePower,
                              family::PowerSum, family::AffinePlus, family::Tabulated>;

  OddFunction() : family_(family::Identity{}) {}

  static OddFunction identity() { return OddFunction(family::Identity{}); }

  static OddFunction saturation(double mu, double sigma) {
    check_positive("mu", mu);
    check_positive("sigma", sigma);
    return OddFunction(family::ScaledSaturation{mu, sigma});
  }

  static OddFunction arctan(double mu, double sigma) {
    check_positive("mu", mu);
    check_positive("sigma", sigma);
    return OddFunction(family::ScaledArctan{mu, sigma});
  }

  static OddFunction sigmoid(double mu, double sigma) {
    check_positive("mu", mu);
    check_positive("sigma", sigma);
    return OddFunction(family::ScaledSigmoid{mu, sigma});
  }

  static OddFunction power(double lambda) {
    check_exponent(lambda);
    return OddFunction(family::Power{lambda});
  }

  static OddFunction variable_power(double mu) {
    check_positive("mu", mu);
    const double psi0 = variable_exponent(mu, 0.0);
    if (!(psi0 < 1.0)) {
      throw Error(ErrorCode::InvalidParameter,
                  "variable power needs psi(0) < 1, got psi(0) = " + std::to_string(psi0) + " for mu = " +
                      std::to_string(mu));
    }
    return OddFunction(family::VariablePower{mu});
  }

  static OddFunction power_sum(double lambda) {
    check_exponent(lambda);
    return OddFunction(family::PowerSum{lambda});
  }

  static OddFunction affine_plus(OddFunction base, double theta) {
    if (!(theta >= 0.0) || !std::isfinite(theta)) {
      throw Error(ErrorCode::InvalidParameter, "theta must be finite and >= 0");
    }
    return OddFunction(family::AffinePlus{std::make_shared<const OddFunction>(std::move(base)), theta});
  }

  /// Table of (s, phi(s)) with strictly increasing s and at least two rows.
  static OddFunction tabulated(std::vector<std::pair<double, double>> points) {
    if (points.size() < 2) {
      throw Error(ErrorCode::InvalidParameter, "tabulated function needs at least two points");
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!std::isfinite(points[i].first) || !std::isfinite(points[i].second)) {
        throw Error(ErrorCode::InvalidParameter, "tabulated values must be finite");
      }
      if (i > 0 && !(points[i].first > points[i - 1].first)) {
        throw Error(ErrorCode::InvalidParameter, "tabulated s values must be strictly increasing (row " +
                                                     std::to_string(i + 1) + ")");
      }
    }
    return OddFunction(
        family::Tabulated{std::make_shared<const std::vector<std::pair<double, double>>>(std::move(points))});
  }

  [[nodiscard]] const Family& family() const { return family_; }

  /// phi(s). Odd by construction.
  [[nodiscard]] double operator()(double s) const {
    const double a = std::fabs(s);
    const double v = eval_abs(a);
    return std::signbit(s) ? -v : v;
  }

  /// rho(s) = phi(s)/s for s != 0, the origin limit at s = 0.
  [[nodiscard]] double slope(double s) const {
    const double a = std::fabs(s);
    if (a == 0.0) return slope_at_origin();
    return eval_abs(a) / a;
  }

  /// lim_{s->0} phi(s)/s; +inf for families with unbounded origin slope.
  [[nodiscard]] double slope_at_origin() const {
    return std::visit(
        [](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, family::Identity>) {
            return 1.0;
          } else if constexpr (std::is_same_v<T, family::ScaledSaturation> ||
                               std::is_same_v<T, family::ScaledArctan>) {
            return f.mu * f.sigma;
          } else if constexpr (std::is_same_v<T, family::ScaledSigmoid>) {
            return 0.25 * f.mu * f.sigma;
          } else if constexpr (std::is_same_v<T, family::Power> || std::is_same_v<T, family::VariablePower> ||
                               std::is_same_v<T, family::PowerSum>) {
            return kInf;
          } else if constexpr (std::is_same_v<T, family::AffinePlus>) {
            return f.base->slope_at_origin() + f.theta;
          } else {
            return tabulated_origin_slope(f);
          }
        },
        family_);
  }

  /// Slope when phi is exactly linear (identity, possibly plus theta s).
  [[nodiscard]] std::optional<double> constant_slope() const {
    if (std::holds_alternative<family::Identity>(family_)) return 1.0;
    if (const auto* ap = std::get_if<family::AffinePlus>(&family_)) {
      if (auto base = ap->base->constant_slope()) return *base + ap->theta;
    }
    return std::nullopt;
  }

  [[nodiscard]] std::string name() const {
    return std::visit(
        [](const auto& f) -> std::string {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, family::Identity>) return "identity";
          else if constexpr (std::is_same_v<T, family::ScaledSaturation>) return "saturation";
          else if constexpr (std::is_same_v<T, family::ScaledArctan>) return "arctan";
          else if constexpr (std::is_same_v<T, family::ScaledSigmoid>) return "sigmoid";
          else if constexpr (std::is_same_v<T, family::Power>) return "power";
          else if constexpr (std::is_same_v<T, family::VariablePower>) return "variable_power";
          else if constexpr (std::is_same_v<T, family::PowerSum>) return "power_sum";
          else if constexpr (std::is_same_v<T, family::AffinePlus>) return "affine_plus";
          else return "tabulated";
        },
        family_);
  }

  [[nodiscard]] std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&os](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, family::Identity>) {
            os << "identity";
          } else if constexpr (std::is_same_v<T, family::ScaledSaturation>) {
            os << "saturation(mu=" << f.mu << ", sigma=" << f.sigma << ")";
          } else if constexpr (std::is_same_v<T, family::ScaledArctan>) {
            os << "arctan(mu=" << f.mu << ", sigma=" << f.sigma << ")";
          } else if constexpr (std::is_same_v<T, family::ScaledSigmoid>) {
            os << "sigmoid(mu=" << f.mu << ", sigma=" << f.sigma << ")";
          } else if constexpr (std::is_same_v<T, family::Power>) {
            os << "power(lambda=" << f.lambda << ")";
          } else if constexpr (std::is_same_v<T, family::VariablePower>) {
            os << "variable_power(mu=" << f.mu << ")";
          } else if constexpr (std::is_same_v<T, family::PowerSum>) {
            os << "power_sum(lambda=" << f.lambda << ")";
          } else if constexpr (std::is_same_v<T, family::AffinePlus>) {
            os << f.base->describe() << " + " << f.theta << " s";
          } else {
            os << "tabulated(" << f.points->size() << " points)";
          }
        },
        family_);
    return os.str();
  }

  static double variable_exponent(double mu, double s) {
    const double s2 = s * s;
    return mu * (s2 + 1.0 / (mu * mu)) / (s2 + 1.0);
  }

 private:
  explicit OddFunction(Family f) : family_(std::move(f)) {}

  static void check_positive(const char* what, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::InvalidParameter, std::string(what) + " must be finite and > 0");
    }
  }

  static void check_exponent(double lambda) {
    if (!(lambda > 0.0 && lambda < 1.0)) {
      throw Error(ErrorCode::InvalidParameter, "lambda must lie in (0, 1)");
    }
  }

  static double table_lookup(const std::vector<std::pair<double, double>>& pts, double s) {
    auto it = std::upper_bound(pts.begin(), pts.end(), s,
                               [](double v, const std::pair<double, double>& p) { return v < p.first; });
    std::size_t hi;
    if (it == pts.begin()) {
      hi = 1;
    } else if (it == pts.end()) {
      hi = pts.size() - 1;
    } else {
      hi = static_cast<std::size_t>(it - pts.begin());
    }
    const auto& [s0, v0] = pts[hi - 1];
    const auto& [s1, v1] = pts[hi];
    const double w = (s - s0) / (s1 - s0);
    return v0 + w * (v1 - v0);
  }

  static double tabulated_abs(const family::Tabulated& t, double a) {
    return 0.5 * (table_lookup(*t.points, a) - table_lookup(*t.points, -a));
  }

  static double tabulated_origin_slope(const family::Tabulated& t) {
    // Finite difference of the antisymmetrized table between the two grid
    // points nearest to the origin.
    std::vector<double> grid;
    grid.reserve(t.points->size());
    for (const auto& p : *t.points) grid.push_back(p.first);
    std::sort(grid.begin(), grid.end(), [](double x, double y) { return std::fabs(x) < std::fabs(y); });
    const double s0 = grid[0];
    const double s1 = grid[1];
    auto phi = [&t](double s) {
      const double v = tabulated_abs(t, std::fabs(s));
      return std::signbit(s) ? -v : v;
    };
    return (phi(s1) - phi(s0)) / (s1 - s0);
  }

  [[nodiscard]] double eval_abs(double a) const {
    return std::visit(
        [a](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, family::Identity>) {
            return a;
          } else if constexpr (std::is_same_v<T, family::ScaledSaturation>) {
            return f.mu * std::min(f.sigma * a, 1.0);
          } else if constexpr (std::is_same_v<T, family::ScaledArctan>) {
            return f.mu * std::atan(f.sigma * a);
          } else if constexpr (std::is_same_v<T, family::ScaledSigmoid>) {
            // (1 - e^{-x})/(1 + e^{-x}) == tanh(x/2) with x = sigma a / 2
            return f.mu * std::tanh(0.25 * f.sigma * a);
          } else if constexpr (std::is_same_v<T, family::Power>) {
            return std::pow(a, f.lambda);
          } else if constexpr (std::is_same_v<T, family::VariablePower>) {
            return std::pow(a, variable_exponent(f.mu, a));
          } else if constexpr (std::is_same_v<T, family::PowerSum>) {
            return std::pow(a, f.lambda) + std::pow(a, 1.0 / f.lambda);
          } else if constexpr (std::is_same_v<T, family::AffinePlus>) {
            return (*f.base)(a) + f.theta * a;
          } else {
            return tabulated_abs(f, a);
          }
        },
        family_);
  }

  Family family_;
};

/// Function together with its origin slope.
struct SlopeProfile {
  OddFunction func;
  double rho_at_origin;

  explicit SlopeProfile(OddFunction f) : func(std::move(f)), rho_at_origin(func.slope_at_origin()) {}

  [[nodiscard]] double slope(double s) const { return s == 0.0 ? rho_at_origin : func.slope(s); }
};

inline double eval_phi(const OddFunction& func, double s) { return func(s); }
inline double slope(const SlopeProfile& profile, double s) { return profile.slope(s); }
inline double slope_at_origin(const OddFunction& func) { return func.slope_at_origin(); }

/// [x_lo, x_hi] in |s|; x_hi may be +inf.
struct Region {
  double x_lo = 0.0;
  double x_hi = kInf;
};

struct SectorGridOptions {
  double log10_min = -9.0;
  double log10_max = 9.0;
  int points_per_decade = 4096;
  double bisection_rel_tol = 1e-10;
  /// Relative slack on the sector inequalities (absorbs rounding in phi(s)/s).
  double membership_rel_tol = 1e-12;
};

namespace detail {

inline bool in_sector(double rho, double lo, double hi, double rel_tol) {
  if (std::isnan(rho)) return false;
  const double lo_slack = rel_tol * std::max(std::fabs(lo), std::fabs(rho));
  if (rho < lo - lo_slack) return false;
  if (std::isinf(hi)) return true;
  const double hi_slack = rel_tol * std::max(std::fabs(hi), std::fabs(rho));
  return rho <= hi + hi_slack;
}

/// Bisect between an invalid and a valid point; returns the valid end.
template <typename Pred>
double refine_boundary(Pred&& valid, double invalid_pt, double valid_pt, double rel_tol) {
  for (int it = 0; it < 400; ++it) {
    const double width = std::fabs(valid_pt - invalid_pt);
    if (width <= rel_tol * std::max(std::fabs(valid_pt), std::fabs(invalid_pt))) break;
    const double mid = std::sqrt(invalid_pt) * std::sqrt(valid_pt);  // geometric midpoint on the log grid
    const double m = (mid > std::min(invalid_pt, valid_pt) && mid < std::max(invalid_pt, valid_pt))
                         ? mid
                         : 0.5 * (invalid_pt + valid_pt);
    if (valid(m)) {
      valid_pt = m;
    } else {
      invalid_pt = m;
    }
  }
  return valid_pt;
}

}  // namespace detail

/// Largest interval of |s| on which rho_lo <= phi(s)/s <= rho_hi.
///
/// Dense log-spaced scan of rho, then bisection at the two ends of the
/// longest valid run. Ends touching the grid limits are followed outward by
/// decades to decide between x_lo = 0 / x_hi = +inf and a finite crossing.
inline Region sector_region(const SlopeProfile& profile, double rho_lo, double rho_hi,
                            const SectorGridOptions& opt = {}) {
  if (!(rho_lo >= 0.0) || !(rho_hi > rho_lo)) {
    throw Error(ErrorCode::InvalidParameter, "sector bounds must satisfy 0 <= rho_lo < rho_hi");
  }
  const auto valid = [&](double a) {
    return detail::in_sector(profile.func.slope(a), rho_lo, rho_hi, opt.membership_rel_tol);
  };

  const int decades = static_cast<int>(std::lround(opt.log10_max - opt.log10_min));
  const int count = decades * opt.points_per_decade + 1;
  std::vector<double> grid(static_cast<std::size_t>(count));
  std::vector<char> ok(grid.size());
  for (int k = 0; k < count; ++k) {
    const double e = opt.log10_min + static_cast<double>(k) / opt.points_per_decade;
    grid[static_cast<std::size_t>(k)] = std::pow(10.0, e);
    ok[static_cast<std::size_t>(k)] = valid(grid[static_cast<std::size_t>(k)]) ? 1 : 0;
  }

  int best_begin = -1;
  int best_len = 0;
  for (int k = 0; k < count;) {
    if (!ok[static_cast<std::size_t>(k)]) {
      ++k;
      continue;
    }
    int j = k;
    while (j < count && ok[static_cast<std::size_t>(j)]) ++j;
    if (j - k > best_len) {
      best_len = j - k;
      best_begin = k;
    }
    k = j;
  }
  if (best_begin < 0) {
    throw Error(ErrorCode::EmptyRegion, "no s satisfies rho_lo <= phi(s)/s <= rho_hi");
  }
  const int best_end = best_begin + best_len - 1;

  Region region;
  // Lower end.
  if (best_begin > 0) {
    region.x_lo = detail::refine_boundary(valid, grid[static_cast<std::size_t>(best_begin - 1)],
                                          grid[static_cast<std::size_t>(best_begin)], opt.bisection_rel_tol);
  } else if (detail::in_sector(profile.rho_at_origin, rho_lo, rho_hi, opt.membership_rel_tol)) {
    region.x_lo = 0.0;
  } else {
    double good = grid.front();
    double probe = good;
    bool found = false;
    while (probe > 1e-300) {
      probe *= 0.1;
      if (!valid(probe)) {
        found = true;
        break;
      }
      good = probe;
    }
    region.x_lo = found ? detail::refine_boundary(valid, probe, good, opt.bisection_rel_tol) : good;
  }
  // Upper end.
  if (best_end < count - 1) {
    region.x_hi = detail::refine_boundary(valid, grid[static_cast<std::size_t>(best_end + 1)],
                                          grid[static_cast<std::size_t>(best_end)], opt.bisection_rel_tol);
  } else {
    double good = grid.back();
    double probe = good;
    bool found = false;
    while (probe < 1e300) {
      probe *= 10.0;
      if (!valid(probe)) {
        found = true;
        break;
      }
      good = probe;
    }
    region.x_hi = found ? detail::refine_boundary(valid, probe, good, opt.bisection_rel_tol) : kInf;
  }
  return region;
}

/// Region for the scalar-wrapped law: the sector is checked on phi(kappa s)
/// with kappa = sum(k_i); bounds are returned in s-units.
inline Region sector_region_scalar(const SlopeProfile& profile, double gain_sum, double rho_lo, double rho_hi,
                                   const SectorGridOptions& opt = {}) {
  if (gain_sum == 0.0) {
    throw Error(ErrorCode::ZeroGainSum, "sum of gains is zero; scalar-law region is undefined");
  }
  Region r = sector_region(profile, rho_lo, rho_hi, opt);
  const double kappa = std::fabs(gain_sum);
  r.x_lo /= kappa;
  if (std::isfinite(r.x_hi)) r.x_hi /= kappa;
  return r;
}

/// Range of rho over s != 0: origin limit, log grid and far-field probes.
inline std::pair<double, double> slope_range(const SlopeProfile& profile, const SectorGridOptions& opt = {}) {
  double lo = profile.rho_at_origin;
  double hi = profile.rho_at_origin;
  const auto visit = [&](double a) {
    const double r = profile.func.slope(a);
    if (std::isnan(r)) return;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  };
  const int per = std::max(16, opt.points_per_decade / 64);
  for (double e = opt.log10_min; e <= opt.log10_max + 1e-12; e += 1.0 / per) visit(std::pow(10.0, e));
  for (double a = 1e12; a < 1e300; a *= 1e12) visit(a);
  return {lo, hi};
}

}  // namespace oddcert

#pragma once

// Fixed-step RK4 simulation of x' = A x + B u(x) + D f(t) and helpers that
// read certificate quantities back off a trajectory.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "oddcert/errors.hpp"
#include "oddcert/model.hpp"

namespace oddcert {

/// splitmix64 step: state += 0x9e3779b97f4a7c15, then the usual xor-shift-multiply mix.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform in [-1, 1] from the top 53 bits of a splitmix64 draw.
inline double splitmix_uniform(std::uint64_t& state) {
  const double unit = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
  return 2.0 * unit - 1.0;
}

/// Scales v down until |v| <= bound holds in floating point.
inline Eigen::VectorXd clamp_norm(Eigen::VectorXd v, double bound) {
  for (int i = 0; i < 8 && v.norm() > bound; ++i) {
    v *= bound / v.norm();
    if (v.norm() > bound) v *= std::nextafter(1.0, 0.0);
  }
  if (v.norm() > bound) v.setZero();
  return v;
}

enum class DisturbanceKind { Zero, Constant, Sinusoid, BoundedNoise };

inline std::string to_string(DisturbanceKind k) {
  switch (k) {
    case DisturbanceKind::Zero: return "zero";
    case DisturbanceKind::Constant: return "constant";
    case DisturbanceKind::Sinusoid: return "sinusoid";
    case DisturbanceKind::BoundedNoise: return "noise";
  }
  return "?";
}

/// Disturbance signal f(t) in R^l.
///
/// Constant(c) is the vector c (a scalar c means c times the first unit
/// vector). Sinusoid is amplitude sin(frequency t + phase) along a unit
/// direction (first unit vector by default). BoundedNoise(seed, amplitude,
/// cutoff) is uniform noise on knots spaced 0.5/cutoff apart, passed through
/// a first-order low-pass filter, scaled by the filter's stationary standard
/// deviation, radially clipped to the unit ball, multiplied by amplitude and
/// linearly interpolated between knots. Knot j draws its channel values from
/// a splitmix64 stream seeded with seed ^ (j * 0xd1b54a32d192ed03), so the
/// signal is a pure function of (seed, t).
class Disturbance {
 public:
  static Disturbance zero() { return Disturbance(DisturbanceKind::Zero); }

  static Disturbance constant(Eigen::VectorXd c) {
    if (!c.allFinite()) throw Error(ErrorCode::InvalidParameter, "constant disturbance must be finite");
    Disturbance d(DisturbanceKind::Constant);
    d.vector_ = std::move(c);
    return d;
  }
  static Disturbance constant(double c) { return constant(Eigen::VectorXd::Constant(1, c)); }

  static Disturbance sinusoid(double amplitude, double frequency, double phase = 0.0,
                              Eigen::VectorXd direction = Eigen::VectorXd()) {
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude) || !std::isfinite(frequency) || !std::isfinite(phase)) {
      throw Error(ErrorCode::InvalidParameter, "sinusoid parameters must be finite, amplitude >= 0");
    }
    Disturbance d(DisturbanceKind::Sinusoid);
    d.amplitude_ = amplitude;
    d.frequency_ = frequency;
    d.phase_ = phase;
    d.vector_ = unit_direction(std::move(direction));
    return d;
  }

  static Disturbance bounded_noise(std::uint64_t seed, double amplitude, double cutoff) {
    if (!(amplitude >= 0.0) || !std::isfinite(amplitude) || !(cutoff > 0.0) || !std::isfinite(cutoff)) {
      throw Error(ErrorCode::InvalidParameter, "noise needs amplitude >= 0 and cutoff > 0");
    }
    Disturbance d(DisturbanceKind::BoundedNoise);
    d.seed_ = seed;
    d.amplitude_ = amplitude;
    d.frequency_ = cutoff;
    return d;
  }

  [[nodiscard]] DisturbanceKind kind() const { return kind_; }
  [[nodiscard]] double amplitude() const { return amplitude_; }
  [[nodiscard]] double frequency() const { return frequency_; }
  [[nodiscard]] double phase() const { return phase_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] const Eigen::VectorXd& vector() const { return vector_; }

  /// sup_t |f(t)|.
  [[nodiscard]] double bound() const {
    switch (kind_) {
      case DisturbanceKind::Zero: return 0.0;
      case DisturbanceKind::Constant: return vector_.norm();
      case DisturbanceKind::Sinusoid:
      case DisturbanceKind::BoundedNoise: return amplitude_;
    }
    return 0.0;
  }

  [[nodiscard]] std::string describe() const {
    switch (kind_) {
      case DisturbanceKind::Zero: return "zero";
      case DisturbanceKind::Constant: return "constant(|c|=" + std::to_string(vector_.norm()) + ")";
      case DisturbanceKind::Sinusoid:
        return "sinusoid(a=" + std::to_string(amplitude_) + ", w=" + std::to_string(frequency_) + ")";
      case DisturbanceKind::BoundedNoise:
        return "noise(seed=" + std::to_string(seed_) + ", a=" + std::to_string(amplitude_) + ")";
    }
    return "?";
  }

  /// f(t) as an l-vector. Never exceeds bound() in norm.
  [[nodiscard]] Eigen::VectorXd at(double t, Eigen::Index l) const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(l);
    switch (kind_) {
      case DisturbanceKind::Zero:
        return f;
      case DisturbanceKind::Constant:
        f.head(std::min(l, vector_.size())) = vector_.head(std::min(l, vector_.size()));
        return f;
      case DisturbanceKind::Sinusoid: {
        const Eigen::VectorXd dir = fit(vector_, l);
        return clamp_norm(amplitude_ * std::sin(frequency_ * t + phase_) * dir, amplitude_);
      }
      case DisturbanceKind::BoundedNoise: {
        const double spacing = kNoiseKnotSpacing / frequency_;
        const double pos = std::max(t, 0.0) / spacing;
        const double j = std::floor(pos);
        const double w = pos - j;
        const auto k = static_cast<std::int64_t>(j);
        const Eigen::VectorXd a = noise_knot(k, l);
        const Eigen::VectorXd b = noise_knot(k + 1, l);
        return clamp_norm(amplitude_ * ((1.0 - w) * a + w * b), amplitude_);
      }
    }
    return f;
  }

  static constexpr double kNoiseKnotSpacing = 0.5;
  static constexpr int kNoiseFilterTaps = 64;

 private:
  explicit Disturbance(DisturbanceKind k) : kind_(k) {}

  static Eigen::VectorXd unit_direction(Eigen::VectorXd dir) {
    if (dir.size() == 0) return Eigen::VectorXd::Unit(1, 0);
    const double n = dir.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::InvalidParameter, "direction must be non-zero");
    return dir / n;
  }

  static Eigen::VectorXd fit(const Eigen::VectorXd& v, Eigen::Index l) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(l);
    const Eigen::Index m = std::min(l, v.size());
    out.head(m) = v.head(m);
    return out;
  }

  [[nodiscard]] Eigen::VectorXd raw_knot(std::int64_t j, Eigen::Index l) const {
    std::uint64_t state = seed_ ^ (static_cast<std::uint64_t>(j) * 0xd1b54a32d192ed03ULL);
    Eigen::VectorXd u(l);
    for (Eigen::Index i = 0; i < l; ++i) u(i) = splitmix_uniform(state);
    return u;
  }

  /// Filtered, normalized and clipped knot value; norm <= 1.
  [[nodiscard]] Eigen::VectorXd noise_knot(std::int64_t j, Eigen::Index l) const {
    const double a = std::exp(-kNoiseKnotSpacing);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(l);
    double weight = 1.0 - a;
    double sum_sq = 0.0;
    for (int m = 0; m < kNoiseFilterTaps; ++m) {
      y += weight * raw_knot(j - m, l);
      sum_sq += weight * weight;
      weight *= a;
    }
    // Uniform[-1,1] has variance 1/3.
    const double sd = std::sqrt(sum_sq / 3.0);
    y /= 2.0 * sd * std::sqrt(static_cast<double>(l));
    const double n = y.norm();
    if (n > 1.0) y /= n;
    return clamp_norm(y, 1.0);
  }

  DisturbanceKind kind_;
  Eigen::VectorXd vector_;
  double amplitude_ = 0.0;
  double frequency_ = 0.0;
  double phase_ = 0.0;
  std::uint64_t seed_ = 0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<double> controls;
  std::vector<Eigen::VectorXd> disturbances;
  double dt = 0.0;
  /// |x| exceeded the divergence cutoff; the trajectory ends at that sample.
  bool diverged = false;

  [[nodiscard]] std::size_t size() const { return times.size(); }
  [[nodiscard]] const Eigen::VectorXd& final_state() const { return states.back(); }
};

inline constexpr double kDefaultDt = 1e-3;
inline constexpr double kDivergenceCutoff = 1e12;

/// Integrates the closed loop with classical RK4 at fixed step dt over
/// t_k = k dt, k = 0..round(t_end / dt). Sample k stores x(t_k), u(x(t_k)) and
/// f(t_k).
inline Trajectory simulate(const Plant& plant, const ControlLaw& law, const Disturbance& dist,
                           const Eigen::VectorXd& x0, double dt, double t_end) {
  const Eigen::Index n = plant.n();
  const Eigen::Index l = plant.l();
  check_gain(plant, law.gain());
  if (x0.size() != n) throw Error(ErrorCode::DimensionMismatch, "x0 must have length n");
  if (!(dt > 0.0) || !std::isfinite(dt) || !(t_end >= dt) || !std::isfinite(t_end)) {
    throw Error(ErrorCode::InvalidParameter, "need dt > 0 and t_end >= dt");
  }
  if (dist.bound() > plant.f_bar) {
    throw Error(ErrorCode::InvalidParameter, "disturbance bound " + std::to_string(dist.bound()) +
                                                 " exceeds f_bar " + std::to_string(plant.f_bar));
  }
  if (dist.kind() == DisturbanceKind::Constant && dist.vector().size() > l) {
    throw Error(ErrorCode::DimensionMismatch, "constant disturbance longer than l");
  }

  const Eigen::VectorXd b = plant.B.col(0);
  const auto rhs = [&](double t, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return plant.A * x + b * law.control(x) + plant.D * dist.at(t, l);
  };

  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  Trajectory traj;
  traj.dt = dt;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.controls.reserve(steps + 1);
  traj.disturbances.reserve(steps + 1);

  Eigen::VectorXd x = x0;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.controls.push_back(law.control(x));
    traj.disturbances.push_back(dist.at(t, l));
    if (!x.allFinite() || x.norm() > kDivergenceCutoff) {
      traj.diverged = true;
      break;
    }
    if (k == steps) break;
    const Eigen::VectorXd k1 = rhs(t, x);
    const Eigen::VectorXd k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = rhs(t + dt, x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return traj;
}

/// max |x(t)| over the final tail_fraction of the time window.
inline double empirical_ultimate_bound(const Trajectory& traj, double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidParameter, "tail_fraction must lie in (0, 1]");
  }
  if (traj.size() == 0) return 0.0;
  const double t0 = traj.times.front();
  const double t1 = traj.times.back();
  const double start = t1 - tail_fraction * (t1 - t0);
  double m = 0.0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (traj.times[k] >= start) m = std::max(m, traj.states[k].norm());
  }
  return m;
}

/// Earliest sample time after which |x| < eps at every later sample.
inline std::optional<double> time_to_ball(const Trajectory& traj, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidParameter, "eps must be positive");
  if (traj.size() == 0 || traj.diverged) return std::nullopt;
  std::optional<double> t_star;
  for (std::size_t k = traj.size(); k-- > 0;) {
    if (!(traj.states[k].norm() < eps)) break;
    t_star = traj.times[k];
  }
  return t_star;
}

/// V(t_k) = x(t_k)' P x(t_k).
inline std::vector<double> lyapunov_trace(const Trajectory& traj, const Eigen::MatrixXd& P) {
  std::vector<double> v;
  v.reserve(traj.size());
  for (const auto& x : traj.states) {
    if (x.size() != P.rows()) throw Error(ErrorCode::DimensionMismatch, "P does not match the state dimension");
    v.push_back(x.dot(P * x));
  }
  return v;
}

/// CSV with header t,x1..xn,u,f1..fl.
inline void write_csv(std::ostream& os, const Trajectory& traj) {
  const Eigen::Index n = traj.size() ? traj.states.front().size() : 0;
  const Eigen::Index l = traj.size() ? traj.disturbances.front().size() : 0;
  os << "t";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",x" << i;
  os << ",u";
  for (Eigen::Index i = 1; i <= l; ++i) os << ",f" << i;
  os << '\n';
  const auto old = os.precision(17);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    os << traj.times[k];
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << traj.states[k](i);
    os << ',' << traj.controls[k];
    for (Eigen::Index i = 0; i < l; ++i) os << ',' << traj.disturbances[k](i);
    os << '\n';
  }
  os.precision(old);
}

}  // namespace oddcert

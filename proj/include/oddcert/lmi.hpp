#pragma once

// Vertex LMIs for the closed loop x' = M x + D f with M = A + B K Psi:
//
//   [ M'P + P M + tau P    P D   ]
//   [ D'P                 -chi I ]  < 0,     P > gamma I,
//
// posed on the corners of a slope box and solved for one common (P, chi, gamma).
// Every solution handed out has been re-checked by eigenvalue decomposition,
// independently of the solver that produced it.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oddcert/errors.hpp"
#include "oddcert/model.hpp"
#include "oddcert/sdp.hpp"

namespace oddcert {

enum class VertexMode { Componentwise, Scalar };

inline std::string to_string(VertexMode m) { return m == VertexMode::Componentwise ? "componentwise" : "scalar"; }

inline constexpr std::uint64_t kDefaultVertexCap = std::uint64_t{1} << 16;

/// Corners of the slope box [rho_prev, rho_cur]: all 2^n diagonal assignments
/// (componentwise) or the two scalar multiples of the identity. A degenerate
/// box rho_prev == rho_cur yields its single point.
inline std::vector<Eigen::VectorXd> vertex_set(double rho_prev, double rho_cur, Eigen::Index n, VertexMode mode,
                                               std::uint64_t cap = kDefaultVertexCap) {
  if (!(rho_prev <= rho_cur)) {
    throw Error(ErrorCode::InvalidParameter, "vertex_set needs rho_prev <= rho_cur");
  }
  if (n <= 0) throw Error(ErrorCode::DimensionMismatch, "n must be positive");
  if (rho_prev == rho_cur) return {Eigen::VectorXd::Constant(n, rho_cur)};
  if (mode == VertexMode::Scalar) {
    return {Eigen::VectorXd::Constant(n, rho_prev), Eigen::VectorXd::Constant(n, rho_cur)};
  }
  if (n >= 63 || (std::uint64_t{1} << n) > cap) {
    throw Error(ErrorCode::VertexBudgetExceeded,
                "2^" + std::to_string(n) + " vertices exceed the cap of " + std::to_string(cap));
  }
  const std::uint64_t count = std::uint64_t{1} << n;
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    Eigen::VectorXd psi(n);
    // First coordinate is the most significant bit: diag(lo,lo), diag(lo,hi), diag(hi,lo), ...
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool high = (mask >> (n - 1 - i)) & 1U;
      psi(i) = high ? rho_cur : rho_prev;
    }
    out.push_back(std::move(psi));
  }
  return out;
}

struct VertexLMI {
  Eigen::MatrixXd closed_loop;  // A + B K Psi
  Eigen::MatrixXd disturbance;  // D
  double tau = 0.0;

  [[nodiscard]] Eigen::Index n() const { return closed_loop.rows(); }
  [[nodiscard]] Eigen::Index l() const { return disturbance.cols(); }

  /// The block matrix at (P, chi).
  [[nodiscard]] Eigen::MatrixXd block(const Eigen::MatrixXd& P, double chi) const {
    const Eigen::Index nn = n();
    const Eigen::Index ll = l();
    Eigen::MatrixXd F(nn + ll, nn + ll);
    F.topLeftCorner(nn, nn) = closed_loop.transpose() * P + P * closed_loop + tau * P;
    F.topRightCorner(nn, ll) = P * disturbance;
    F.bottomLeftCorner(ll, nn) = (P * disturbance).transpose();
    F.bottomRightCorner(ll, ll) = -chi * Eigen::MatrixXd::Identity(ll, ll);
    return F;
  }
};

inline VertexLMI assemble(const Plant& plant, const Gain& gain, const Eigen::VectorXd& psi, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::InvalidParameter, "tau must be > 0");
  return VertexLMI{closed_loop_matrix(plant, gain, psi), plant.D, tau};
}

struct LMISolution {
  Eigen::MatrixXd P;
  double chi = 0.0;
  double gamma = 0.0;
  /// -max over vertices of lambda_max(block); positive when strictly feasible.
  double margin = 0.0;
};

inline constexpr double kDefaultVerifyTol = 1e-7;

inline double spectral_norm(const Eigen::MatrixXd& S) {
  if (S.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double max_eigenvalue(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

inline double min_eigenvalue(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

/// Eigenvalue check of a candidate, with tolerances relative to ||P||, so the
/// test is invariant under (P, chi, gamma) -> c (P, chi, gamma).
inline bool verify(const VertexLMI& vertex, const LMISolution& sol, double tol = kDefaultVerifyTol) {
  const Eigen::Index n = vertex.n();
  if (sol.P.rows() != n || sol.P.cols() != n || !sol.P.allFinite()) return false;
  if (!(sol.chi > 0.0) || !(sol.gamma > 0.0) || !std::isfinite(sol.chi) || !std::isfinite(sol.gamma)) return false;
  const double p_norm = spectral_norm(sol.P);
  if (!(p_norm > 0.0)) return false;
  if ((sol.P - sol.P.transpose()).norm() > tol * p_norm) return false;
  const Eigen::MatrixXd Ps = 0.5 * (sol.P + sol.P.transpose());
  if (min_eigenvalue(Ps) < tol * p_norm) return false;
  if (min_eigenvalue(Ps - sol.gamma * Eigen::MatrixXd::Identity(n, n)) < -tol * p_norm) return false;
  return max_eigenvalue(vertex.block(Ps, sol.chi)) <= -tol * p_norm;
}

enum class SolveStatus { Feasible, Infeasible, NumericalFailure };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::NumericalFailure: return "numerical_failure";
  }
  return "?";
}

struct SolveOptions {
  /// Margin imposed on every strict inequality, relative to the P <= I scale.
  double margin = 1e-6;
  double chi_cap = 1e6;
  double verify_tol = kDefaultVerifyTol;
  /// When set, maximize weights.first * gamma - weights.second * chi after
  /// feasibility is established; otherwise return the first certified point.
  std::optional<std::pair<double, double>> objective;
  /// When set, gamma is tied to chi: gamma = ratio * chi / tau (used by the
  /// ultimate-bound search); gamma is then not a free unknown.
  std::optional<double> gamma_chi_ratio;
  sdp::Options solver;
};

struct SolveResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  std::optional<LMISolution> solution;
  int newton_steps = 0;
};

namespace detail {

/// Maps the unknowns (upper triangle of P, chi, gamma) to program variables.
class UnknownLayout {
 public:
  UnknownLayout(Eigen::Index n, bool free_gamma) : n_(n), free_gamma_(free_gamma) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i; j < n; ++j) pairs_.emplace_back(i, j);
    }
  }

  [[nodiscard]] int num_p() const { return static_cast<int>(pairs_.size()); }
  [[nodiscard]] int chi_index() const { return num_p(); }
  [[nodiscard]] int gamma_index() const { return num_p() + 1; }
  [[nodiscard]] int num_vars() const { return num_p() + (free_gamma_ ? 2 : 1); }

  [[nodiscard]] Eigen::MatrixXd basis(int k) const {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n_, n_);
    const auto [i, j] = pairs_[static_cast<std::size_t>(k)];
    S(i, j) = 1.0;
    S(j, i) = 1.0;
    return S;
  }

  [[nodiscard]] Eigen::MatrixXd unpack_p(const Eigen::VectorXd& y) const {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n_, n_);
    for (int k = 0; k < num_p(); ++k) P += y(k) * basis(k);
    return P;
  }

  [[nodiscard]] Eigen::VectorXd pack(const Eigen::MatrixXd& P, double chi, double gamma) const {
    Eigen::VectorXd y(num_vars());
    for (int k = 0; k < num_p(); ++k) {
      const auto [i, j] = pairs_[static_cast<std::size_t>(k)];
      y(k) = P(i, j);
    }
    y(chi_index()) = chi;
    if (free_gamma_) y(gamma_index()) = gamma;
    return y;
  }

 private:
  Eigen::Index n_;
  bool free_gamma_;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs_;
};

inline sdp::Block scalar_block(double constant, std::vector<std::pair<int, double>> terms) {
  sdp::Block b;
  b.constant = Eigen::MatrixXd::Constant(1, 1, constant);
  for (const auto& [i, c] : terms) b.terms.emplace_back(i, Eigen::MatrixXd::Constant(1, 1, c));
  return b;
}

inline sdp::Program build_program(const std::vector<VertexLMI>& vertices, const UnknownLayout& layout,
                                  const SolveOptions& opt) {
  const Eigen::Index n = vertices.front().n();
  const Eigen::Index l = vertices.front().l();
  const Eigen::Index size = n + l;
  const Eigen::MatrixXd In = Eigen::MatrixXd::Identity(n, n);
  sdp::Program prog;
  prog.num_vars = layout.num_vars();

  // -block(P, chi) - margin I > 0 at each vertex.
  for (const auto& v : vertices) {
    sdp::Block b;
    b.constant = -opt.margin * Eigen::MatrixXd::Identity(size, size);
    for (int k = 0; k < layout.num_p(); ++k) {
      const Eigen::MatrixXd S = layout.basis(k);
      Eigen::MatrixXd G = Eigen::MatrixXd::Zero(size, size);
      G.topLeftCorner(n, n) = -(v.closed_loop.transpose() * S + S * v.closed_loop + v.tau * S);
      G.topRightCorner(n, l) = -S * v.disturbance;
      G.bottomLeftCorner(l, n) = G.topRightCorner(n, l).transpose();
      b.terms.emplace_back(k, std::move(G));
    }
    Eigen::MatrixXd Gchi = Eigen::MatrixXd::Zero(size, size);
    Gchi.bottomRightCorner(l, l) = Eigen::MatrixXd::Identity(l, l);
    b.terms.emplace_back(layout.chi_index(), std::move(Gchi));
    prog.blocks.push_back(std::move(b));
  }

  // P - gamma I - margin I > 0 (gamma either free or ratio * chi / tau).
  {
    sdp::Block b;
    b.constant = -opt.margin * In;
    for (int k = 0; k < layout.num_p(); ++k) b.terms.emplace_back(k, layout.basis(k));
    if (opt.gamma_chi_ratio) {
      b.terms.emplace_back(layout.chi_index(), -(*opt.gamma_chi_ratio / vertices.front().tau) * In);
    } else {
      b.terms.emplace_back(layout.gamma_index(), -In);
    }
    prog.blocks.push_back(std::move(b));
  }

  // Normalization I - P >= 0 removes the homogeneous scale.
  {
    sdp::Block b;
    b.constant = In;
    for (int k = 0; k < layout.num_p(); ++k) b.terms.emplace_back(k, -layout.basis(k));
    prog.blocks.push_back(std::move(b));
  }

  prog.blocks.push_back(scalar_block(-opt.margin, {{layout.chi_index(), 1.0}}));
  prog.blocks.push_back(scalar_block(opt.chi_cap, {{layout.chi_index(), -1.0}}));
  if (!opt.gamma_chi_ratio) prog.blocks.push_back(scalar_block(-opt.margin, {{layout.gamma_index(), 1.0}}));
  return prog;
}

}  // namespace detail

/// One common (P, chi, gamma) for every vertex of a slope box.
inline SolveResult solve_feasibility(const std::vector<VertexLMI>& vertices, const SolveOptions& opt = {}) {
  SolveResult out;
  if (vertices.empty()) throw Error(ErrorCode::InvalidParameter, "solve_feasibility needs at least one vertex");
  const Eigen::Index n = vertices.front().n();
  const Eigen::Index l = vertices.front().l();
  for (const auto& v : vertices) {
    if (v.n() != n || v.l() != l || v.tau != vertices.front().tau || v.disturbance.rows() != n) {
      throw Error(ErrorCode::DimensionMismatch, "vertices must share n, l and tau");
    }
  }

  const bool free_gamma = !opt.gamma_chi_ratio.has_value();
  const detail::UnknownLayout layout(n, free_gamma);
  const sdp::Program prog = detail::build_program(vertices, layout, opt);

  const Eigen::MatrixXd In = Eigen::MatrixXd::Identity(n, n);
  const double chi0 = std::min(1.0, 0.5 * opt.chi_cap);
  const Eigen::VectorXd guess = layout.pack(0.5 * In, chi0, 0.25);
  const sdp::Result phase1 = sdp::find_feasible(prog, guess, opt.solver);
  out.newton_steps = phase1.newton_steps;
  if (phase1.status == sdp::Status::Infeasible) {
    out.status = SolveStatus::Infeasible;
    return out;
  }
  if (phase1.status == sdp::Status::NumericalFailure) {
    out.status = SolveStatus::NumericalFailure;
    return out;
  }

  Eigen::VectorXd y = phase1.y;
  if (opt.objective && free_gamma) {
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(layout.num_vars());
    cost(layout.gamma_index()) = -opt.objective->first;
    cost(layout.chi_index()) = opt.objective->second;
    const sdp::Result phase2 = sdp::minimize(prog, cost, y, opt.solver);
    out.newton_steps += phase2.newton_steps;
    if (phase2.status == sdp::Status::Solved) y = phase2.y;
  }

  const auto certified = [&](const Eigen::VectorXd& point) -> std::optional<LMISolution> {
    LMISolution sol;
    sol.P = layout.unpack_p(point);
    sol.chi = point(layout.chi_index());
    sol.gamma = free_gamma ? point(layout.gamma_index()) : *opt.gamma_chi_ratio * sol.chi / vertices.front().tau;
    double worst = -kInf;
    for (const auto& v : vertices) worst = std::max(worst, max_eigenvalue(v.block(sol.P, sol.chi)));
    sol.margin = -worst;
    for (const auto& v : vertices) {
      if (!verify(v, sol, opt.verify_tol)) return std::nullopt;
    }
    return sol;
  };
  auto sol = certified(y);
  if (!sol && y != phase1.y) sol = certified(phase1.y);
  if (!sol) {
    out.status = SolveStatus::NumericalFailure;
    return out;
  }
  out.status = SolveStatus::Feasible;
  out.solution = std::move(sol);
  return out;
}

}  // namespace oddcert

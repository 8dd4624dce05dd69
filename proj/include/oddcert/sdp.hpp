#pragma once

// Small dense linear-matrix-inequality programs solved by a log-det barrier
// path-following method.
//
// A program is a list of blocks F_k(y) = C_k + sum_i y_i G_ki that must all be
// positive definite. Problems here have a handful of variables and blocks of
// size n + l, so everything is dense and Newton systems are solved directly.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace oddcert::sdp {

struct Block {
  Eigen::MatrixXd constant;
  /// (variable index, coefficient matrix); variables absent from the list do
  /// not enter this block.
  std::vector<std::pair<int, Eigen::MatrixXd>> terms;

  [[nodiscard]] Eigen::Index size() const { return constant.rows(); }

  [[nodiscard]] Eigen::MatrixXd evaluate(const Eigen::VectorXd& y) const {
    Eigen::MatrixXd F = constant;
    for (const auto& [i, G] : terms) F += y(i) * G;
    return F;
  }
};

struct Program {
  int num_vars = 0;
  std::vector<Block> blocks;

  [[nodiscard]] Eigen::Index total_dimension() const {
    Eigen::Index d = 0;
    for (const auto& b : blocks) d += b.size();
    return d;
  }

  /// Smallest eigenvalue over all blocks at y.
  [[nodiscard]] double min_eigenvalue(const Eigen::VectorXd& y) const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : blocks) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.evaluate(y), Eigen::EigenvaluesOnly);
      m = std::min(m, es.eigenvalues()(0));
    }
    return m;
  }
};

enum class Status { Solved, Infeasible, NumericalFailure };

struct Options {
  double gap_tol = 1e-10;
  double t_initial = 1.0;
  double t_growth = 10.0;
  int max_newton = 200;
  int max_outer = 60;
  double newton_tol = 1e-10;
};

struct Result {
  Status status = Status::NumericalFailure;
  Eigen::VectorXd y;
  double objective = 0.0;
  int newton_steps = 0;
};

namespace detail {

/// Cholesky factors of every block, or nullopt when some block is not PD.
inline std::optional<std::vector<Eigen::LLT<Eigen::MatrixXd>>> factor_all(const Program& prog,
                                                                           const Eigen::VectorXd& y) {
  std::vector<Eigen::LLT<Eigen::MatrixXd>> out;
  out.reserve(prog.blocks.size());
  for (const auto& b : prog.blocks) {
    const Eigen::MatrixXd F = b.evaluate(y);
    if (!F.allFinite()) return std::nullopt;
    Eigen::LLT<Eigen::MatrixXd> llt(F);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const auto d = llt.matrixLLT().diagonal();
    if ((d.array() <= 0.0).any() || !d.allFinite()) return std::nullopt;
    out.push_back(std::move(llt));
  }
  return out;
}

inline double barrier_value(const std::vector<Eigen::LLT<Eigen::MatrixXd>>& factors) {
  double v = 0.0;
  for (const auto& llt : factors) v -= 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return v;
}

/// Minimizes t c'y - sum log det F_k(y) from a strictly feasible y. Returns
/// false on numerical breakdown.
template <typename Stop>
bool centering(const Program& prog, const Eigen::VectorXd& cost, double t, Eigen::VectorXd& y,
               const Options& opt, int& steps, Stop&& stop_early) {
  const int m = prog.num_vars;
  auto factors = factor_all(prog, y);
  if (!factors) return false;
  double value = t * cost.dot(y) + barrier_value(*factors);

  for (int it = 0; it < opt.max_newton; ++it) {
    Eigen::VectorXd grad = t * cost;
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t k = 0; k < prog.blocks.size(); ++k) {
      const auto& block = prog.blocks[k];
      const auto& llt = (*factors)[k];
      // W_i = L^{-1} G_i L^{-T}: tr(F^{-1} G_i) = tr(W_i), Hessian entries are <W_i, W_j>.
      std::vector<Eigen::MatrixXd> W;
      W.reserve(block.terms.size());
      for (const auto& [i, G] : block.terms) {
        Eigen::MatrixXd tmp = llt.matrixL().solve(G);
        Eigen::MatrixXd w = llt.matrixL().solve(tmp.transpose());
        W.push_back(std::move(w));
        grad(i) -= W.back().trace();
      }
      for (std::size_t a = 0; a < block.terms.size(); ++a) {
        const int ia = block.terms[a].first;
        for (std::size_t b = a; b < block.terms.size(); ++b) {
          const int ib = block.terms[b].first;
          const double h = W[a].cwiseProduct(W[b]).sum();
          hess(ia, ib) += h;
          if (a != b) hess(ib, ia) += h;
        }
      }
    }
    if (!grad.allFinite() || !hess.allFinite()) return false;

    const double reg = 1e-14 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess + reg * Eigen::MatrixXd::Identity(m, m));
    if (ldlt.info() != Eigen::Success) return false;
    const Eigen::VectorXd step = -ldlt.solve(grad);
    if (!step.allFinite()) return false;
    const double decrement = -grad.dot(step);
    ++steps;
    if (!(decrement >= -1e-12 * std::max(1.0, std::fabs(value)))) return false;
    if (0.5 * decrement <= opt.newton_tol) return true;

    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 80; ++ls) {
      const Eigen::VectorXd trial = y + alpha * step;
      if (auto trial_factors = factor_all(prog, trial)) {
        const double trial_value = t * cost.dot(trial) + barrier_value(*trial_factors);
        if (trial_value <= value - 0.25 * alpha * decrement || alpha < 1e-12) {
          y = trial;
          value = trial_value;
          factors = std::move(trial_factors);
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // No progress possible at working precision; the point is as centered as it gets.
      return true;
    }
    if (stop_early(y)) return true;
  }
  return true;
}

}  // namespace detail

/// Path-following minimization of cost'y over {y : F_k(y) > 0}. y0 must be
/// strictly feasible. stop_early(y) may end the run once y is good enough.
template <typename Stop>
Result minimize(const Program& prog, const Eigen::VectorXd& cost, Eigen::VectorXd y0, const Options& opt,
                Stop&& stop_early) {
  Result res;
  res.y = std::move(y0);
  if (!detail::factor_all(prog, res.y)) {
    res.status = Status::NumericalFailure;
    return res;
  }
  const double dim = static_cast<double>(prog.total_dimension());
  double t = opt.t_initial;
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    if (!detail::centering(prog, cost, t, res.y, opt, res.newton_steps, stop_early)) {
      res.status = Status::NumericalFailure;
      res.objective = cost.dot(res.y);
      return res;
    }
    res.objective = cost.dot(res.y);
    if (stop_early(res.y)) break;
    if (dim / t < opt.gap_tol * std::max(1.0, std::fabs(res.objective))) break;
    t *= opt.t_growth;
  }
  res.status = Status::Solved;
  return res;
}

inline Result minimize(const Program& prog, const Eigen::VectorXd& cost, Eigen::VectorXd y0,
                       const Options& opt = {}) {
  return minimize(prog, cost, std::move(y0), opt, [](const Eigen::VectorXd&) { return false; });
}

/// Phase I: looks for y with every F_k(y) positive definite by minimizing a
/// common slack s in F_k(y) + s I > 0. Infeasible when the optimal slack is
/// not negative. The programs posed here bound every variable, so the slack
/// is bounded below; a floor block s >= -slack_floor guards the rest.
inline Result find_feasible(const Program& prog, const Eigen::VectorXd& y_guess, const Options& opt = {},
                            double slack_floor = 1e3) {
  Result res;
  const int m = prog.num_vars;
  const int s_index = m;
  Program aug;
  aug.num_vars = m + 1;
  aug.blocks.reserve(prog.blocks.size() + 1);
  for (const auto& b : prog.blocks) {
    Block ab = b;
    ab.terms.emplace_back(s_index, Eigen::MatrixXd::Identity(b.size(), b.size()));
    aug.blocks.push_back(std::move(ab));
  }
  Block floor;
  floor.constant = Eigen::MatrixXd::Constant(1, 1, slack_floor);
  floor.terms.emplace_back(s_index, Eigen::MatrixXd::Identity(1, 1));
  aug.blocks.push_back(std::move(floor));

  Eigen::VectorXd z(m + 1);
  z.head(m) = y_guess;
  const double lam = prog.min_eigenvalue(y_guess);
  if (!std::isfinite(lam)) {
    res.status = Status::NumericalFailure;
    res.y = y_guess;
    return res;
  }
  z(s_index) = std::max(0.0, -lam) + 1.0;
  if (lam > 0.0 && detail::factor_all(prog, y_guess)) {
    res.status = Status::Solved;
    res.y = y_guess;
    res.objective = -lam;
    return res;
  }

  Eigen::VectorXd cost = Eigen::VectorXd::Zero(m + 1);
  cost(s_index) = 1.0;
  const auto feasible_now = [&](const Eigen::VectorXd& v) {
    return v(s_index) < 0.0 && detail::factor_all(prog, v.head(m)).has_value();
  };
  Result inner = minimize(aug, cost, z, opt, feasible_now);
  res.newton_steps = inner.newton_steps;
  res.y = inner.y.head(m);
  res.objective = inner.y(s_index);
  if (feasible_now(inner.y)) {
    res.status = Status::Solved;
  } else if (inner.status == Status::NumericalFailure) {
    res.status = Status::NumericalFailure;
  } else {
    res.status = Status::Infeasible;
  }
  return res;
}

}  // namespace oddcert::sdp

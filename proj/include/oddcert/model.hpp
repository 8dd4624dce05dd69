#pragma once

// Plant, gain and control-law definitions.
//
// The plant is  x' = A x + B u + D f,  |f(t)| <= f_bar,  with a single input
// u and a fixed linear gain K.  Three laws are built on top of K:
//   Linear          u = K x
//   Componentwise   u = sum_i k_i * phi_i(x_i)
//   ScalarWrapped   u = phi(K x)

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "oddcert/errors.hpp"
#include "oddcert/sector.hpp"

namespace oddcert {

struct Plant {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;  // n x 1
  Eigen::MatrixXd D;  // n x l
  double f_bar = 0.0;

  [[nodiscard]] Eigen::Index n() const { return A.rows(); }
  [[nodiscard]] Eigen::Index l() const { return D.cols(); }
};

struct Gain {
  Eigen::RowVectorXd k;

  [[nodiscard]] Eigen::Index size() const { return k.size(); }
  [[nodiscard]] double sum() const { return k.sum(); }

  /// K x, accumulated left to right so every law variant rounds identically.
  [[nodiscard]] double apply(const Eigen::VectorXd& x) const {
    double u = 0.0;
    for (Eigen::Index i = 0; i < k.size(); ++i) u += k(i) * x(i);
    return u;
  }
};

enum class LawVariant { Linear, Componentwise, ScalarWrapped };

inline std::string to_string(LawVariant v) {
  switch (v) {
    case LawVariant::Linear: return "linear";
    case LawVariant::Componentwise: return "componentwise";
    case LawVariant::ScalarWrapped: return "scalar";
  }
  return "?";
}

/// A control law built on a gain. Componentwise laws carry one function per
/// state; ScalarWrapped carries exactly one; Linear carries none.
class ControlLaw {
 public:
  static ControlLaw linear(Gain gain) { return ControlLaw(LawVariant::Linear, std::move(gain), {}); }

  static ControlLaw componentwise(Gain gain, std::vector<OddFunction> funcs) {
    if (funcs.size() != static_cast<std::size_t>(gain.size())) {
      throw Error(ErrorCode::DimensionMismatch,
                  "componentwise law needs " + std::to_string(gain.size()) + " functions, got " +
                      std::to_string(funcs.size()));
    }
    return ControlLaw(LawVariant::Componentwise, std::move(gain), std::move(funcs));
  }

  static ControlLaw componentwise(Gain gain, const OddFunction& func) {
    std::vector<OddFunction> funcs(static_cast<std::size_t>(gain.size()), func);
    return componentwise(std::move(gain), std::move(funcs));
  }

  static ControlLaw scalar_wrapped(Gain gain, OddFunction func) {
    return ControlLaw(LawVariant::ScalarWrapped, std::move(gain), {std::move(func)});
  }

  [[nodiscard]] LawVariant variant() const { return variant_; }
  [[nodiscard]] const Gain& gain() const { return gain_; }
  [[nodiscard]] const std::vector<OddFunction>& functions() const { return funcs_; }

  /// Control value u(x).
  [[nodiscard]] double control(const Eigen::VectorXd& x) const {
    switch (variant_) {
      case LawVariant::Linear:
        return gain_.apply(x);
      case LawVariant::Componentwise: {
        double u = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
          u += gain_.k(i) * funcs_[static_cast<std::size_t>(i)](x(i));
        }
        return u;
      }
      case LawVariant::ScalarWrapped:
        return funcs_.front()(gain_.apply(x));
    }
    return 0.0;
  }

 private:
  ControlLaw(LawVariant v, Gain g, std::vector<OddFunction> f)
      : variant_(v), gain_(std::move(g)), funcs_(std::move(f)) {}

  LawVariant variant_;
  Gain gain_;
  std::vector<OddFunction> funcs_;
};

/// Relative singular-value threshold for the controllability rank test.
inline constexpr double kControllabilityRelTol = 1e-9;

inline Eigen::MatrixXd controllability_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const Eigen::Index n = A.rows();
  Eigen::MatrixXd C(n, n * B.cols());
  Eigen::MatrixXd block = B;
  for (Eigen::Index i = 0; i < n; ++i) {
    C.middleCols(i * B.cols(), B.cols()) = block;
    block = A * block;
  }
  return C;
}

/// Checks shapes and controllability; returns the plant unchanged on success.
inline Plant validate_plant(Plant plant) {
  const Eigen::Index n = plant.A.rows();
  if (n == 0 || plant.A.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "A must be square and non-empty");
  }
  if (plant.B.rows() != n || plant.B.cols() != 1) {
    throw Error(ErrorCode::DimensionMismatch,
                "B must be " + std::to_string(n) + "x1, got " + std::to_string(plant.B.rows()) + "x" +
                    std::to_string(plant.B.cols()));
  }
  if (plant.D.rows() != n || plant.D.cols() == 0) {
    throw Error(ErrorCode::DimensionMismatch, "D must have " + std::to_string(n) + " rows");
  }
  if (!(plant.f_bar >= 0.0) || !std::isfinite(plant.f_bar)) {
    throw Error(ErrorCode::InvalidParameter, "f_bar must be finite and >= 0");
  }
  if (!plant.A.allFinite() || !plant.B.allFinite() || !plant.D.allFinite()) {
    throw Error(ErrorCode::InvalidParameter, "plant matrices must be finite");
  }
  const Eigen::MatrixXd C = controllability_matrix(plant.A, plant.B);
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(C).singularValues();
  const double threshold = kControllabilityRelTol * sv(0);
  const auto rank = (sv.array() > threshold).count();
  if (sv(0) == 0.0 || rank < n) {
    throw Error(ErrorCode::Uncontrollable,
                "controllability matrix has rank " + std::to_string(rank) + " < " + std::to_string(n));
  }
  return plant;
}

inline void check_gain(const Plant& plant, const Gain& gain) {
  if (gain.size() != plant.n()) {
    throw Error(ErrorCode::DimensionMismatch, "gain length " + std::to_string(gain.size()) +
                                                  " does not match plant order " + std::to_string(plant.n()));
  }
}

/// A + B K Psi for a diagonal slope assignment psi (length n).
inline Eigen::MatrixXd closed_loop_matrix(const Plant& plant, const Gain& gain, const Eigen::VectorXd& psi) {
  check_gain(plant, gain);
  if (psi.size() != plant.n()) {
    throw Error(ErrorCode::DimensionMismatch, "slope assignment must have length n");
  }
  return plant.A + plant.B * (gain.k.array() * psi.transpose().array()).matrix();
}

/// A + rho B K, the scalar-wrapped closed loop at slope rho.
inline Eigen::MatrixXd closed_loop_matrix(const Plant& plant, const Gain& gain, double rho) {
  check_gain(plant, gain);
  return plant.A + rho * (plant.B * gain.k);
}

}  // namespace oddcert

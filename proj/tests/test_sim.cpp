#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>

#include "oddcert/certify.hpp"
#include "oddcert/sim.hpp"

using namespace oddcert;

namespace {

Plant double_integrator(double f_bar = 0.1) {
  Plant p;
  p.A = (Eigen::MatrixXd(2, 2) << 0, 1, 0, 0).finished();
  p.B = (Eigen::MatrixXd(2, 1) << 0, 1).finished();
  p.D = (Eigen::MatrixXd(2, 1) << 0, 1).finished();
  p.f_bar = f_bar;
  return p;
}

Gain reference_gain() { return Gain{(Eigen::RowVectorXd(2) << -2, -3).finished()}; }

Eigen::VectorXd exact_linear(const Plant& p, const Gain& g, const Eigen::VectorXd& x0, double t) {
  const Eigen::MatrixXd M = (p.A + p.B * g.k) * t;
  return M.exp() * x0;
}

}  // namespace

TEST(Simulate, EquilibriumStaysAtZero) {
  const Plant p = double_integrator();
  for (const auto& law : {ControlLaw::linear(reference_gain()),
                          ControlLaw::componentwise(reference_gain(), OddFunction::saturation(1, 1)),
                          ControlLaw::scalar_wrapped(reference_gain(), OddFunction::power(0.5))}) {
    const Trajectory tr = simulate(p, law, Disturbance::zero(), Eigen::Vector2d::Zero(), 0.01, 5.0);
    ASSERT_EQ(tr.size(), 501U);
    for (const auto& x : tr.states) EXPECT_EQ(x.norm(), 0.0);
    for (double u : tr.controls) EXPECT_EQ(u, 0.0);
  }
}

TEST(Simulate, LinearLoopMatchesMatrixExponential) {
  const Plant p = double_integrator();
  const Gain g = reference_gain();
  const Eigen::Vector2d x0(1.0, -0.5);
  const Trajectory tr = simulate(p, ControlLaw::linear(g), Disturbance::zero(), x0, 1e-3, 20.0);
  for (std::size_t k = 0; k < tr.size(); k += 997) {
    EXPECT_NEAR((tr.states[k] - exact_linear(p, g, x0, tr.times[k])).norm(), 0.0, 1e-11);
  }
  // 20 / |Re lambda_max| time units with lambda_max = -1.
  EXPECT_LT(tr.final_state().norm(), 1e-6);
  EXPECT_EQ(tr.times.back(), 20.0);
  for (std::size_t k = 1; k < tr.size(); ++k) EXPECT_DOUBLE_EQ(tr.times[k], static_cast<double>(k) * 1e-3);
}

TEST(Simulate, FourthOrderConvergence) {
  const Plant p = double_integrator();
  const Gain g = reference_gain();
  const Eigen::Vector2d x0(2.0, 1.0);
  const double t_end = 4.0;
  const Eigen::VectorXd exact = exact_linear(p, g, x0, t_end);
  double prev = 0.0;
  for (double dt : {0.1, 0.05, 0.025}) {
    const Trajectory tr = simulate(p, ControlLaw::linear(g), Disturbance::zero(), x0, dt, t_end);
    const double err = (tr.final_state() - exact).norm();
    EXPECT_LE(err, 0.01 * std::pow(dt, 4));
    if (prev > 0.0) EXPECT_NEAR(prev / err, 16.0, 2.0);
    prev = err;
  }
}

TEST(Simulate, IdentityLawsAreBitIdentical) {
  const Plant p = double_integrator();
  const Gain g = reference_gain();
  const auto d = Disturbance::sinusoid(0.1, 1.0, 0.3);
  const Eigen::Vector2d x0(0.7, -1.1);
  const Trajectory a = simulate(p, ControlLaw::linear(g), d, x0, 1e-3, 10.0);
  const Trajectory b = simulate(p, ControlLaw::componentwise(g, OddFunction::identity()), d, x0, 1e-3, 10.0);
  const Trajectory c = simulate(p, ControlLaw::scalar_wrapped(g, OddFunction::identity()), d, x0, 1e-3, 10.0);
  ASSERT_EQ(a.size(), b.size());
  ASSERT_EQ(a.size(), c.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_TRUE((a.states[k].array() == b.states[k].array()).all());
    EXPECT_TRUE((a.states[k].array() == c.states[k].array()).all());
    EXPECT_EQ(a.controls[k], b.controls[k]);
    EXPECT_EQ(a.controls[k], c.controls[k]);
  }
}

TEST(Simulate, DeterministicForFixedSeed) {
  const Plant p = double_integrator();
  const auto law = ControlLaw::componentwise(reference_gain(), OddFunction::arctan(1, 1));
  const Eigen::Vector2d x0(0.3, 0.2);
  const Trajectory a = simulate(p, law, Disturbance::bounded_noise(42, 0.1, 2.0), x0, 1e-2, 10.0);
  const Trajectory b = simulate(p, law, Disturbance::bounded_noise(42, 0.1, 2.0), x0, 1e-2, 10.0);
  const Trajectory c = simulate(p, law, Disturbance::bounded_noise(43, 0.1, 2.0), x0, 1e-2, 10.0);
  bool differs = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_TRUE((a.states[k].array() == b.states[k].array()).all());
    differs = differs || (a.states[k] - c.states[k]).norm() > 0.0;
  }
  EXPECT_TRUE(differs);
}

TEST(Disturbance, NeverExceedsBound) {
  const double f_bar = 0.1;
  for (Eigen::Index l : {1, 2, 3}) {
    for (const auto& d : {Disturbance::bounded_noise(1, f_bar, 0.5), Disturbance::bounded_noise(99, f_bar, 20.0),
                          Disturbance::sinusoid(f_bar, 1.0), Disturbance::sinusoid(f_bar, 7.0, 1.0),
                          Disturbance::constant(f_bar), Disturbance::zero()}) {
      double peak = 0.0;
      for (int i = 0; i < 20000; ++i) {
        const double t = 1e-3 * i * 3.7;
        const Eigen::VectorXd f = d.at(t, l);
        ASSERT_EQ(f.size(), l);
        EXPECT_LE(f.norm(), f_bar) << d.describe() << " t=" << t;
        peak = std::max(peak, f.norm());
      }
      if (d.kind() != DisturbanceKind::Zero) EXPECT_GT(peak, 0.2 * f_bar) << d.describe();
    }
  }
}

TEST(Disturbance, KnownShapes) {
  EXPECT_EQ(Disturbance::constant(0.05).at(3.0, 1)(0), 0.05);
  EXPECT_NEAR(Disturbance::sinusoid(0.1, 2.0, 0.5).at(1.0, 1)(0), 0.1 * std::sin(2.5), 1e-16);
  EXPECT_EQ(Disturbance::sinusoid(0.1, 1.0).bound(), 0.1);
  EXPECT_THROW(Disturbance::bounded_noise(1, 0.1, 0.0), Error);
  EXPECT_THROW(Disturbance::sinusoid(-1.0, 1.0), Error);
}

TEST(Simulate, RejectsDisturbanceAboveBound) {
  const Plant p = double_integrator(0.1);
  EXPECT_THROW(simulate(p, ControlLaw::linear(reference_gain()), Disturbance::constant(0.2), Eigen::Vector2d::Zero(),
                        1e-3, 1.0),
               Error);
  EXPECT_THROW(simulate(p, ControlLaw::linear(reference_gain()), Disturbance::zero(), Eigen::Vector3d::Zero(), 1e-3, 1.0),
               Error);
  EXPECT_THROW(simulate(p, ControlLaw::linear(reference_gain()), Disturbance::zero(), Eigen::Vector2d::Zero(), 0.0, 1.0),
               Error);
}

TEST(Simulate, DivergenceIsFlaggedAndTruncated) {
  Plant p;
  p.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
  p.B = Eigen::MatrixXd::Ones(1, 1);
  p.D = Eigen::MatrixXd::Ones(1, 1);
  const Gain zero{Eigen::RowVectorXd::Zero(1)};
  const Trajectory tr = simulate(p, ControlLaw::linear(zero), Disturbance::zero(), Eigen::VectorXd::Ones(1), 1e-2, 60.0);
  EXPECT_TRUE(tr.diverged);
  EXPECT_LT(tr.times.back(), 30.0);
  EXPECT_GT(tr.final_state().norm(), kDivergenceCutoff);
  EXPECT_FALSE(time_to_ball(tr, 1.0).has_value());
}

TEST(Extraction, UltimateBoundAndTimeToBall) {
  Trajectory zero;
  for (int k = 0; k <= 100; ++k) {
    zero.times.push_back(0.1 * k);
    zero.states.push_back(Eigen::Vector2d::Zero());
  }
  EXPECT_EQ(empirical_ultimate_bound(zero, 0.5), 0.0);
  EXPECT_EQ(time_to_ball(zero, 0.1), 0.0);
  for (double v : lyapunov_trace(zero, Eigen::Matrix2d::Identity())) EXPECT_EQ(v, 0.0);

  Trajectory decay;
  for (int k = 0; k <= 100; ++k) {
    decay.times.push_back(0.1 * k);
    decay.states.push_back(Eigen::VectorXd::Constant(1, std::exp(-0.1 * k)));
  }
  // Tail window starts at t = 9.
  EXPECT_DOUBLE_EQ(empirical_ultimate_bound(decay, 0.1), std::exp(-9.0));
  const auto t_star = time_to_ball(decay, std::exp(-5.0) * 1.0001);
  ASSERT_TRUE(t_star);
  EXPECT_DOUBLE_EQ(*t_star, 5.0);
  EXPECT_FALSE(time_to_ball(decay, 1e-6).has_value());
  EXPECT_THROW(empirical_ultimate_bound(decay, 0.0), Error);

  const auto v = lyapunov_trace(decay, Eigen::MatrixXd::Identity(1, 1));
  for (std::size_t k = 0; k < v.size(); ++k) EXPECT_DOUBLE_EQ(v[k], decay.states[k].squaredNorm());
}

TEST(Lyapunov, DecreasesAlongCertifiedLinearRun) {
  const Plant p = double_integrator();
  const Gain g = reference_gain();
  const auto cert = certify_componentwise(p, ControlLaw::componentwise(g, OddFunction::identity()), TauSchedule{});
  const auto& iv = cert.intervals.front();
  const double dt = 1e-3;
  const Trajectory tr = simulate(p, ControlLaw::linear(g), Disturbance::zero(), Eigen::Vector2d(3.0, -2.0), dt, 20.0);
  const auto V = lyapunov_trace(tr, iv.solution.P);
  for (std::size_t k = 0; k + 1 < V.size(); ++k) {
    EXPECT_LE(V[k + 1], V[k] * std::exp(-iv.tau * dt) * (1.0 + 1e-9)) << k;
  }
}

TEST(Csv, HeaderAndRows) {
  const Plant p = double_integrator();
  const Trajectory tr =
      simulate(p, ControlLaw::linear(reference_gain()), Disturbance::constant(0.1), Eigen::Vector2d(1, 0), 0.5, 1.0);
  std::ostringstream os;
  write_csv(os, tr);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,x1,x2,u,f1");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST(Splitmix, ReferenceSequence) {
  // First outputs for seed 1234567, as published with the generator.
  std::uint64_t s = 1234567;
  EXPECT_EQ(splitmix64(s), 6457827717110365317ULL);
  EXPECT_EQ(splitmix64(s), 3203168211198807973ULL);
  EXPECT_EQ(splitmix64(s), 9817491932198370423ULL);
}

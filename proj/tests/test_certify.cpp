#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oddcert/certify.hpp"

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

const TauSchedule kTau{0.1, {}};

/// Largest r = gamma tau / chi for which the single-vertex LMI is feasible,
/// found by a plain bisection over [0, r_max] written independently of the
/// library's bracket logic.
double oracle_gamma(const VertexLMI& v, double r_max, double rel) {
  double lo = 0.0;
  double hi = r_max;
  while (hi - lo > rel * std::max(lo, 1e-12)) {
    const double mid = 0.5 * (lo + hi);
    SolveOptions so;
    so.gamma_chi_ratio = mid;
    if (solve_feasibility({v}, so).status == SolveStatus::Feasible) lo = mid;
    else hi = mid;
  }
  return lo;
}

void expect_well_formed(const Certificate& c, const Plant& plant, const Gain& gain) {
  ASSERT_FALSE(c.intervals.empty());
  for (std::size_t i = 0; i < c.intervals.size(); ++i) {
    const auto& iv = c.intervals[i];
    const bool linear_point = c.intervals.size() == 1 && iv.rho_prev == iv.rho_cur;
    if (!linear_point) EXPECT_LT(iv.rho_prev, iv.rho_cur);
    if (i + 1 < c.intervals.size()) EXPECT_EQ(iv.rho_cur, c.intervals[i + 1].rho_prev);
    for (const auto& psi : vertex_set(iv.rho_prev, iv.rho_cur, plant.n(), c.mode)) {
      EXPECT_TRUE(verify(assemble(plant, gain, psi, iv.tau), iv.solution, 1e-7));
    }
  }
  EXPECT_EQ(c.rho_lo, c.intervals.front().rho_prev);
  EXPECT_EQ(c.rho_hi, c.intervals.back().rho_cur);
  const Aggregates a = aggregate(c.intervals);
  EXPECT_EQ(a.tau_min, c.aggregates.tau_min);
  EXPECT_EQ(a.gamma_min, c.aggregates.gamma_min);
  EXPECT_EQ(a.chi_max, c.aggregates.chi_max);
  EXPECT_EQ(a.p_norm_max, c.aggregates.p_norm_max);
  EXPECT_GE(c.x0_radius, 0.0);
  EXPECT_LE(c.x0_radius, c.x_hi_used);
}

class SaturationFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const auto law_cw = ControlLaw::componentwise(reference_gain(), OddFunction::saturation(1, 1));
    const auto law_sc = ControlLaw::scalar_wrapped(reference_gain(), OddFunction::saturation(1, 1));
    cw_ = new Certificate(certify_componentwise(double_integrator(), law_cw, kTau));
    sc_ = new Certificate(certify_scalar(double_integrator(), law_sc, kTau));
  }
  static void TearDownTestSuite() {
    delete cw_;
    delete sc_;
  }
  static Certificate* cw_;
  static Certificate* sc_;
};
Certificate* SaturationFixture::cw_ = nullptr;
Certificate* SaturationFixture::sc_ = nullptr;

}  // namespace

TEST(Certify, IdentityGivesLinearLoopInBothModes) {
  const Plant p = double_integrator();
  const Gain g = reference_gain();
  const auto cw = certify_componentwise(p, ControlLaw::componentwise(g, OddFunction::identity()), kTau);
  const auto sc = certify_scalar(p, ControlLaw::scalar_wrapped(g, OddFunction::identity()), kTau);
  for (const auto* c : {&cw, &sc}) {
    expect_well_formed(*c, p, g);
    EXPECT_EQ(c->rho_lo, 1.0);
    EXPECT_EQ(c->rho_hi, 1.0);
    EXPECT_EQ(c->x_lo, 0.0);
    EXPECT_EQ(c->x_hi, kInf);
    EXPECT_TRUE(c->region_capped);
    EXPECT_EQ(c->x_hi_used, 1e3);
    EXPECT_GT(c->x0_radius, 0.0);
  }
  EXPECT_EQ(cw.x0_radius, sc.x0_radius);
  EXPECT_EQ(cw.delta, sc.delta);
  EXPECT_EQ(cw.aggregates.gamma_min, sc.aggregates.gamma_min);
  EXPECT_EQ(cw.aggregates.chi_max, sc.aggregates.chi_max);
  // The linear law itself certifies identically.
  const auto lin = certify_componentwise(p, ControlLaw::linear(g), kTau);
  EXPECT_EQ(lin.x0_radius, cw.x0_radius);
}

TEST(Certify, InitialRadiusFormulaConsistency) {
  const Plant p = double_integrator();
  const Gain g = reference_gain();
  const auto c = certify_componentwise(p, ControlLaw::componentwise(g, OddFunction::identity()), kTau);
  const auto& a = c.aggregates;
  const double lhs = c.x0_radius_unclamped * c.x0_radius_unclamped * 4.0 * a.tau_min * a.p_norm_max + 2.0 * a.chi_max * p.f_bar;
  const double rhs = a.tau_min * a.gamma_min * c.x_hi_used * c.x_hi_used;
  EXPECT_NEAR(lhs, rhs, 1e-10 * rhs);
}

TEST(Certify, OneDimensionalModesCoincide) {
  Plant p;
  p.A = Eigen::MatrixXd::Constant(1, 1, 0.5);
  p.B = Eigen::MatrixXd::Ones(1, 1);
  p.D = Eigen::MatrixXd::Ones(1, 1);
  p.f_bar = 0.05;
  const Gain g{Eigen::RowVectorXd::Constant(1, -2.0)};
  CertifyOptions opt;
  opt.tune_rho_lo = false;
  const auto cw = certify_componentwise(p, ControlLaw::componentwise(g, OddFunction::arctan(1, 1)), kTau, opt);
  const auto sc = certify_scalar(p, ControlLaw::scalar_wrapped(g, OddFunction::arctan(1, 1)), kTau, opt);
  ASSERT_EQ(cw.intervals.size(), sc.intervals.size());
  for (std::size_t i = 0; i < cw.intervals.size(); ++i) {
    EXPECT_EQ(cw.intervals[i].rho_prev, sc.intervals[i].rho_prev);
    EXPECT_EQ(cw.intervals[i].rho_cur, sc.intervals[i].rho_cur);
    EXPECT_EQ(cw.intervals[i].vertex_count, 2);
    EXPECT_EQ(sc.intervals[i].vertex_count, 2);
  }
  EXPECT_EQ(cw.counters.vertex_solves, sc.counters.vertex_solves);
}

TEST(Certify, LargeDisturbanceGivesDegenerateInitialSet) {
  const Plant p = double_integrator(1e6);
  const Gain g = reference_gain();
  CertifyOptions opt;
  opt.region_cap = 1.0;
  const auto c = certify_componentwise(p, ControlLaw::componentwise(g, OddFunction::identity()), kTau, opt);
  EXPECT_TRUE(c.degenerate_initial_set);
  EXPECT_EQ(c.x0_radius, 0.0);
  bool warned = false;
  for (const auto& w : c.warnings) warned = warned || w.find("DegenerateInitialSet") != std::string::npos;
  EXPECT_TRUE(warned);
}

TEST(Certify, ZeroGainSumRejectedForScalarLaw) {
  const Plant p = double_integrator();
  const Gain g{(Eigen::RowVectorXd(2) << -2, 2).finished()};
  try {
    certify_scalar(p, ControlLaw::scalar_wrapped(g, OddFunction::saturation(1, 1)), kTau);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroGainSum);
  }
}

TEST(MultistepSearch, NoFeedbackOnUnstablePlant) {
  Plant p = double_integrator();
  p.A = (Eigen::MatrixXd(2, 2) << 1, 1, 0, 1).finished();
  const Gain zero{Eigen::RowVectorXd::Zero(2)};
  try {
    multistep_search(p, zero, {SlopeProfile(OddFunction::saturation(1, 1))}, kTau, VertexMode::Componentwise);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoFeasibleInterval);
  }
}

TEST(MultistepSearch, UnstablePlantRaisesTheAnchor) {
  Plant p = double_integrator();
  p.A = (Eigen::MatrixXd(2, 2) << 0, 1, 1, 0).finished();
  const Gain g{(Eigen::RowVectorXd(2) << -4, -4).finished()};
  const auto res = multistep_search(p, g, {SlopeProfile(OddFunction::arctan(2, 1))}, kTau, VertexMode::Scalar);
  EXPECT_GT(res.anchor, 0.0);
  EXPECT_GT(res.intervals.front().rho_prev, 0.25);  // A + rho B K is unstable for rho <= 1/4
}

TEST(MultistepSearch, PerturbedStableLoopAroundOne) {
  const Plant p = double_integrator();
  const Gain g = reference_gain();
  // arctan(2 s) / 2 + 0.5 s has slopes in (0.5, 1.5]; the chain covers 1 from both sides.
  const auto f = OddFunction::affine_plus(OddFunction::arctan(0.5, 2.0), 0.5);
  const auto res = multistep_search(p, g, {SlopeProfile(f)}, kTau, VertexMode::Componentwise);
  EXPECT_LT(res.intervals.front().rho_prev, 1.0);
  EXPECT_GT(res.intervals.back().rho_cur, 1.0);
}

TEST_F(SaturationFixture, CertificatesAreWellFormed) {
  expect_well_formed(*cw_, double_integrator(), reference_gain());
  expect_well_formed(*sc_, double_integrator(), reference_gain());
  EXPECT_EQ(cw_->x_lo, 0.0);
  EXPECT_TRUE(std::isfinite(cw_->x_hi));
  EXPECT_GT(cw_->x0_radius, 0.0);
  EXPECT_NEAR(cw_->rho_hi, 1.0, 1e-12);
}

TEST_F(SaturationFixture, InitialRadiusRecomputedFromAggregates) {
  const auto& a = cw_->aggregates;
  const double r2 = (a.tau_min * a.gamma_min * cw_->x_hi_used * cw_->x_hi_used - 2.0 * a.chi_max * 0.1) /
                    (4.0 * a.tau_min * a.p_norm_max);
  EXPECT_NEAR(cw_->x0_radius_unclamped, std::sqrt(r2), 1e-12 * std::sqrt(r2));
  const double lhs = cw_->x0_radius_unclamped * cw_->x0_radius_unclamped * 4.0 * a.tau_min * a.p_norm_max +
                     2.0 * a.chi_max * 0.1;
  const double rhs = a.tau_min * a.gamma_min * cw_->x_hi_used * cw_->x_hi_used;
  EXPECT_NEAR(lhs, rhs, 1e-10 * rhs);
}

TEST_F(SaturationFixture, RegionMatchesSectorOfCertifiedSlopes) {
  const auto r = sector_region(SlopeProfile(OddFunction::saturation(1, 1)), cw_->rho_lo, cw_->rho_hi);
  EXPECT_EQ(r.x_hi, cw_->x_hi);
  EXPECT_NEAR(cw_->x_hi, 1.0 / cw_->rho_lo, 1e-9 * cw_->x_hi);
  EXPECT_NEAR(sc_->x_hi, 1.0 / (5.0 * sc_->rho_lo), 1e-9 * sc_->x_hi);
}

TEST_F(SaturationFixture, ScalarSearchCoversAtLeastTheComponentwiseRange) {
  EXPECT_GE(sc_->search_length, cw_->search_length);
  EXPECT_LE(sc_->search_anchor, cw_->search_anchor);
}

TEST_F(SaturationFixture, VertexCounters) {
  EXPECT_EQ(cw_->counters.vertex_solves, 4 * cw_->counters.lmi_solves);
  EXPECT_EQ(sc_->counters.vertex_solves, 2 * sc_->counters.lmi_solves);
  for (const auto& iv : cw_->intervals) EXPECT_EQ(iv.vertex_count, 4);
  for (const auto& iv : sc_->intervals) EXPECT_EQ(iv.vertex_count, 2);
}

TEST_F(SaturationFixture, MultistepAtLeastSingleInterval) {
  const auto res = multistep_search(double_integrator(), reference_gain(), {SlopeProfile(OddFunction::saturation(1, 1))},
                                    kTau, VertexMode::Componentwise);
  const double single = single_interval_length(double_integrator(), reference_gain(), res, VertexMode::Componentwise, 0.1);
  EXPECT_GE(res.total_length(), single);
}

TEST(UltimateBound, LinearLoopMatchesIndependentBisection) {
  const Plant p = double_integrator();
  const Gain g = reference_gain();
  const UltimateBound ub = ultimate_bound(p, g, 1.0, 0.1);
  ASSERT_GT(ub.gamma_star, 0.0);
  EXPECT_TRUE(ub.monotone);
  const VertexLMI v = assemble(p, g, Eigen::Vector2d::Ones(), 0.1);
  const double oracle = oracle_gamma(v, 100.0, 1e-6);
  EXPECT_NEAR(ub.gamma_star, oracle, 1e-4 * oracle);
  EXPECT_NEAR(ub.delta, std::sqrt(0.1 / oracle), 1e-4 * ub.delta);

  SolveOptions so;
  so.gamma_chi_ratio = 0.999 * ub.gamma_star;
  EXPECT_EQ(solve_feasibility({v}, so).status, SolveStatus::Feasible);
  so.gamma_chi_ratio = 1.01 * ub.gamma_star;
  EXPECT_EQ(solve_feasibility({v}, so).status, SolveStatus::Infeasible);

  // The literal fixed-chi route reaches the same optimum.
  CertifyOptions lit;
  lit.literal_chi_block = true;
  const UltimateBound ub2 = ultimate_bound(p, g, 1.0, 0.1, lit);
  EXPECT_NEAR(ub2.gamma_star, ub.gamma_star, 1e-3 * ub.gamma_star);
  EXPECT_NEAR(ub2.solution.chi, 0.1, 1e-15);
  EXPECT_TRUE(verify(v, ub.solution));
  EXPECT_NEAR(ub.solution.chi, 0.1, 1e-12);
}

TEST(UltimateBound, LargerSlopeGivesLargerGamma) {
  const Plant p = double_integrator();
  const Gain g = reference_gain();
  const UltimateBound lin = ultimate_bound(p, g, 1.0, 0.1);
  const UltimateBound nl = ultimate_bound(p, g, 2.0, 0.1);
  EXPECT_GE(nl.gamma_star, lin.gamma_star);
  EXPECT_LE(nl.delta, lin.delta);
}

TEST(UltimateBound, ZeroDisturbanceGivesZeroDelta) {
  const UltimateBound ub = ultimate_bound(double_integrator(0.0), reference_gain(), 1.0, 0.1);
  EXPECT_GT(ub.gamma_star, 0.0);
  EXPECT_EQ(ub.delta, 0.0);
}

TEST(UltimateBound, UnstableThetaIsInfeasible) {
  try {
    ultimate_bound(double_integrator(), reference_gain(), 0.0, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Infeasible);
  }
}

TEST(SettlingTime, ClosedFormsAndBoundary) {
  Certificate c;
  c.aggregates = Aggregates{0.2, 0.5, 3.0, 2.0};
  // f = 0: T = ln(|x0|^2 ||P|| / (gamma eps^2)) / tau
  EXPECT_NEAR(settling_time(c, 4.0, 0.1, 0.0), std::log(16.0 * 2.0 / (0.5 * 0.01)) / 0.2, 1e-12);
  // tau gamma eps^2 == chi f  ->  +inf
  const double f = 0.2 * 0.5 * 1.0 / 3.0;
  EXPECT_EQ(settling_time(c, 1.0, 1.0, f * (1 + 1e-12)), kInf);
  EXPECT_TRUE(std::isfinite(settling_time(c, 1.0, 1.0, f * 0.5)));
  // Already inside: clamped at zero.
  EXPECT_EQ(settling_time(c, 0.0, 100.0, 0.0), 0.0);
  EXPECT_THROW(settling_time(c, 1.0, 0.0, 0.0), Error);
  c.strict_energy = true;
  EXPECT_NEAR(settling_time(c, 1.0, 1.0, 0.1),
              std::log((0.2 * 2.0 + 3.0 * 0.01) / (0.2 * 0.5 - 3.0 * 0.01)) / 0.2, 1e-12);
}

TEST(CompareReport, AffinePlusArctanImprovesOnLinear) {
  const Plant p = double_integrator();
  const Gain g = reference_gain();
  const auto f = OddFunction::affine_plus(OddFunction::arctan(1, 1), 1.0);
  const auto cert = certify_componentwise(p, ControlLaw::componentwise(g, f), kTau);
  EXPECT_GT(cert.rho_hi, 1.0);
  const Comparison cmp = compare_report(p, g, cert, 0.1);
  EXPECT_TRUE(cmp.nonlinear_not_worse);
  EXPECT_GE(cmp.nonlinear.gamma_star, cmp.linear.gamma_star);
  EXPECT_EQ(cmp.nonlinear.delta, cert.delta);
}

TEST(CompareReport, IdentityColumnsAreEqual) {
  const Plant p = double_integrator();
  const Gain g = reference_gain();
  const auto cert = certify_componentwise(p, ControlLaw::componentwise(g, OddFunction::identity()), kTau);
  const Comparison cmp = compare_report(p, g, cert, 0.1);
  EXPECT_EQ(cmp.nonlinear.delta, cmp.linear.delta);
  EXPECT_TRUE(cmp.nonlinear_not_worse);
}

TEST(CompareReport, WeakSaturationReportsBothValues) {
  const Plant p = double_integrator();
  const Gain g = reference_gain();
  CertifyOptions opt;
  opt.tune_rho_lo = false;
  const auto cert = certify_componentwise(p, ControlLaw::componentwise(g, OddFunction::saturation(0.5, 1)), kTau, opt);
  EXPECT_LT(cert.rho_hi, 1.0);
  const Comparison cmp = compare_report(p, g, cert, 0.1, opt);
  EXPECT_TRUE(std::isfinite(cmp.linear.delta));
  EXPECT_TRUE(std::isfinite(cmp.nonlinear.delta));
  EXPECT_EQ(cmp.nonlinear_not_worse, cmp.nonlinear.delta <= cmp.linear.delta);
}

TEST(StrictEnergy, SquaresTheDisturbanceTerm) {
  const Plant p = double_integrator(0.5);
  const Gain g = reference_gain();
  CertifyOptions opt;
  opt.strict_energy = true;
  const auto c = certify_componentwise(p, ControlLaw::linear(g), kTau, opt);
  EXPECT_EQ(c.disturbance_term(), 0.25);
  const auto& a = c.aggregates;
  const double r2 = (a.tau_min * a.gamma_min * c.x_hi_used * c.x_hi_used - 2.0 * a.chi_max * 0.25) /
                    (4.0 * a.tau_min * a.p_norm_max);
  EXPECT_NEAR(c.x0_radius_unclamped, std::sqrt(r2), 1e-12 * std::sqrt(r2));
  EXPECT_NEAR(c.delta, std::sqrt(0.25 / c.gamma_star), 1e-12);
}

#include "salab/dynamics.hpp"
#include "salab/error.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace salab;
using salab::test::rel;

namespace {

Eigen::VectorXd cold_state(const Generator& gen, std::uint64_t seed) {
  Eigen::VectorXd phi = random_real_state(gen.layout, seed);
  gen.layout.block(phi, Block::theta).setZero();
  return phi;
}

/// A⁻²Ψ: smooth enough in time for step-halving checks.
Eigen::VectorXd smooth_state(const Generator& gen, std::uint64_t seed) {
  const Eigen::VectorXd psi = random_real_state(gen.layout, seed);
  const Eigen::VectorXd phi = apply_explicit_inverse(gen, apply_explicit_inverse(gen, psi));
  return phi / energy_norm(gen, phi);
}

DecayTrace synthetic_trace(double (*energy)(double)) {
  DecayTrace t;
  t.graph_norm0 = 1.0;
  t.dt = 0.1;
  for (int k = 0; k <= 1000; ++k) {
    t.times.push_back(0.1 * k);
    t.energies.push_back(energy(0.1 * k));
    t.dissipated.push_back(0.0);
  }
  return t;
}

}  // namespace

TEST(Step, ZeroStaysZero) {
  const auto& gen = salab::test::desk();
  EXPECT_EQ(step(gen, Eigen::VectorXd::Zero(gen.dim()), 0.01).norm(), 0.0);
}

TEST(Step, RejectsBadArguments) {
  const auto& gen = salab::test::desk();
  EXPECT_THROW(step(gen, Eigen::VectorXd::Zero(gen.dim()), 0.0), ValidationError);
  EXPECT_THROW(step(gen, Eigen::VectorXd::Zero(gen.dim()), -0.1), ValidationError);
  EXPECT_THROW(step(gen, Eigen::VectorXd::Zero(2), 0.1), DimensionError);
  EXPECT_THROW(Integrator(gen, 0.0), ValidationError);
}

TEST(Step, ConservativeSubsystemKeepsEnergy) {
  const auto& gen = salab::test::cached(16, 0.0, 0.0);
  const Integrator integ(gen, 0.01);
  Eigen::VectorXd phi = cold_state(gen, 3);
  const double e0 = energy_norm(gen, phi);
  for (int k = 0; k < 20; ++k) {
    const double before = energy_norm(gen, phi);
    phi = integ.advance(phi);
    EXPECT_NEAR(energy_norm(gen, phi), before, 1e-12 * before);
  }
  EXPECT_NEAR(energy_norm(gen, phi), e0, 1e-12 * e0);
}

TEST(Step, MidpointEnergyIdentity) {
  const auto& gen = salab::test::desk(0.1);
  const double dt = 0.02;
  const Eigen::VectorXd phi = random_real_state(gen.layout, 8);
  const Eigen::VectorXd next = step(gen, phi, dt);
  const Eigen::VectorXd mid = 0.5 * (phi + next);
  const double lhs = std::pow(energy_norm(gen, next), 2) - std::pow(energy_norm(gen, phi), 2);
  const double rhs = -2.0 * dt * thermal_dissipation(gen, mid);
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::pow(energy_norm(gen, phi), 2));
  EXPECT_LE(lhs, 0.0);
}

TEST(Step, RichardsonLocalErrorIsThirdOrder) {
  const auto& gen = salab::test::cached(8);
  const Eigen::VectorXd phi = smooth_state(gen, 4);
  auto defect = [&](double dt) {
    const Eigen::VectorXd one = step(gen, phi, dt);
    const Eigen::VectorXd two = step(gen, step(gen, phi, dt / 2), dt / 2);
    return energy_norm(gen, Eigen::VectorXd(one - two));
  };
  const double coarse = defect(2e-3), fine = defect(1e-3);
  EXPECT_NEAR(coarse / fine, 8.0, 0.5);
}

TEST(Step, TimeReversalOfConservativeSubsystem) {
  const auto& gen = salab::test::cached(16, 0.0, 0.0);
  const Integrator forward(gen, 0.01), backward(gen, -0.01);
  const Eigen::VectorXd phi0 = cold_state(gen, 6);
  Eigen::VectorXd phi = phi0;
  for (int k = 0; k < 50; ++k) phi = forward.advance(phi);
  for (int k = 0; k < 50; ++k) phi = backward.advance(phi);
  EXPECT_LT(rel(phi, phi0), 1e-10);
}

TEST(ClassicalData, DeterministicAndConsistent) {
  const auto& gen = salab::test::desk();
  const auto [phi0, graph] = make_classical_data(gen, 42);
  const auto [again, graph2] = make_classical_data(gen, 42);
  EXPECT_EQ(phi0, again);
  EXPECT_EQ(graph, graph2);
  const auto [other, graph3] = make_classical_data(gen, 43);
  EXPECT_NE(phi0, other);

  const Eigen::VectorXd psi = apply_generator(gen, phi0);
  EXPECT_NEAR(energy_norm(gen, psi), 1.0, 1e-10);
  EXPECT_GE(graph, energy_norm(gen, phi0));
  EXPECT_NEAR(graph, std::hypot(energy_norm(gen, phi0), 1.0), 1e-10 * graph);
}

TEST(Simulate, ZeroDataStaysZero) {
  const auto& gen = salab::test::desk();
  const auto t = simulate(gen, Eigen::VectorXd::Zero(gen.dim()), 1.0, 0.01, 10);
  for (double e : t.energies) EXPECT_EQ(e, 0.0);
  EXPECT_EQ(t.balance_defect(), 0.0);
  EXPECT_EQ(t.graph_norm0, 0.0);
}

TEST(Simulate, SamplingLayout) {
  const auto& gen = salab::test::cached(8);
  const auto t = simulate(gen, random_real_state(gen.layout, 1), 1.05, 0.01, 10);
  ASSERT_EQ(t.times.size(), 12u);
  EXPECT_EQ(t.times.front(), 0.0);
  EXPECT_NEAR(t.times[1], 0.1, 1e-15);
  EXPECT_NEAR(t.times.back(), 1.05, 1e-12);
  EXPECT_EQ(t.dissipated.front(), 0.0);
  EXPECT_EQ(t.dt, 0.01);
  EXPECT_THROW(simulate(gen, random_real_state(gen.layout, 1), 1.005, 0.01, 1), ValidationError);
  EXPECT_THROW(simulate(gen, random_real_state(gen.layout, 1), 1.0, 0.01, 0), ValidationError);
  EXPECT_THROW(simulate(gen, random_real_state(gen.layout, 1), -1.0, 0.01, 1), ValidationError);
}

TEST(Simulate, EnergyMonotoneAndDecays) {
  for (double gamma : {0.0, 0.1}) {
    const auto& gen = salab::test::desk(gamma);
    const auto t = simulate(gen, random_real_state(gen.layout, 1), 20.0, 0.01, 1);
    for (std::size_t k = 1; k < t.energies.size(); ++k)
      EXPECT_LE(t.energies[k], t.energies[k - 1] + 1e-12 * t.energies[0]);
    EXPECT_LT(t.energies.back(), t.energies.front());
    for (std::size_t k = 1; k < t.dissipated.size(); ++k) EXPECT_GE(t.dissipated[k], t.dissipated[k - 1]);
  }
}

TEST(Simulate, DecoupledControlConservesOverRun) {
  const auto& gen = salab::test::cached(16, 0.0, 0.0);
  const auto t = simulate(gen, cold_state(gen, 2), 10.0, 0.01, 50);
  for (double e : t.energies) EXPECT_NEAR(e, t.energies[0], 1e-10 * t.energies[0]);
  EXPECT_EQ(t.dissipated.back(), 0.0);
}

TEST(Simulate, StepHalvingConvergesAtSecondOrder) {
  const auto& gen = salab::test::cached(8);
  const Eigen::VectorXd phi0 = smooth_state(gen, 5);
  const auto a = simulate(gen, phi0, 2.0, 0.02, 1);
  const auto b = simulate(gen, phi0, 2.0, 0.01, 2);
  const auto c = simulate(gen, phi0, 2.0, 0.005, 4);
  ASSERT_EQ(a.energies.size(), b.energies.size());
  ASSERT_EQ(a.energies.size(), c.energies.size());
  double ab = 0.0, bc = 0.0;
  for (std::size_t k = 0; k < a.energies.size(); ++k) {
    ab = std::max(ab, std::abs(a.energies[k] - b.energies[k]));
    bc = std::max(bc, std::abs(b.energies[k] - c.energies[k]));
  }
  EXPECT_NEAR(ab / bc, 4.0, 0.4);
}

TEST(Simulate, BalanceDefectIsSecondOrder) {
  const auto& gen = salab::test::cached(8);
  const auto [phi0, graph] = make_classical_data(gen, 1);
  const double coarse = simulate(gen, phi0, 5.0, 0.02, 1).balance_defect();
  const double fine = simulate(gen, phi0, 5.0, 0.01, 1).balance_defect();
  EXPECT_NEAR(coarse / fine, 4.0, 0.3);
}

TEST(DecayFitTest, ExactPowerLaw) {
  const auto t = synthetic_trace([](double s) { return s > 0 ? std::pow(s, -0.125) : 1.0; });
  const auto fit = fit_decay(t, 1.0, 50.0);
  EXPECT_NEAR(fit.M, 1.0, 1e-10);
  EXPECT_EQ(fit.M, fit.sup_ratio);
  EXPECT_NEAR(fit.slope, -0.125, 1e-6);
  EXPECT_EQ(fit.samples_used, 491u);
}

TEST(DecayFitTest, ExponentialIsSteeper) {
  const auto t = synthetic_trace([](double s) { return std::exp(-s); });
  const auto fit = fit_decay(t, 1.0, 50.0);
  EXPECT_LT(fit.slope, -0.125);
  EXPECT_TRUE(std::isfinite(fit.M));
}

TEST(DecayFitTest, WindowErrors) {
  const auto t = synthetic_trace([](double) { return 1.0; });
  EXPECT_THROW(fit_decay(t, 5.0, 5.0), FitError);
  EXPECT_THROW(fit_decay(t, 1000.0, 2000.0), FitError);
  EXPECT_THROW(fit_decay(t, 1.0, 1.5), FitError);
  DecayTrace zero = t;
  zero.graph_norm0 = 0.0;
  EXPECT_THROW(fit_decay(zero, 1.0, 50.0), FitError);
}

TEST(DecayFitTest, ClassicalRunIsBounded) {
  const auto& gen = salab::test::cached(8);
  const auto [phi0, graph] = make_classical_data(gen, 1);
  const auto trace = simulate(gen, phi0, 50.0, 0.01, 10);
  EXPECT_NEAR(trace.graph_norm0, graph, 1e-10 * graph);
  const auto fit = fit_decay(trace, 1.0, 50.0);
  EXPECT_TRUE(std::isfinite(fit.M));
  EXPECT_GT(fit.M, 0.0);
  EXPECT_LE(fit.slope, 0.0);
}

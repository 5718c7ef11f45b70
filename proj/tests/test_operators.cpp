#include "salab/error.hpp"
#include "salab/operators.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

using namespace salab;
using salab::test::rel;

namespace {

constexpr double kPi = std::numbers::pi;

DiscreteForms forms_for(const ModelConfig& c) { return assemble_forms(build_geometry(c), c.params); }

double asymmetry(const SpMat& m) { return SpMat(m - SpMat(m.transpose())).norm(); }

/// Lumped 1D trapezoid weights on n cells of width h.
Eigen::VectorXd trapezoid(int n, double h) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n + 1, h);
  w[0] = w[n] = h / 2;
  return w;
}

/// Edge-by-edge assembly of the 2D lumped Neumann gradient form: each grid
/// edge contributes (u_i - u_j)² / h times the transverse trapezoid weight.
Eigen::MatrixXd edge_loop_gradient_form(int nx, int ny, double hx, double hy) {
  const int n = (nx + 1) * (ny + 1);
  const Eigen::VectorXd wx = trapezoid(nx, hx), wy = trapezoid(ny, hy);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  auto edge = [&s](int a, int b, double c) {
    s(a, a) += c;
    s(b, b) += c;
    s(a, b) -= c;
    s(b, a) -= c;
  };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i < nx; ++i) edge(id(i, j), id(i + 1, j), wy[j] / hx);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i <= nx; ++i) edge(id(i, j), id(i, j + 1), wx[i] / hy);
  return s;
}

double min_eigenvalue(const SpMat& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

/// Lowest generalized eigenpair of the beam form against the interior mass.
std::pair<double, Eigen::VectorXd> beam_ground_state(const DiscreteForms& f) {
  const Eigen::VectorXd s = f.m_interior.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd k = s.asDiagonal() * Eigen::MatrixXd(f.k_plate) * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
  return {es.eigenvalues()[0], s.asDiagonal() * es.eigenvectors().col(0)};
}

Eigen::VectorXd interior_x(const DiscreteGeometry& g) {
  const Eigen::VectorXd x = salab::test::face_coordinate(g, 0);
  Eigen::VectorXd xi(g.face_interior_size());
  for (Index i = 0; i < xi.size(); ++i) xi[i] = x[g.gamma0_interior[i]];
  return xi;
}

}  // namespace

TEST(Forms, SymmetricExactly) {
  for (int dim : {2, 3}) {
    const auto f = forms_for(default_config(dim));
    EXPECT_EQ(asymmetry(f.s_omega), 0.0);
    EXPECT_EQ(asymmetry(f.s_face), 0.0);
    EXPECT_EQ(asymmetry(f.s_gamma), 0.0);
    EXPECT_EQ(asymmetry(f.k_plate), 0.0);
    EXPECT_EQ(asymmetry(f.robin_s), 0.0);
    EXPECT_EQ(asymmetry(f.p_gamma), 0.0);
  }
}

TEST(Forms, Definiteness) {
  const auto f = forms_for(salab::test::grid_config(8));
  const double scale = Eigen::MatrixXd(f.s_omega).norm();
  EXPECT_GT(min_eigenvalue(f.s_omega), -1e-12 * scale);
  EXPECT_GT(min_eigenvalue(f.s_gamma), 0.0);
  EXPECT_GT(min_eigenvalue(f.k_plate), 0.0);
  EXPECT_GT(min_eigenvalue(f.robin_s), 0.0);  // λ > 0 pins the constants
  EXPECT_TRUE((f.m_omega.array() > 0).all());
  EXPECT_TRUE((f.m_gamma.array() > 0).all());
  EXPECT_TRUE((f.m_dgamma.array() > 0).all());
}

TEST(Forms, GradientFormAnnihilatesConstants) {
  for (int dim : {2, 3}) {
    const auto f = forms_for(default_config(dim));
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(f.chamber_size());
    EXPECT_LT((f.s_omega * one).lpNorm<Eigen::Infinity>(), 1e-12 * Eigen::MatrixXd(f.s_omega).norm());
  }
}

TEST(Forms, GradientFormMatchesEdgeLoop) {
  const ModelConfig c = default_config();
  const auto f = forms_for(c);
  const Eigen::MatrixXd oracle = edge_loop_gradient_form(16, 16, 1.0 / 16, 0.8 / 16);
  EXPECT_LT((Eigen::MatrixXd(f.s_omega) - oracle).norm(), 1e-12 * oracle.norm());
  const Eigen::VectorXd wx = trapezoid(16, 1.0 / 16), wy = trapezoid(16, 0.8 / 16);
  for (int j = 0; j <= 16; ++j)
    for (int i = 0; i <= 16; ++i) EXPECT_DOUBLE_EQ(f.m_omega[j * 17 + i], wx[i] * wy[j]);
}

TEST(Forms, BeamEigenvalueIsPiToTheFourth) {
  const double exact = std::pow(kPi, 4);
  double previous_error = 0.0;
  for (int n : {32, 64}) {
    const ModelConfig c = salab::test::beam_config(n);
    const auto g = build_geometry(c);
    const auto f = assemble_forms(g, c.params);
    auto [lambda, v] = beam_ground_state(f);
    const double err = std::abs(lambda - exact) / exact;
    EXPECT_LT(err, 2.0 / (n * n));
    if (previous_error > 0.0) EXPECT_NEAR(previous_error / err, 4.0, 0.2);
    previous_error = err;

    const Eigen::VectorXd s = (kPi * interior_x(g).array()).sin().matrix();
    const double cosine = std::abs(v.dot(f.m_interior.cwiseProduct(s))) /
                          std::sqrt(v.dot(f.m_interior.cwiseProduct(v)) * s.dot(f.m_interior.cwiseProduct(s)));
    EXPECT_GT(cosine, 1.0 - 1e-9);
  }
}

TEST(Lifts, ZeroDataGivesZero) {
  const auto f = forms_for(default_config());
  EXPECT_EQ(neumann_lift(f, Eigen::VectorXd::Zero(f.face_size())).norm(), 0.0);
  EXPECT_EQ(dirichlet_lift(f, Eigen::VectorXd::Zero(f.boundary_size())).norm(), 0.0);
  EXPECT_EQ(green_lift(f, Eigen::VectorXd::Zero(f.boundary_size())).norm(), 0.0);
  EXPECT_THROW(neumann_lift(f, Eigen::VectorXd::Zero(3)), DimensionError);
  EXPECT_THROW(green_lift(f, Eigen::VectorXd::Zero(5)), DimensionError);
}

TEST(Lifts, NeumannUnitDataMatchesDenseSolve) {
  ModelConfig c = default_config();
  c.extents = {1.0, 1.0, 1.0};
  const auto f = forms_for(c);
  const Eigen::VectorXd g = Eigen::VectorXd::Ones(f.face_size());
  const Eigen::MatrixXd a = Eigen::MatrixXd(f.s_omega) + Eigen::MatrixXd(f.m_omega.asDiagonal());
  const Eigen::VectorXd rhs = Eigen::MatrixXd(f.b_trace).transpose() * f.m_gamma.cwiseProduct(g);
  const Eigen::VectorXd oracle = a.fullPivLu().solve(rhs);
  EXPECT_LT(rel(neumann_lift(f, g), oracle), 1e-12);
}

TEST(Lifts, NeumannAdjointWithConstants) {
  const auto f = forms_for(default_config());
  const Eigen::VectorXd g = Eigen::VectorXd::Ones(f.face_size());
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(f.chamber_size());
  const Eigen::VectorXd h = neumann_lift(f, g);
  const double lhs = h.dot(f.m_omega.cwiseProduct(f.apply_a_n(one)));
  const double rhs = g.dot(f.m_gamma.cwiseProduct(f.b_trace * one));
  EXPECT_NEAR(lhs, rhs, 1e-13 * std::abs(rhs));
}

TEST(Lifts, DirichletLiftIsLinearOnBeam) {
  const ModelConfig c = salab::test::beam_config(20);
  const auto g = build_geometry(c);
  const auto f = assemble_forms(g, c.params);
  const Eigen::VectorXd x = salab::test::face_coordinate(g, 0);
  Eigen::VectorXd h(2);
  for (int k = 0; k < 2; ++k) h[k] = x[g.dgamma0[k]] == 0.0 ? 2.5 : -1.25;
  const Eigen::VectorXd v = dirichlet_lift(f, h);
  const Eigen::VectorXd linear = (2.5 - 3.75 * x.array()).matrix();
  EXPECT_LT((v - linear).lpNorm<Eigen::Infinity>(), 1e-13);
}

TEST(Lifts, DirichletLiftMaximumPrincipleOnPlate) {
  ModelConfig c = default_config(3);
  c.n_cells = {8, 8, 3};
  c.active_face = FaceId::parse("z-", 3);
  const auto f = forms_for(c);
  Eigen::VectorXd h = Eigen::VectorXd::Random(f.boundary_size());
  const Eigen::VectorXd v = dirichlet_lift(f, h);
  EXPECT_LE(v.maxCoeff(), h.maxCoeff() + 1e-14);
  EXPECT_GE(v.minCoeff(), h.minCoeff() - 1e-14);
  EXPECT_LT((f.r_boundary * v - h).norm(), 1e-14);
}

TEST(Lifts, GreenLiftSolvesTheMomentProblem) {
  // v'''' = 0, v(0) = v(1) = 0, v''(0) = 1, v''(1) = 0.
  for (int n : {16, 32, 64}) {
    const ModelConfig c = salab::test::beam_config(n);
    const auto g = build_geometry(c);
    const auto f = assemble_forms(g, c.params);
    const Eigen::VectorXd x = salab::test::face_coordinate(g, 0);
    Eigen::VectorXd h(2);
    for (int k = 0; k < 2; ++k) h[k] = x[g.dgamma0[k]] == 0.0 ? 1.0 : 0.0;
    const Eigen::VectorXd v = green_lift(f, h);
    const Eigen::ArrayXd xi = interior_x(g).array();
    const Eigen::VectorXd cubic = (-(xi.cube() - 3 * xi.square() + 2 * xi) / 6).matrix();
    const double err = (v - cubic).lpNorm<Eigen::Infinity>();
    EXPECT_LT(err, 0.1 / (n * n));
  }
}

TEST(Lifts, NormalDerivativeOfSine) {
  const ModelConfig c = salab::test::beam_config(64);
  const auto g = build_geometry(c);
  const auto f = assemble_forms(g, c.params);
  const Eigen::VectorXd w = (kPi * interior_x(g).array()).sin().matrix();
  const Eigen::VectorXd dn = normal_derivative(f, w);
  for (Index k = 0; k < dn.size(); ++k) EXPECT_NEAR(dn[k], -kPi, 5e-3);
}

TEST(Forms, DegenerateGridIsAnAssemblyError) {
  auto g = build_geometry(default_config());
  g.n_cells[0] = 2;
  EXPECT_THROW(assemble_forms(g, PhysicalParams{}), AssemblyError);
}

TEST(GeneratorTest, ChamberDisplacementColumn) {
  const auto& gen = salab::test::desk();
  const auto& L = gen.layout;
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(gen.dim());
  const Eigen::VectorXd z1 = Eigen::VectorXd::Random(L.chamber);
  L.block(phi, Block::z1) = z1;
  const Eigen::VectorXd out = apply_generator(gen, phi);
  EXPECT_EQ(L.block(out, Block::z1).norm(), 0.0);
  EXPECT_LT(rel(Eigen::VectorXd(L.block(out, Block::z2)), Eigen::VectorXd(-gen.forms->apply_a_n(z1))), 1e-14);
  EXPECT_EQ(L.block(out, Block::w1).norm(), 0.0);
  EXPECT_EQ(L.block(out, Block::w2).norm(), 0.0);
  EXPECT_EQ(L.block(out, Block::theta).norm(), 0.0);
}

TEST(GeneratorTest, LayoutAndShapes) {
  const auto& gen = salab::test::desk();
  EXPECT_EQ(gen.dim(), 2 * 289 + 2 * 15 + 17);
  EXPECT_EQ(gen.A.rows(), gen.dim());
  EXPECT_EQ(gen.layout.offset(Block::theta), gen.dim() - 17);
  EXPECT_EQ(apply_generator(gen, Eigen::VectorXd(Eigen::VectorXd::Zero(gen.dim()))).norm(), 0.0);
  EXPECT_THROW(apply_generator(gen, Eigen::VectorXd(Eigen::VectorXd::Zero(3))), DimensionError);
  EXPECT_EQ(asymmetry(gen.W), 0.0);
}

TEST(GeneratorTest, AEqualsMassInverseTimesStiffness) {
  for (double gamma : {0.0, 0.1}) {
    const auto& gen = salab::test::cached(6, gamma);
    const Eigen::MatrixXd lhs = Eigen::MatrixXd(gen.mass) * Eigen::MatrixXd(gen.A);
    EXPECT_LT((lhs - Eigen::MatrixXd(gen.stiffness)).norm(), 1e-12 * Eigen::MatrixXd(gen.stiffness).norm());
  }
}

TEST(GeneratorTest, DissipativeOnComplexProbes) {
  for (double gamma : {0.0, 0.1}) {
    const auto& gen = salab::test::desk(gamma);
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
      const Eigen::VectorXcd phi = random_complex_state(gen.layout, seed);
      const Eigen::VectorXcd aphi = apply_generator(gen, phi);
      const double re = energy_inner_product(gen, aphi, phi).real();
      EXPECT_LE(re, 1e-12 * energy_norm(gen, phi) * energy_norm(gen, aphi));
      EXPECT_NEAR(re, -thermal_dissipation(gen, phi), 1e-11 * energy_norm(gen, phi) * energy_norm(gen, aphi));
    }
  }
}

TEST(GeneratorTest, DecoupledSystemIsConservative) {
  const auto& gen = salab::test::cached(16, 0.0, 0.0);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Eigen::VectorXcd phi = random_complex_state(gen.layout, seed);
    gen.layout.block(phi, Block::theta).setZero();
    const Eigen::VectorXcd aphi = apply_generator(gen, phi);
    EXPECT_LT(std::abs(energy_inner_product(gen, aphi, phi).real()),
              1e-12 * energy_norm(gen, phi) * energy_norm(gen, aphi));
    EXPECT_EQ(gen.layout.block(aphi, Block::theta).norm(), 0.0);
  }
}

TEST(GeneratorTest, Linear) {
  const auto& gen = salab::test::desk();
  const Eigen::VectorXd a = random_real_state(gen.layout, 3), b = random_real_state(gen.layout, 4);
  const Eigen::VectorXd lhs = apply_generator(gen, Eigen::VectorXd(2.0 * a - 0.5 * b));
  const Eigen::VectorXd rhs = 2.0 * apply_generator(gen, a) - 0.5 * apply_generator(gen, b);
  EXPECT_LT(rel(lhs, rhs), 1e-14);
}

TEST(Energy, TermsAddUpAndArePositive) {
  const auto& gen = salab::test::desk(0.1);
  const Eigen::VectorXcd phi = random_complex_state(gen.layout, 9);
  const Eigen::VectorXcd psi = random_complex_state(gen.layout, 10);
  const auto terms = energy_terms(gen, phi, psi);
  cplx sum = 0.0;
  for (const auto& t : terms) sum += t;
  const cplx full = energy_inner_product(gen, phi, psi);
  EXPECT_LT(std::abs(sum - full), 1e-12 * std::abs(full));
  for (const auto& t : energy_terms(gen, phi, phi)) {
    EXPECT_GT(t.real(), 0.0);
    EXPECT_LT(std::abs(t.imag()), 1e-12 * std::abs(t.real()));
  }
  EXPECT_EQ(energy_norm(gen, Eigen::VectorXd(Eigen::VectorXd::Zero(gen.dim()))), 0.0);
  Eigen::LLT<Eigen::MatrixXd> llt{Eigen::MatrixXd(gen.W)};
  EXPECT_EQ(llt.info(), Eigen::Success);
}

TEST(Energy, DissipationIsAffineInLambda) {
  ModelConfig c = default_config();
  const Generator one = build_generator(c);
  c.params.lambda = 2.0;
  const Generator two = build_generator(c);
  const Eigen::VectorXcd phi = random_complex_state(one.layout, 5);
  const auto d1 = thermal_dissipation_terms(one, phi);
  const auto d2 = thermal_dissipation_terms(two, phi);
  EXPECT_NEAR(d2.total() - d1.total(), d1.boundary, 1e-12 * d1.total());
  EXPECT_EQ(d1.gradient, d2.gradient);
  EXPECT_EQ(d1.mass, d2.mass);

  Eigen::VectorXcd cold = phi;
  one.layout.block(cold, Block::theta).setZero();
  EXPECT_EQ(thermal_dissipation(one, cold), 0.0);
}

TEST(Inverse, MatchesDenseInverse) {
  for (double gamma : {0.0, 0.1}) {
    const auto& gen = salab::test::cached(8, gamma);
    const Eigen::MatrixXd a_inv = Eigen::MatrixXd(gen.A).fullPivLu().inverse();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Eigen::VectorXd rhs = random_real_state(gen.layout, seed);
      EXPECT_LT(rel(apply_explicit_inverse(gen, rhs), Eigen::VectorXd(a_inv * rhs)), 1e-10);
    }
    EXPECT_EQ(apply_explicit_inverse(gen, Eigen::VectorXd(Eigen::VectorXd::Zero(gen.dim()))).norm(), 0.0);
  }
}

TEST(Inverse, AblationBreaksTheRoundTrip) {
  const auto& gen = salab::test::desk();
  const Eigen::VectorXd rhs = random_real_state(gen.layout, 2);
  const Eigen::VectorXd good = apply_generator(gen, apply_explicit_inverse(gen, rhs));
  const Eigen::VectorXd bad =
      apply_generator(gen, apply_explicit_inverse(gen, rhs, InverseAblation::drop_psi1));
  EXPECT_LT(rel(good, rhs), 1e-10);
  EXPECT_GT(rel(bad, rhs), 1e-3);
}

TEST(Consistency, ChamberRowIsSecondOrder) {
  // z = cos(πx)cos(πy/Ly) has zero normal derivative on the whole box, so the
  // z2 row must reproduce -(1 - Δ)z at every node.
  std::vector<double> errors;
  for (int n : {16, 32}) {
    const ModelConfig c = salab::test::grid_config(n);
    const auto g = build_geometry(c);
    const auto f = assemble_forms(g, c.params);
    const double ly = c.extents[1];
    const Eigen::ArrayXd x = g.coords.row(0).transpose(), y = g.coords.row(1).transpose();
    const Eigen::VectorXd z = ((kPi * x).cos() * (kPi * y / ly).cos()).matrix();
    const double factor = 1.0 + kPi * kPi + kPi * kPi / (ly * ly);
    errors.push_back((f.apply_a_n(z) - factor * z).lpNorm<Eigen::Infinity>() / factor);
  }
  EXPECT_LT(errors[0], 0.05);
  EXPECT_NEAR(errors[0] / errors[1], 4.0, 0.3);
}

// w = (cos πx - 1 + 2x)/π² and θ = cos πx satisfy w = 0 and w'' + θ = 0 at
// both ends, and w'''' + θ'' = 0.
struct MomentCase {
  Eigen::VectorXd w, theta_face, xi;
  Generator gen;
};

MomentCase moment_case(int n) {
  const ModelConfig c = salab::test::beam_config(n);
  const auto g = build_geometry(c);
  MomentCase m{{}, {}, interior_x(g), build_generator(c)};
  const Eigen::ArrayXd xi = m.xi.array();
  m.w = (((kPi * xi).cos() - 1.0 + 2.0 * xi) / (kPi * kPi)).matrix();
  m.theta_face = (kPi * salab::test::face_coordinate(g, 0).array()).cos().matrix();
  return m;
}

TEST(Consistency, PlateRowWithThermalMomentAwayFromEdges) {
  std::vector<double> errors;
  for (int n : {16, 32, 64}) {
    const MomentCase m = moment_case(n);
    const auto& L = m.gen.layout;
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(m.gen.dim());
    L.block(phi, Block::w1) = m.w;
    L.block(phi, Block::theta) = m.theta_face;
    const Eigen::VectorXd full = m.gen.stiffness * phi;
    const Eigen::VectorXd row = L.block(full, Block::w2);
    const Eigen::VectorXd scaled = row.cwiseQuotient(m.gen.forms->m_interior);
    double worst = 0.0;
    const double h = 1.0 / n;
    for (Index i = 0; i < scaled.size(); ++i)
      if (m.xi[i] > 1.5 * h && m.xi[i] < 1.0 - 1.5 * h) worst = std::max(worst, std::abs(scaled[i]));
    errors.push_back(worst);
  }
  EXPECT_LT(errors[1], 0.05);
  EXPECT_NEAR(errors[1] / errors[2], 4.0, 0.5);
}

TEST(Consistency, StaticThermalBendingConverges) {
  std::vector<double> errors;
  for (int n : {16, 32, 64}) {
    const MomentCase m = moment_case(n);
    const auto& f = *m.gen.forms;
    const Eigen::VectorXd load = (f.s_gamma * (f.r_interior * m.theta_face)).cwiseQuotient(f.m_interior);
    errors.push_back((f.solve_plate(load) - m.w).lpNorm<Eigen::Infinity>());
  }
  EXPECT_LT(errors[0], 1e-3);
  EXPECT_NEAR(errors[0] / errors[1], 4.0, 0.4);
  EXPECT_NEAR(errors[1] / errors[2], 4.0, 0.4);
}

TEST(Io, WriteCooRejectsBadPath) {
  EXPECT_THROW(write_coo("/nonexistent/dir/a.coo", salab::test::desk().A), IoError);
}

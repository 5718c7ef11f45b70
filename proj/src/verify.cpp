#include "salab/verify.hpp"

#include "salab/error.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace salab {

namespace {

CheckReport finish(std::string name, int trials, double worst, double tol) {
  CheckReport r;
  r.name = std::move(name);
  r.trials = trials;
  r.worst_residual = worst;
  r.tolerance = tol;
  r.passed = worst <= tol;
  return r;
}

double weighted_dot(const Eigen::VectorXd& w, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (w.array() * a.array() * b.array()).sum();
}

double weighted_norm(const Eigen::VectorXd& w, const Eigen::VectorXd& a) {
  return std::sqrt(weighted_dot(w, a, a));
}

Eigen::VectorXd gaussian(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

void require_trials(int trials) {
  if (trials < 1) throw ValidationError("trials must be >= 1");
}

}  // namespace

std::string CheckReport::line() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "CHECK %s: %s worst=%.6e tol=%.6e trials=%d", name.c_str(),
                passed ? "PASS" : "FAIL", worst_residual, tolerance, trials);
  return buf;
}

CheckReport check_dissipation_identity(const Generator& gen, int trials, std::uint64_t seed) {
  require_trials(trials);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Eigen::VectorXcd phi = random_complex_state(gen.layout, seed + static_cast<std::uint64_t>(t));
    const Eigen::VectorXcd a_phi = apply_generator(gen, phi);
    const double re = energy_inner_product(gen, a_phi, phi).real();
    const double d = thermal_dissipation(gen, phi);
    const double n = energy_norm(gen, phi);
    const double scale = std::max(n * energy_norm(gen, a_phi), n * n);
    if (scale > 0.0) worst = std::max(worst, std::abs(re + d) / scale);
  }
  return finish("dissipation_identity", trials, worst, 1e-12);
}

CheckReport check_trace_adjoints(const DiscreteForms& f, int trials, std::uint64_t seed) {
  require_trials(trials);
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Eigen::VectorXd chamber = gaussian(rng, f.chamber_size());
    const Eigen::VectorXd g = gaussian(rng, f.face_size());
    const Eigen::VectorXd ng = neumann_lift(f, g);
    const Eigen::VectorXd a_n = f.apply_a_n(chamber);
    const Eigen::VectorXd trace = f.b_trace * chamber;
    const double lhs_n = weighted_dot(f.m_omega, ng, a_n);
    const double rhs_n = weighted_dot(f.m_gamma, g, trace);
    const double scale_n =
        weighted_norm(f.m_omega, ng) * weighted_norm(f.m_omega, a_n) +
        weighted_norm(f.m_gamma, g) * weighted_norm(f.m_gamma, trace);
    if (scale_n > 0.0) worst = std::max(worst, std::abs(lhs_n - rhs_n) / scale_n);

    const Eigen::VectorXd plate = gaussian(rng, f.interior_size());
    const Eigen::VectorXd h = gaussian(rng, f.boundary_size());
    const Eigen::VectorXd gh = green_lift(f, h);
    const Eigen::VectorXd a_plate = f.apply_plate(plate);
    const Eigen::VectorXd dn = normal_derivative(f, plate);
    const double lhs_g = weighted_dot(f.m_interior, gh, a_plate);
    const double rhs_g = weighted_dot(f.m_dgamma, h, dn);
    const double scale_g =
        weighted_norm(f.m_interior, gh) * weighted_norm(f.m_interior, a_plate) +
        weighted_norm(f.m_dgamma, h) * weighted_norm(f.m_dgamma, dn);
    if (scale_g > 0.0) worst = std::max(worst, std::abs(lhs_g - rhs_g) / scale_g);
  }
  return finish("trace_adjoints", trials, worst, 1e-12);
}

CheckReport check_inverse(const Generator& gen, int trials, std::uint64_t seed, InverseAblation ablation) {
  require_trials(trials);
  Eigen::SparseLU<SpMat> lu;
  lu.compute(gen.stiffness);
  if (lu.info() != Eigen::Success) throw Error("generator stiffness is singular");
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Eigen::VectorXcd phi_star = random_complex_state(gen.layout, seed + static_cast<std::uint64_t>(t));
    const double n_star = energy_norm(gen, phi_star);
    if (!(n_star > 0.0)) continue;
    const Eigen::VectorXcd x = apply_explicit_inverse(gen, phi_star, ablation);
    const Eigen::VectorXcd round_trip = apply_generator(gen, x) - phi_star;
    worst = std::max(worst, energy_norm(gen, round_trip) / n_star);

    const Eigen::VectorXd rhs_re = gen.mass * phi_star.real();
    const Eigen::VectorXd rhs_im = gen.mass * phi_star.imag();
    const Eigen::VectorXd sol_re = lu.solve(rhs_re);
    const Eigen::VectorXd sol_im = lu.solve(rhs_im);
    Eigen::VectorXcd direct(gen.dim());
    direct.real() = sol_re;
    direct.imag() = sol_im;
    const Eigen::VectorXcd diff = x - direct;
    const double n_direct = energy_norm(gen, direct);
    if (n_direct > 0.0) worst = std::max(worst, energy_norm(gen, diff) / n_direct);
  }
  return finish("inverse", trials, worst, 1e-9);
}

CheckReport check_energy_balance(const DecayTrace& trace) {
  if (trace.energies.empty()) throw ValidationError("energy balance check needs a nonempty trace");
  return finish("energy_balance", static_cast<int>(trace.energies.size()), trace.balance_defect(),
                100.0 * trace.dt * trace.dt);
}

Generator perturb_boundary_weight(const Generator& gen, double rel) {
  Generator out = gen;
  const auto& L = gen.layout;
  const auto& f = *gen.forms;
  // First interior plate node: its bending diagonal carries the ∂Γ₀ closure.
  const Index row = L.offset(Block::w2), col = L.offset(Block::w1);
  const double delta = rel * out.stiffness.coeff(row, col);
  out.stiffness.coeffRef(row, col) += delta;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(L.interior);
  e[0] = delta / f.m_interior[0];
  const Eigen::VectorXd change = f.solve_p_gamma(e);
  for (Index i = 0; i < L.interior; ++i)
    if (change[i] != 0.0) out.A.coeffRef(row + i, col) += change[i];
  return out;
}

DiscreteForms one_sided_chamber_stencil(const DiscreteForms& forms) {
  DiscreteForms out = forms;
  Index i = forms.chamber_size() / 2;
  while (i + 1 < forms.chamber_size() && (out.s_omega.coeff(i, i - 1) == 0.0 || out.s_omega.coeff(i, i + 1) == 0.0))
    ++i;
  if (i + 1 >= forms.chamber_size()) throw Error("no interior chamber node found to corrupt");
  const double back = out.s_omega.coeff(i, i - 1);
  out.s_omega.coeffRef(i, i + 1) += back;
  out.s_omega.coeffRef(i, i - 1) = 0.0;
  out.factorize();
  return out;
}

}  // namespace salab

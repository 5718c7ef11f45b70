#pragma once

#include "salab/model.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <memory>

namespace salab {

using SpMat = Eigen::SparseMatrix<double>;
using cplx = std::complex<double>;

struct FormSolvers;

/// Symmetric bilinear forms of the discrete model. Fields on the interface
/// come in three index sets: "face" (all Γ₀ nodes), "interior" (face nodes
/// off ∂Γ₀, where plate displacement and velocity live) and "boundary"
/// (∂Γ₀ nodes). Masses are lumped trapezoidal diagonals.
struct DiscreteForms {
  Eigen::VectorXd m_omega;  // chamber mass
  SpMat s_omega;            // chamber gradient form, Neumann closure

  Eigen::VectorXd m_gamma;  // face mass
  SpMat s_face;             // face gradient form, natural (Neumann) closure
  Eigen::VectorXd m_interior;
  SpMat s_gamma;            // s_face restricted to interior nodes: Dirichlet Laplacian
  SpMat k_plate;            // simply supported bending form on interior nodes
  Eigen::VectorXd m_dgamma;  // ∂Γ₀ mass
  SpMat robin_s;             // s_face + λ·(∂Γ₀ mass)
  SpMat p_gamma;             // diag(m_interior) + γ·s_gamma

  SpMat b_trace;     // face x chamber: restriction of chamber fields to Γ₀
  SpMat r_interior;  // interior x face selection
  SpMat r_boundary;  // boundary x face selection

  double lambda = 0.0;
  double gamma = 0.0;

  std::shared_ptr<const FormSolvers> solvers;

  Index chamber_size() const { return m_omega.size(); }
  Index face_size() const { return m_gamma.size(); }
  Index interior_size() const { return m_interior.size(); }
  Index boundary_size() const { return m_dgamma.size(); }

  /// Rebuilds the cached factorizations from the current matrices. Needed
  /// after editing a copy of the forms (mutation tests do this).
  void factorize();

  // Actions of the abstract operators in the discrete L² sense.
  Eigen::VectorXd apply_a_n(const Eigen::VectorXd& z) const;          // I - Δ, Neumann
  Eigen::VectorXd solve_a_n(const Eigen::VectorXd& f) const;
  Eigen::VectorXd apply_a_d(const Eigen::VectorXd& w) const;          // -Δ, Dirichlet
  Eigen::VectorXd apply_plate(const Eigen::VectorXd& w) const;        // Å
  Eigen::VectorXd solve_plate(const Eigen::VectorXd& f) const;        // Å⁻¹
  Eigen::VectorXd apply_p_gamma(const Eigen::VectorXd& w) const;      // I + γA_D
  Eigen::VectorXd solve_p_gamma(const Eigen::VectorXd& f) const;
  Eigen::VectorXd apply_a_r(const Eigen::VectorXd& theta) const;      // I - Δ, Robin
  Eigen::VectorXd solve_a_r(const Eigen::VectorXd& f) const;
};

/// Builds every form from the geometry. Throws AssemblyError on a degenerate
/// grid (fewer than 3 cells on an axis).
DiscreteForms assemble_forms(const DiscreteGeometry& geometry, const PhysicalParams& params);

/// Ng: (I - Δ)h = 0 in Ω, ∂h/∂ν = g on Γ₀ and 0 on Γ₁. `g` is a face field.
Eigen::VectorXd neumann_lift(const DiscreteForms& forms, const Eigen::VectorXd& g);
/// Dh: discrete harmonic extension of ∂Γ₀ data into Γ₀; returns a face field.
Eigen::VectorXd dirichlet_lift(const DiscreteForms& forms, const Eigen::VectorXd& h);
/// Gh: Δ²v = 0, v = 0 and Δv = h on ∂Γ₀; returns an interior field.
Eigen::VectorXd green_lift(const DiscreteForms& forms, const Eigen::VectorXd& h);
/// Outward normal derivative on ∂Γ₀ of an interior field (zero on ∂Γ₀),
/// defined through the discrete Green formula of s_face.
Eigen::VectorXd normal_derivative(const DiscreteForms& forms, const Eigen::VectorXd& w);

enum class Block { z1 = 0, z2 = 1, w1 = 2, w2 = 3, theta = 4 };

/// Offsets of the five blocks [z1, z2, w1, w2, θ] inside a state vector.
struct StateLayout {
  Index chamber = 0;
  Index interior = 0;
  Index face = 0;

  Index size(Block b) const;
  Index offset(Block b) const;
  Index dim() const { return 2 * chamber + 2 * interior + face; }

  template <class Vec>
  auto block(Vec& v, Block b) const {
    return v.segment(offset(b), size(b));
  }
};

/// The assembled semigroup generator. A = 𝕄⁻¹𝕂 with 𝕄 block diagonal
/// (I, M_Ω, I, P_γ-mass, M_Γ); W is the Gram matrix of the energy product.
struct Generator {
  SpMat A;
  SpMat W;
  SpMat stiffness;  // 𝕂
  SpMat mass;       // 𝕄
  StateLayout layout;
  PhysicalParams params;
  std::shared_ptr<const DiscreteForms> forms;

  Index dim() const { return layout.dim(); }
};

Generator assemble_generator(std::shared_ptr<const DiscreteForms> forms, const PhysicalParams& params);
/// Geometry -> forms -> generator in one call.
Generator build_generator(const ModelConfig& config);

Eigen::VectorXd apply_generator(const Generator& gen, const Eigen::VectorXd& phi);
Eigen::VectorXcd apply_generator(const Generator& gen, const Eigen::VectorXcd& phi);

/// ⟨φ, ψ⟩_W = ψ* W φ.
cplx energy_inner_product(const Generator& gen, const Eigen::VectorXcd& phi, const Eigen::VectorXcd& psi);
double energy_norm(const Generator& gen, const Eigen::VectorXd& phi);
double energy_norm(const Generator& gen, const Eigen::VectorXcd& phi);

/// The seven terms of the energy product, in order: (∇z₁,∇z̃₁), (z₁,z̃₁),
/// (z₂,z̃₂), a(w₁,w̃₁), (w₂,w̃₂), γ(∇w₂,∇w̃₂), (θ,θ̃).
std::array<cplx, 7> energy_terms(const Generator& gen, const Eigen::VectorXcd& phi,
                                 const Eigen::VectorXcd& psi);

struct ThermalDissipation {
  double gradient = 0.0;  // ‖∇θ‖²
  double mass = 0.0;      // ‖θ‖²
  double boundary = 0.0;  // λ‖θ‖² on ∂Γ₀
  double total() const { return gradient + mass + boundary; }
};

ThermalDissipation thermal_dissipation_terms(const Generator& gen, const Eigen::VectorXcd& phi);
/// D(θ) = ‖∇θ‖² + ‖θ‖² + λ‖θ‖²_∂Γ₀; equals -Re⟨AΦ,Φ⟩_W.
double thermal_dissipation(const Generator& gen, const Eigen::VectorXcd& phi);
double thermal_dissipation(const Generator& gen, const Eigen::VectorXd& phi);

enum class InverseAblation { none, drop_psi1 };

/// Applies A⁻¹ block by block through the lifts N, D, G and the solves of
/// A_N, Å, A_R (no factorization of A itself). `ablation` exists for
/// sensitivity tests only.
Eigen::VectorXd apply_explicit_inverse(const Generator& gen, const Eigen::VectorXd& phi_star,
                                       InverseAblation ablation = InverseAblation::none);
Eigen::VectorXcd apply_explicit_inverse(const Generator& gen, const Eigen::VectorXcd& phi_star,
                                        InverseAblation ablation = InverseAblation::none);

/// Seeded Gaussian states (each entry standard normal; complex states draw
/// real and imaginary parts independently).
Eigen::VectorXd random_real_state(const StateLayout& layout, std::uint64_t seed);
Eigen::VectorXcd random_complex_state(const StateLayout& layout, std::uint64_t seed);

/// Coordinate-format text, one `row col value` triple per line (0-based).
void write_coo(const std::filesystem::path& path, const SpMat& m);

}  // namespace salab

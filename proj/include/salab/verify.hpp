#pragma once

#include "salab/dynamics.hpp"
#include "salab/operators.hpp"

#include <cstdint>
#include <string>

namespace salab {

struct CheckReport {
  std::string name;
  int trials = 0;
  double worst_residual = 0.0;
  double tolerance = 0.0;
  bool passed = false;

  /// `CHECK <name>: <PASS|FAIL> worst=<r> tol=<t> trials=<n>`
  std::string line() const;
};

/// |Re⟨AΦ,Φ⟩_W + D(Φ)| / max(‖Φ‖‖AΦ‖, ‖Φ‖²) over complex Gaussian probes.
CheckReport check_dissipation_identity(const Generator& gen, int trials, std::uint64_t seed);

/// ⟨Ng, A_N f⟩_Ω = ⟨g, f|Γ₀⟩_Γ₀ and ⟨Gh, Åϖ⟩_Γ₀ = ⟨h, ∂ϖ/∂ν⟩_∂Γ₀.
CheckReport check_trace_adjoints(const DiscreteForms& forms, int trials, std::uint64_t seed);

/// Round trip A·A⁻¹Φ* and agreement with a sparse direct solve of 𝕂Φ = 𝕄Φ*.
CheckReport check_inverse(const Generator& gen, int trials, std::uint64_t seed,
                          InverseAblation ablation = InverseAblation::none);

/// Balance defect of a trace against tolerance 100·dt².
CheckReport check_energy_balance(const DecayTrace& trace);

// Mutation controls: single-site corruptions that each check must detect.

/// Scales the bending-form diagonal of the plate node next to ∂Γ₀ by 1 + rel
/// in the plate equation only (𝕂 and A), leaving the energy product intact.
Generator perturb_boundary_weight(const Generator& gen, double rel = 1e-3);

/// Moves the backward x-neighbour weight of one interior chamber node onto
/// its forward neighbour, making S_Ω one-sided there, then refactorizes.
DiscreteForms one_sided_chamber_stencil(const DiscreteForms& forms);

}  // namespace salab

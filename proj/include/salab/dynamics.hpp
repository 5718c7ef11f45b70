#pragma once

#include "salab/operators.hpp"

#include <memory>
#include <utility>
#include <vector>

namespace salab {

struct DecayTrace {
  std::vector<double> times;
  std::vector<double> energies;    // ‖Φ(t)‖_W
  std::vector<double> dissipated;  // 2∫₀ᵗ D(θ) dτ, trapezoidal in time
  double graph_norm0 = 0.0;        // sqrt(‖Φ₀‖² + ‖AΦ₀‖²)
  double dt = 0.0;

  /// max_k |E₀² - E_k² - dissipated_k| / E₀² (0 for the zero state).
  double balance_defect() const;
};

struct DecayFit {
  double M = 0.0;
  double sup_ratio = 0.0;  // max of t^{1/8}·‖Φ(t)‖ / ‖Φ₀‖_{D(A)} over the window
  double slope = 0.0;      // least-squares slope of log ‖Φ(t)‖ vs log t
  double window_begin = 0.0;
  double window_end = 0.0;
  std::size_t samples_used = 0;
};

/// Implicit midpoint: Φ⁺ = (𝕄 - dt/2 𝕂)⁻¹(𝕄 + dt/2 𝕂)Φ with the sparse LU
/// cached. A negative dt runs the scheme backwards.
class Integrator {
 public:
  Integrator(const Generator& gen, double dt);
  ~Integrator();
  Integrator(Integrator&&) noexcept;
  Integrator& operator=(Integrator&&) noexcept;

  /// Throws StepError (time = `time`) if the solve residual exceeds 1e-11.
  Eigen::VectorXd advance(const Eigen::VectorXd& phi, double time = 0.0) const;
  double dt() const { return dt_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  double dt_;
};

/// One midpoint step; dt must be positive.
Eigen::VectorXd step(const Generator& gen, const Eigen::VectorXd& phi, double dt);

/// Φ₀ = A⁻¹Ψ for a seeded Ψ with ‖Ψ‖_W = 1; returns (Φ₀, ‖Φ₀‖_{D(A)}).
std::pair<Eigen::VectorXd, double> make_classical_data(const Generator& gen, std::uint64_t seed);

/// Samples every `sample_every` steps and at t_end. t_end must be a whole
/// number of steps (to 1e-9 relative).
DecayTrace simulate(const Generator& gen, const Eigen::VectorXd& phi0, double t_end, double dt,
                    int sample_every);

/// Samples with window_begin <= t <= window_end and t > 0; needs >= 8.
DecayFit fit_decay(const DecayTrace& trace, double window_begin, double window_end);

}  // namespace salab

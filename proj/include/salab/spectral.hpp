#pragma once

#include "salab/operators.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace salab {

struct ResolventSample {
  double beta = 0.0;
  double norm = 0.0;      // ‖(iβ - A)⁻¹‖ in the energy norm
  double residual = 0.0;  // backward-error estimate of the computation
  bool ok = true;
  std::string error;      // set when !ok
};

enum class SpectrumMethod { dense, shift_invert };

struct SpectrumReport {
  std::vector<cplx> eigenvalues;  // sorted by decreasing real part
  double abscissa = 0.0;
  SpectrumMethod method = SpectrumMethod::dense;
  cplx nearest_to_axis{};
};

struct GrowthFit {
  double exponent = 0.0;       // least-squares slope of log‖R‖ vs log β
  double constant = 0.0;       // C* = max ‖R(iβ)‖ / β⁸
  double beta_min_used = 0.0;
  bool envelope_ok = false;
  std::size_t samples_used = 0;
};

/// How the smallest singular value of iβ - Ã is found.
///  - hessenberg_lanczos: one Hessenberg reduction of Ã, then per β an
///    O(n²) pivoted LU and Lanczos on the inverse normal operator.
///  - dense_svd: full SVD per β. Slow; kept as an oracle.
///  - sparse_iterative: sparse LU of iβ𝕄 - 𝕂 per β plus Lanczos. The
///    default (automatic); the two dense routes serve as cross-checks.
enum class NormMethod { automatic, hessenberg_lanczos, dense_svd, sparse_iterative };

/// Dense Ã = Lᵀ A L⁻ᵀ with W = L Lᵀ. Ã is unitarily equivalent to A acting
/// on the energy space, so its 2-norm quantities are energy-norm quantities.
/// Built as L⁻¹ (W A) L⁻ᵀ, with W A assembled directly from the forms so the
/// conservative part is exactly skew before the triangular solves.
Eigen::MatrixXd symmetrized_generator(const Generator& gen);

/// Solves (iβ - A)Φ = Φ*. Throws NearSpectrumError when the relative
/// residual exceeds 1e-10.
Eigen::VectorXcd solve_resolvent(const Generator& gen, double beta, const Eigen::VectorXcd& phi_star);

/// Reusable resolvent-norm evaluator. Construction does the O(n³) work once;
/// norm() is const and safe to call from several threads.
class ResolventEngine {
 public:
  explicit ResolventEngine(const Generator& gen, NormMethod method = NormMethod::automatic);
  ~ResolventEngine();
  ResolventEngine(ResolventEngine&&) noexcept;
  ResolventEngine& operator=(ResolventEngine&&) noexcept;

  /// Throws NearSpectrumError on breakdown or an unconverged estimate.
  ResolventSample norm(double beta) const;
  NormMethod method() const { return method_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  NormMethod method_;
};

ResolventSample resolvent_norm(const Generator& gen, double beta,
                               NormMethod method = NormMethod::automatic);

/// Evaluates every β (in parallel when threads != 1); output order matches
/// the input. Failed points come back with ok = false instead of throwing.
std::vector<ResolventSample> sweep_resolvent(const Generator& gen, std::span<const double> betas,
                                             unsigned threads = 0,
                                             NormMethod method = NormMethod::automatic);

/// `points` values from lo to hi, equally spaced in log β.
std::vector<double> log_spaced(double lo, double hi, int points);

/// Fits samples with β >= beta_min (at least 8 required, else FitError).
GrowthFit fit_growth(std::span<const ResolventSample> samples, double beta_min);

/// Dense: every eigenvalue of Ã. Shift-invert: the eigenvalue nearest each
/// shift. A shift on the spectrum throws NearSpectrumError.
SpectrumReport compute_spectrum(const Generator& gen, SpectrumMethod method,
                                std::span<const cplx> shifts = {});

/// Dense spectrum of the sub-block of Ã formed by the listed state blocks.
SpectrumReport block_spectrum(const Generator& gen, std::span<const Block> blocks);

}  // namespace salab

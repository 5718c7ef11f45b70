#include "salab/dynamics.hpp"

#include "salab/error.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

namespace salab {

struct Integrator::Impl {
  const Generator* gen = nullptr;
  SpMat rhs;  // 𝕄 + dt/2 𝕂
  SpMat lhs;  // 𝕄 - dt/2 𝕂
  Eigen::SparseLU<SpMat> lu;
};

Integrator::Integrator(const Generator& gen, double dt) : impl_(std::make_unique<Impl>()), dt_(dt) {
  if (!(dt != 0.0) || !std::isfinite(dt)) throw ValidationError("time step must be finite and nonzero");
  impl_->gen = &gen;
  impl_->rhs = gen.mass + (0.5 * dt) * gen.stiffness;
  impl_->lhs = gen.mass - (0.5 * dt) * gen.stiffness;
  impl_->lhs.makeCompressed();
  impl_->lu.compute(impl_->lhs);
  if (impl_->lu.info() != Eigen::Success) throw StepError("midpoint matrix factorization failed", 0.0);
}

Integrator::~Integrator() = default;
Integrator::Integrator(Integrator&&) noexcept = default;
Integrator& Integrator::operator=(Integrator&&) noexcept = default;

Eigen::VectorXd Integrator::advance(const Eigen::VectorXd& phi, double time) const {
  if (phi.size() != impl_->gen->dim()) throw DimensionError("advance: state length mismatch");
  const Eigen::VectorXd b = impl_->rhs * phi;
  Eigen::VectorXd next = impl_->lu.solve(b);
  const double scale = b.lpNorm<Eigen::Infinity>();
  const double res = (impl_->lhs * next - b).lpNorm<Eigen::Infinity>();
  if (!(res <= 1e-11 * std::max(scale, 1e-300)) && scale > 0.0)
    throw StepError("midpoint solve residual " + std::to_string(res / scale) + " at t = " + std::to_string(time),
                    time);
  return next;
}

Eigen::VectorXd step(const Generator& gen, const Eigen::VectorXd& phi, double dt) {
  if (!(dt > 0.0)) throw ValidationError("time step must be positive");
  return Integrator(gen, dt).advance(phi);
}

std::pair<Eigen::VectorXd, double> make_classical_data(const Generator& gen, std::uint64_t seed) {
  Eigen::VectorXd psi = random_real_state(gen.layout, seed);
  psi /= energy_norm(gen, psi);
  Eigen::VectorXd phi0 = apply_explicit_inverse(gen, psi);
  const double e = energy_norm(gen, phi0);
  return {std::move(phi0), std::sqrt(e * e + 1.0)};
}

double DecayTrace::balance_defect() const {
  if (energies.empty() || energies[0] == 0.0) return 0.0;
  const double e0 = energies[0] * energies[0];
  double worst = 0.0;
  for (std::size_t k = 0; k < energies.size(); ++k)
    worst = std::max(worst, std::abs(e0 - energies[k] * energies[k] - dissipated[k]) / e0);
  return worst;
}

DecayTrace simulate(const Generator& gen, const Eigen::VectorXd& phi0, double t_end, double dt, int sample_every) {
  if (!(t_end > 0.0) || !(dt > 0.0)) throw ValidationError("t_end and dt must be positive");
  if (sample_every < 1) throw ValidationError("sample_every must be >= 1");
  if (phi0.size() != gen.dim()) throw DimensionError("simulate: state length mismatch");
  const auto steps = static_cast<long long>(std::llround(t_end / dt));
  if (steps < 1 || std::abs(static_cast<double>(steps) * dt - t_end) > 1e-9 * t_end)
    throw ValidationError("t_end must be a whole number of time steps");

  const Integrator integrator(gen, dt);
  DecayTrace trace;
  trace.dt = dt;
  const double e0 = energy_norm(gen, phi0);
  trace.graph_norm0 = std::hypot(e0, energy_norm(gen, Eigen::VectorXd(apply_generator(gen, phi0))));

  Eigen::VectorXd phi = phi0;
  double d_prev = thermal_dissipation(gen, phi);
  double accumulated = 0.0;
  trace.times.push_back(0.0);
  trace.energies.push_back(e0);
  trace.dissipated.push_back(0.0);
  for (long long k = 1; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    phi = integrator.advance(phi, t);
    const double d = thermal_dissipation(gen, phi);
    accumulated += dt * (d_prev + d);  // 2 · trapezoid
    d_prev = d;
    if (k % sample_every == 0 || k == steps) {
      trace.times.push_back(t);
      trace.energies.push_back(energy_norm(gen, phi));
      trace.dissipated.push_back(accumulated);
    }
  }
  return trace;
}

DecayFit fit_decay(const DecayTrace& trace, double window_begin, double window_end) {
  if (!(window_end > window_begin)) throw FitError("decay window is empty");
  if (!(trace.graph_norm0 > 0.0)) throw FitError("decay fit needs a nonzero initial state");
  DecayFit fit;
  fit.window_begin = window_begin;
  fit.window_end = window_end;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (std::size_t k = 0; k < trace.times.size(); ++k) {
    const double t = trace.times[k];
    if (t < window_begin || t > window_end || !(t > 0.0)) continue;
    const double e = trace.energies[k];
    fit.sup_ratio = std::max(fit.sup_ratio, std::pow(t, 0.125) * e / trace.graph_norm0);
    if (e > 0.0) {
      const double x = std::log(t), y = std::log(e);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      n += 1;
    }
    ++fit.samples_used;
  }
  if (fit.samples_used < 8)
    throw FitError("decay fit needs >= 8 samples in the window, got " + std::to_string(fit.samples_used));
  const double denom = n * sxx - sx * sx;
  fit.slope = denom > 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
  fit.M = fit.sup_ratio;
  return fit;
}

}  // namespace salab

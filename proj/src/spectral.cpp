#include "salab/spectral.hpp"

#include "salab/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace salab {

namespace {

using CSpMat = Eigen::SparseMatrix<cplx>;
constexpr double kAcceptResidual = 1e-10;

// W·A assembled from the forms. W𝕄⁻¹ is the identity except on the two
// displacement rows, where 𝕂 is the identity on the velocity block and W
// contributes M_Ω + S_Ω and K_p respectively.
SpMat energy_form_of_generator(const Generator& gen) {
  const auto& L = gen.layout;
  const auto& f = *gen.forms;
  SpMat a_n = f.s_omega;
  for (Index i = 0; i < L.chamber; ++i) a_n.coeffRef(i, i) += f.m_omega[i];
  std::vector<Eigen::Triplet<double>> t;
  auto skip = [&](Index row) {
    return (row >= L.offset(Block::z1) && row < L.offset(Block::z1) + L.size(Block::z1)) ||
           (row >= L.offset(Block::w1) && row < L.offset(Block::w1) + L.size(Block::w1));
  };
  for (Index k = 0; k < gen.stiffness.outerSize(); ++k)
    for (SpMat::InnerIterator it(gen.stiffness, k); it; ++it)
      if (!skip(it.row())) t.emplace_back(it.row(), it.col(), it.value());
  auto place = [&](const SpMat& m, Block row, Block col) {
    for (Index k = 0; k < m.outerSize(); ++k)
      for (SpMat::InnerIterator it(m, k); it; ++it)
        t.emplace_back(L.offset(row) + it.row(), L.offset(col) + it.col(), it.value());
  };
  place(a_n, Block::z1, Block::z2);
  place(f.k_plate, Block::w1, Block::w2);
  SpMat out(L.dim(), L.dim());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

CSpMat shifted_pencil(const Generator& gen, cplx shift) {
  // shift·𝕄 - 𝕂
  CSpMat m = gen.mass.cast<cplx>();
  CSpMat k = gen.stiffness.cast<cplx>();
  CSpMat out = shift * m - k;
  out.makeCompressed();
  return out;
}

Eigen::VectorXcd cmul(const SpMat& m, const Eigen::VectorXcd& v) {
  Eigen::VectorXcd out(m.rows());
  out.real() = m * v.real();
  out.imag() = m * v.imag();
  return out;
}

Eigen::VectorXcd lanczos_start(Index n) {
  std::mt19937_64 rng(0x5a1ab);
  std::normal_distribution<double> normal;
  Eigen::VectorXcd v(n);
  for (Index i = 0; i < n; ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    v[i] = cplx(re, im);
  }
  return v.normalized();
}

struct LanczosResult {
  double theta = 0.0;     // largest eigenvalue
  double rel_resid = 0.0;
  Eigen::VectorXcd ritz;  // unit Ritz vector
};

// Largest eigenvalue of a Hermitian positive operator with full
// reorthogonalization.
template <class Op>
LanczosResult lanczos_max(Op&& apply, Index n, double tol = 1e-13, Index max_iter = 300) {
  const Index m = std::min<Index>(n, max_iter);
  Eigen::MatrixXcd V(n, m + 1);
  std::vector<double> alpha, beta;
  V.col(0) = lanczos_start(n);
  LanczosResult res;
  Eigen::VectorXd s_last;
  Index used = 0;
  for (Index k = 0; k < m; ++k) {
    Eigen::VectorXcd w = apply(V.col(k));
    const double a = V.col(k).dot(w).real();
    alpha.push_back(a);
    w -= a * V.col(k);
    if (k > 0) w -= beta.back() * V.col(k - 1);
    for (int pass = 0; pass < 2; ++pass)
      for (Index j = 0; j <= k; ++j) w -= V.col(j).dot(w) * V.col(j);
    const double b = w.norm();
    used = k + 1;

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(used, used);
    for (Index i = 0; i < used; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < used) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    res.theta = es.eigenvalues()[used - 1];
    s_last = es.eigenvectors().col(used - 1);
    res.rel_resid = b * std::abs(s_last[used - 1]) / res.theta;
    if (res.rel_resid <= tol || b <= 1e-300 || k + 1 == m) break;
    beta.push_back(b);
    V.col(k + 1) = w / b;
  }
  res.ritz = V.leftCols(used) * s_last.cast<cplx>();
  res.ritz.normalize();
  return res;
}

// LU with adjacent-row pivoting of an upper Hessenberg matrix; O(n²).
class HessenbergLU {
 public:
  using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  explicit HessenbergLU(RowMat z) : u_(std::move(z)) {
    const Index n = u_.rows();
    l_.resize(std::max<Index>(n - 1, 0));
    swap_.assign(static_cast<std::size_t>(l_.size()), false);
    for (Index k = 0; k + 1 < n; ++k) {
      if (std::abs(u_(k + 1, k)) > std::abs(u_(k, k))) {
        u_.row(k).segment(k, n - k).swap(u_.row(k + 1).segment(k, n - k));
        swap_[static_cast<std::size_t>(k)] = true;
      }
      if (u_(k, k) == cplx(0.0)) continue;
      const cplx l = u_(k + 1, k) / u_(k, k);
      l_[k] = l;
      u_.row(k + 1).segment(k, n - k) -= l * u_.row(k).segment(k, n - k);
      u_(k + 1, k) = 0.0;
    }
  }

  double min_pivot() const { return u_.diagonal().cwiseAbs().minCoeff(); }

  Eigen::VectorXcd solve(Eigen::VectorXcd b) const {
    for (Index k = 0; k < l_.size(); ++k) {
      if (swap_[static_cast<std::size_t>(k)]) std::swap(b[k], b[k + 1]);
      b[k + 1] -= l_[k] * b[k];
    }
    u_.triangularView<Eigen::Upper>().solveInPlace(b);
    return b;
  }

  Eigen::VectorXcd solve_adjoint(const Eigen::VectorXcd& c) const {
    Eigen::VectorXcd y = u_.triangularView<Eigen::Upper>().adjoint().solve(c);
    for (Index k = l_.size() - 1; k >= 0; --k) {
      y[k] -= std::conj(l_[k]) * y[k + 1];
      if (swap_[static_cast<std::size_t>(k)]) std::swap(y[k], y[k + 1]);
    }
    return y;
  }

 private:
  RowMat u_;
  Eigen::VectorXcd l_;
  std::vector<bool> swap_;
};

std::vector<cplx> sorted_eigenvalues(const Eigen::VectorXcd& ev) {
  std::vector<cplx> v(ev.data(), ev.data() + ev.size());
  std::sort(v.begin(), v.end(), [](cplx a, cplx b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  return v;
}

SpectrumReport dense_report(const Eigen::MatrixXd& a) {
  SpectrumReport r;
  r.method = SpectrumMethod::dense;
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  if (es.info() != Eigen::Success) throw Error("dense eigensolver did not converge");
  r.eigenvalues = sorted_eigenvalues(es.eigenvalues());
  if (!r.eigenvalues.empty()) {
    r.nearest_to_axis = r.eigenvalues.front();
    r.abscissa = r.nearest_to_axis.real();
  }
  return r;
}

}  // namespace

Eigen::MatrixXd symmetrized_generator(const Generator& gen) {
  const Eigen::MatrixXd w = Eigen::MatrixXd(gen.W);
  Eigen::LLT<Eigen::MatrixXd> llt(w);
  if (llt.info() != Eigen::Success) throw Error("energy Gram matrix is not positive definite");
  const Eigen::MatrixXd wa = Eigen::MatrixXd(energy_form_of_generator(gen));
  // L⁻¹ (WA) L⁻ᵀ
  Eigen::MatrixXd x = llt.matrixL().solve(wa);
  Eigen::MatrixXd xt = x.transpose();
  Eigen::MatrixXd y = llt.matrixL().solve(xt);
  return y.transpose();
}

Eigen::VectorXcd solve_resolvent(const Generator& gen, double beta, const Eigen::VectorXcd& phi_star) {
  if (phi_star.size() != gen.dim()) throw DimensionError("solve_resolvent: state length mismatch");
  Eigen::SparseLU<CSpMat> lu;
  lu.compute(shifted_pencil(gen, cplx(0.0, beta)));
  if (lu.info() != Eigen::Success)
    throw NearSpectrumError("resolvent factorization failed at beta = " + std::to_string(beta), beta,
                            std::numeric_limits<double>::infinity());
  Eigen::VectorXcd phi = lu.solve(cmul(gen.mass, phi_star));
  const Eigen::VectorXcd r = cplx(0.0, beta) * phi - cmul(gen.A, phi) - phi_star;
  const double scale = energy_norm(gen, phi_star);
  const double rel = scale > 0.0 ? energy_norm(gen, r) / scale : energy_norm(gen, r);
  if (!(rel <= kAcceptResidual))
    throw NearSpectrumError("resolvent solve residual " + std::to_string(rel) + " at beta = " +
                                std::to_string(beta),
                            beta, rel);
  return phi;
}

struct ResolventEngine::Impl {
  const Generator* gen = nullptr;
  // Dense paths.
  Eigen::MatrixXd a_tilde;
  Eigen::MatrixXd hessenberg;
  // Sparse path: W = Pᵀ L Lᵀ P.
  std::unique_ptr<Eigen::SimplicialLLT<SpMat>> w_llt;
  CSpMat l_c;
  CSpMat mass_c;
};

ResolventEngine::ResolventEngine(const Generator& gen, NormMethod method)
    : impl_(std::make_unique<Impl>()), method_(method) {
  impl_->gen = &gen;
  if (method_ == NormMethod::automatic) method_ = NormMethod::sparse_iterative;
  switch (method_) {
    case NormMethod::hessenberg_lanczos: {
      Eigen::HessenbergDecomposition<Eigen::MatrixXd> hd(symmetrized_generator(gen));
      impl_->hessenberg = hd.matrixH();
      break;
    }
    case NormMethod::dense_svd:
      impl_->a_tilde = symmetrized_generator(gen);
      break;
    case NormMethod::sparse_iterative: {
      impl_->w_llt = std::make_unique<Eigen::SimplicialLLT<SpMat>>(gen.W);
      if (impl_->w_llt->info() != Eigen::Success) throw Error("energy Gram matrix is not positive definite");
      impl_->l_c = SpMat(impl_->w_llt->matrixL()).cast<cplx>();
      impl_->mass_c = gen.mass.cast<cplx>();
      break;
    }
    case NormMethod::automatic:
      break;
  }
}

ResolventEngine::~ResolventEngine() = default;
ResolventEngine::ResolventEngine(ResolventEngine&&) noexcept = default;
ResolventEngine& ResolventEngine::operator=(ResolventEngine&&) noexcept = default;

ResolventSample ResolventEngine::norm(double beta) const {
  const cplx z(0.0, beta);
  ResolventSample s;
  s.beta = beta;
  const Index n = impl_->gen->dim();

  if (method_ == NormMethod::dense_svd) {
    Eigen::MatrixXcd shifted = -impl_->a_tilde.cast<cplx>();
    shifted.diagonal().array() += z;
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(shifted);
    const double smin = svd.singularValues().minCoeff();
    if (!(smin > 0.0)) throw NearSpectrumError("singular resolvent at beta = " + std::to_string(beta), beta, 1.0);
    s.norm = 1.0 / smin;
    s.residual = std::numeric_limits<double>::epsilon();
    return s;
  }

  if (method_ == NormMethod::hessenberg_lanczos) {
    const auto& h = impl_->hessenberg;
    HessenbergLU::RowMat tz = -h.cast<cplx>();
    tz.diagonal().array() += z;
    const HessenbergLU lu(tz);
    if (!(lu.min_pivot() > 0.0))
      throw NearSpectrumError("iβ is an eigenvalue at beta = " + std::to_string(beta), beta, 1.0);
    auto op = [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd { return lu.solve_adjoint(lu.solve(v)); };
    auto res = lanczos_max(op, n);
    const Eigen::VectorXcd x = lu.solve(res.ritz);
    const Eigen::VectorXcd r = z * x - h * x - res.ritz;
    const double backward = r.norm() / ((h.norm() + std::abs(z)) * x.norm() + 1.0);
    s.norm = std::sqrt(res.theta);
    s.residual = std::max(backward, res.rel_resid);
  } else {
    Eigen::SparseLU<CSpMat> lu;
    lu.compute(shifted_pencil(*impl_->gen, z));
    if (lu.info() != Eigen::Success)
      throw NearSpectrumError("resolvent factorization failed at beta = " + std::to_string(beta), beta, 1.0);
    const auto& llt = *impl_->w_llt;
    const auto& P = llt.permutationP();
    const auto lower = impl_->l_c.triangularView<Eigen::Lower>();
    // X⁻¹ = C R C⁻¹ with C = Lᵀ P and R = (z𝕄 - 𝕂)⁻¹ 𝕄.
    auto apply_xinv = [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd {
      Eigen::VectorXcd u = lower.adjoint().solve(v);
      u = P.inverse() * u;
      Eigen::VectorXcd r = lu.solve(impl_->mass_c * u);
      return impl_->l_c.adjoint() * (P * r);
    };
    auto apply_xinv_h = [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd {
      Eigen::VectorXcd u = P.inverse() * (impl_->l_c * v);
      Eigen::VectorXcd r = impl_->mass_c * lu.adjoint().solve(u);
      return lower.solve(P * r);
    };
    auto op = [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd { return apply_xinv_h(apply_xinv(v)); };
    auto res = lanczos_max(op, n);
    s.norm = std::sqrt(res.theta);
    s.residual = res.rel_resid;
  }

  if (!std::isfinite(s.norm) || !(s.residual <= kAcceptResidual))
    throw NearSpectrumError("resolvent norm did not converge at beta = " + std::to_string(beta) +
                                " (residual " + std::to_string(s.residual) + ")",
                            beta, s.residual);
  return s;
}

ResolventSample resolvent_norm(const Generator& gen, double beta, NormMethod method) {
  return ResolventEngine(gen, method).norm(beta);
}

std::vector<ResolventSample> sweep_resolvent(const Generator& gen, std::span<const double> betas,
                                             unsigned threads, NormMethod method) {
  const ResolventEngine engine(gen, method);
  std::vector<ResolventSample> out(betas.size());
  auto work = [&](std::size_t i) {
    try {
      out[i] = engine.norm(betas[i]);
    } catch (const NearSpectrumError& e) {
      out[i].beta = betas[i];
      out[i].norm = std::numeric_limits<double>::infinity();
      out[i].residual = e.residual();
      out[i].ok = false;
      out[i].error = e.what();
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, betas.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < betas.size(); ++i) work(i);
    return out;
  }
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < betas.size(); i += threads) work(i);
    });
  return out;  // jthreads join on destruction, before `out` is returned
}

std::vector<double> log_spaced(double lo, double hi, int points) {
  if (points < 1 || !(lo > 0.0) || !(hi >= lo))
    throw ValidationError("log_spaced needs points >= 1 and 0 < lo <= hi");
  std::vector<double> out(static_cast<std::size_t>(points));
  if (points == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < points; ++i) out[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (points - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

GrowthFit fit_growth(std::span<const ResolventSample> samples, double beta_min) {
  std::vector<const ResolventSample*> used;
  for (const auto& s : samples)
    if (s.ok && s.beta >= beta_min && s.beta > 0.0 && std::isfinite(s.norm)) used.push_back(&s);
  if (used.size() < 8)
    throw FitError("growth fit needs >= 8 samples with beta >= " + std::to_string(beta_min) + ", got " +
                   std::to_string(used.size()));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(used.size());
  GrowthFit fit;
  fit.beta_min_used = beta_min;
  fit.samples_used = used.size();
  for (const auto* s : used) {
    const double x = std::log(s->beta), y = std::log(s->norm);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    fit.constant = std::max(fit.constant, s->norm / std::pow(s->beta, 8));
  }
  const double denom = n * sxx - sx * sx;
  if (!(denom > 0.0)) throw FitError("growth fit needs distinct beta values");
  fit.exponent = (n * sxy - sx * sy) / denom;
  fit.envelope_ok = std::all_of(used.begin(), used.end(), [&](const ResolventSample* s) {
    return s->norm <= fit.constant * std::pow(s->beta, 8) * (1.0 + 1e-12);
  });
  return fit;
}

SpectrumReport compute_spectrum(const Generator& gen, SpectrumMethod method, std::span<const cplx> shifts) {
  if (method == SpectrumMethod::dense) return dense_report(symmetrized_generator(gen));

  if (shifts.empty()) throw ValidationError("shift-invert spectrum needs at least one shift");
  SpectrumReport r;
  r.method = SpectrumMethod::shift_invert;
  const Index n = gen.dim();
  const Index m = std::min<Index>(30, n);
  for (const cplx sigma : shifts) {
    Eigen::SparseLU<CSpMat> lu;
    lu.compute(shifted_pencil(gen, sigma));
    if (lu.info() != Eigen::Success)
      throw NearSpectrumError("shift hits the spectrum; retry with a perturbed shift", sigma.imag(),
                              std::numeric_limits<double>::infinity());
    // (A - σ)⁻¹ = (σ𝕄 - 𝕂)⁻¹(-𝕄)
    auto op = [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd { return -lu.solve(cmul(gen.mass, v)); };
    Eigen::VectorXcd start = lanczos_start(n);
    cplx best{};
    double resid = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < 20 && resid > 1e-10; ++restart) {
      Eigen::MatrixXcd V = Eigen::MatrixXcd::Zero(n, m + 1);
      Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
      V.col(0) = start.normalized();
      Index k = 0;
      for (; k < m; ++k) {
        Eigen::VectorXcd w = op(V.col(k));
        for (int pass = 0; pass < 2; ++pass)
          for (Index j = 0; j <= k; ++j) {
            const cplx h = V.col(j).dot(w);
            H(j, k) += h;
            w -= h * V.col(j);
          }
        H(k + 1, k) = w.norm();
        if (std::abs(H(k + 1, k)) < 1e-14) {
          ++k;
          break;
        }
        V.col(k + 1) = w / H(k + 1, k);
      }
      Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H.topLeftCorner(k, k));
      Index arg = 0;
      es.eigenvalues().cwiseAbs().maxCoeff(&arg);
      const cplx mu = es.eigenvalues()[arg];
      best = sigma + 1.0 / mu;
      start = V.leftCols(k) * es.eigenvectors().col(arg);
      start.normalize();
      const Eigen::VectorXcd av = cmul(gen.A, start);
      resid = (av - best * start).norm() / std::max(1.0, std::abs(best));
    }
    if (!(resid <= 1e-8))
      throw NearSpectrumError("shift-invert iteration did not converge", sigma.imag(), resid);
    r.eigenvalues.push_back(best);
  }
  r.eigenvalues = sorted_eigenvalues(Eigen::Map<Eigen::VectorXcd>(r.eigenvalues.data(), static_cast<Index>(r.eigenvalues.size())));
  r.nearest_to_axis = r.eigenvalues.front();
  r.abscissa = r.nearest_to_axis.real();
  return r;
}

SpectrumReport block_spectrum(const Generator& gen, std::span<const Block> blocks) {
  const Eigen::MatrixXd a = symmetrized_generator(gen);
  std::vector<Index> idx;
  for (Block b : blocks)
    for (Index i = 0; i < gen.layout.size(b); ++i) idx.push_back(gen.layout.offset(b) + i);
  std::sort(idx.begin(), idx.end());
  const auto k = static_cast<Index>(idx.size());
  Eigen::MatrixXd sub(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) sub(i, j) = a(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  return dense_report(sub);
}

}  // namespace salab

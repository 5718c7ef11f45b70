#include "salab/operators.hpp"

#include "salab/error.hpp"
#include "text_util.hpp"

#include <Eigen/SparseCholesky>

#include <fstream>
#include <random>

namespace salab {

struct FormSolvers {
  Eigen::SimplicialLDLT<SpMat> chamber;    // M_Ω + S_Ω
  Eigen::SimplicialLDLT<SpMat> dirichlet;  // S_Γ on interior nodes
  Eigen::SimplicialLDLT<SpMat> plate;      // K_plate
  Eigen::SimplicialLDLT<SpMat> robin;      // M_Γ + robin_S
  Eigen::SimplicialLDLT<SpMat> p_gamma;    // M_I + γS_Γ
};

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SpMat diag(const Eigen::VectorXd& d) {
  SpMat m(d.size(), d.size());
  m.reserve(Eigen::VectorXi::Constant(d.size(), 1));
  for (Index i = 0; i < d.size(); ++i) m.insert(i, i) = d[i];
  m.makeCompressed();
  return m;
}

// (F + Fᵀ)/2 is bitwise symmetric because floating-point addition commutes.
SpMat symmetrize(const SpMat& f) {
  SpMat t = f.transpose();
  SpMat s = 0.5 * (f + t);
  s.prune(0.0);
  s.makeCompressed();
  return s;
}

struct TensorForms {
  Eigen::VectorXd mass;
  SpMat stiffness;
};

// Lumped-mass P1 tensor products on a uniform grid, first axis fastest. The
// 1D stiffness (1/h)[1 -1; -1 1] per cell is the ghost-point Neumann closure
// of the three-point Laplacian.
TensorForms tensor_forms(const std::vector<int>& cells, const std::vector<double>& spacing) {
  const auto d = cells.size();
  std::vector<Index> stride(d, 1);
  Index n = 1;
  for (std::size_t a = 0; a < d; ++a) {
    stride[a] = n;
    n *= cells[a] + 1;
  }
  auto w1d = [&](std::size_t a, int i) {
    const double h = spacing[a];
    return (i == 0 || i == cells[a]) ? 0.5 * h : h;
  };

  TensorForms out;
  out.mass.resize(n);
  Triplets trip;
  trip.reserve(static_cast<std::size_t>(n) * (2 * d + 1));
  std::vector<int> idx(d);
  for (Index k = 0; k < n; ++k) {
    Index rem = k;
    for (std::size_t a = 0; a < d; ++a) {
      idx[a] = static_cast<int>(rem % (cells[a] + 1));
      rem /= cells[a] + 1;
    }
    double m = 1.0;
    for (std::size_t a = 0; a < d; ++a) m *= w1d(a, idx[a]);
    out.mass[k] = m;
    for (std::size_t a = 0; a < d; ++a) {
      double transverse = 1.0;
      for (std::size_t b = 0; b < d; ++b)
        if (b != a) transverse *= w1d(b, idx[b]);
      const double c = transverse / spacing[a];
      // Cell to the right of node k along axis a.
      if (idx[a] < cells[a]) {
        const Index r = k + stride[a];
        trip.emplace_back(k, k, c);
        trip.emplace_back(r, r, c);
        trip.emplace_back(k, r, -c);
        trip.emplace_back(r, k, -c);
      }
    }
  }
  out.stiffness.resize(n, n);
  out.stiffness.setFromTriplets(trip.begin(), trip.end());
  out.stiffness = symmetrize(out.stiffness);
  return out;
}

SpMat selection(Index rows, Index cols, const std::vector<Index>& picks) {
  SpMat s(rows, cols);
  Triplets t;
  for (std::size_t i = 0; i < picks.size(); ++i) t.emplace_back(static_cast<Index>(i), picks[i], 1.0);
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

template <class Solver>
void factor(Solver& s, const SpMat& m, const char* name) {
  s.compute(m);
  if (s.info() != Eigen::Success)
    throw AssemblyError(std::string("factorization of ") + name + " failed");
}

void add_block(Triplets& t, const SpMat& m, Index row0, Index col0, double scale = 1.0) {
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it)
      t.emplace_back(row0 + it.row(), col0 + it.col(), scale * it.value());
}

SpMat identity(Index n) {
  SpMat i(n, n);
  i.setIdentity();
  return i;
}

Eigen::VectorXcd mul(const SpMat& m, const Eigen::VectorXcd& v) {
  Eigen::VectorXd re = m * v.real();
  Eigen::VectorXd im = m * v.imag();
  Eigen::VectorXcd out(re.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

void require_dim(const Generator& gen, Index n, const char* what) {
  if (n != gen.dim())
    throw DimensionError(std::string(what) + ": state has length " + std::to_string(n) +
                         ", generator expects " + std::to_string(gen.dim()));
}

}  // namespace

void DiscreteForms::factorize() {
  auto s = std::make_shared<FormSolvers>();
  factor(s->chamber, SpMat(diag(m_omega) + s_omega), "M_omega + S_omega");
  factor(s->dirichlet, s_gamma, "S_gamma");
  factor(s->plate, k_plate, "K_plate");
  factor(s->robin, SpMat(diag(m_gamma) + robin_s), "M_gamma + robin_S");
  factor(s->p_gamma, p_gamma, "P_gamma");
  solvers = std::move(s);
}

Eigen::VectorXd DiscreteForms::apply_a_n(const Eigen::VectorXd& z) const {
  return (m_omega.cwiseProduct(z) + s_omega * z).cwiseQuotient(m_omega);
}
Eigen::VectorXd DiscreteForms::solve_a_n(const Eigen::VectorXd& f) const {
  return solvers->chamber.solve(m_omega.cwiseProduct(f));
}
Eigen::VectorXd DiscreteForms::apply_a_d(const Eigen::VectorXd& w) const {
  return (s_gamma * w).cwiseQuotient(m_interior);
}
Eigen::VectorXd DiscreteForms::apply_plate(const Eigen::VectorXd& w) const {
  return (k_plate * w).cwiseQuotient(m_interior);
}
Eigen::VectorXd DiscreteForms::solve_plate(const Eigen::VectorXd& f) const {
  return solvers->plate.solve(m_interior.cwiseProduct(f));
}
Eigen::VectorXd DiscreteForms::apply_p_gamma(const Eigen::VectorXd& w) const {
  return (p_gamma * w).cwiseQuotient(m_interior);
}
Eigen::VectorXd DiscreteForms::solve_p_gamma(const Eigen::VectorXd& f) const {
  return solvers->p_gamma.solve(m_interior.cwiseProduct(f));
}
Eigen::VectorXd DiscreteForms::apply_a_r(const Eigen::VectorXd& theta) const {
  return (m_gamma.cwiseProduct(theta) + robin_s * theta).cwiseQuotient(m_gamma);
}
Eigen::VectorXd DiscreteForms::solve_a_r(const Eigen::VectorXd& f) const {
  return solvers->robin.solve(m_gamma.cwiseProduct(f));
}

DiscreteForms assemble_forms(const DiscreteGeometry& geometry, const PhysicalParams& params) {
  for (int a = 0; a < geometry.dim; ++a)
    if (geometry.n_cells[a] < 3)
      throw AssemblyError("degenerate grid: axis " + std::to_string(a) + " has fewer than 3 cells");
  params.validate();

  DiscreteForms f;
  f.lambda = params.lambda;
  f.gamma = params.gamma;

  std::vector<int> cells(geometry.n_cells.begin(), geometry.n_cells.begin() + geometry.dim);
  std::vector<double> spacing(geometry.spacing.begin(), geometry.spacing.begin() + geometry.dim);
  auto chamber = tensor_forms(cells, spacing);
  f.m_omega = std::move(chamber.mass);
  f.s_omega = std::move(chamber.stiffness);

  auto face = tensor_forms(geometry.face_cells, geometry.face_spacing);
  f.m_gamma = std::move(face.mass);
  f.s_face = std::move(face.stiffness);

  const Index nf = geometry.face_size();
  f.b_trace = selection(nf, geometry.chamber_size(), geometry.gamma0_nodes);
  f.r_interior = selection(geometry.face_interior_size(), nf, geometry.gamma0_interior);
  f.r_boundary = selection(static_cast<Index>(geometry.dgamma0.size()), nf, geometry.dgamma0);
  f.m_interior = f.r_interior * f.m_gamma;
  f.m_dgamma = geometry.w_dgamma0;

  f.s_gamma = symmetrize(SpMat(f.r_interior * f.s_face * SpMat(f.r_interior.transpose())));
  // On a flat rectangular Γ₀ with w = 0 on ∂Γ₀ the bending form a(w, w)
  // reduces to ‖Δw‖², so K = S M⁻¹ S with the Dirichlet Laplacian.
  Eigen::VectorXd inv_m = f.m_interior.cwiseInverse();
  f.k_plate = symmetrize(SpMat(f.s_gamma * diag(inv_m) * f.s_gamma));
  f.robin_s = symmetrize(
      SpMat(f.s_face + params.lambda * SpMat(f.r_boundary.transpose()) * diag(f.m_dgamma) * f.r_boundary));
  f.p_gamma = symmetrize(SpMat(diag(f.m_interior) + params.gamma * f.s_gamma));
  f.factorize();
  return f;
}

Eigen::VectorXd neumann_lift(const DiscreteForms& forms, const Eigen::VectorXd& g) {
  if (g.size() != forms.face_size()) throw DimensionError("neumann_lift: g must be a face field");
  const Eigen::VectorXd rhs = forms.b_trace.transpose() * forms.m_gamma.cwiseProduct(g);
  Eigen::VectorXd h = forms.solvers->chamber.solve(rhs);
  h += forms.solvers->chamber.solve(rhs - forms.m_omega.cwiseProduct(h) - forms.s_omega * h);
  return h;
}

Eigen::VectorXd dirichlet_lift(const DiscreteForms& forms, const Eigen::VectorXd& h) {
  if (h.size() != forms.boundary_size()) throw DimensionError("dirichlet_lift: h must be a ∂Γ₀ field");
  const Eigen::VectorXd hf = forms.r_boundary.transpose() * h;
  const Eigen::VectorXd rhs = -(forms.r_interior * (forms.s_face * hf));
  const Eigen::VectorXd vi = forms.solvers->dirichlet.solve(rhs);
  return hf + forms.r_interior.transpose() * vi;
}

Eigen::VectorXd green_lift(const DiscreteForms& forms, const Eigen::VectorXd& h) {
  if (h.size() != forms.boundary_size()) throw DimensionError("green_lift: h must be a ∂Γ₀ field");
  // K v = S_I∂ h: the inner Laplacian -Δv is discrete harmonic with boundary
  // value -h, i.e. the ghost moment makes Δv = h on ∂Γ₀.
  const Eigen::VectorXd hf = forms.r_boundary.transpose() * h;
  return forms.solvers->plate.solve(forms.r_interior * (forms.s_face * hf));
}

Eigen::VectorXd normal_derivative(const DiscreteForms& forms, const Eigen::VectorXd& w) {
  if (w.size() != forms.interior_size())
    throw DimensionError("normal_derivative: w must be an interior field");
  const Eigen::VectorXd wf = forms.r_interior.transpose() * w;
  return (forms.r_boundary * (forms.s_face * wf)).cwiseQuotient(forms.m_dgamma);
}

Index StateLayout::size(Block b) const {
  switch (b) {
    case Block::z1:
    case Block::z2:
      return chamber;
    case Block::w1:
    case Block::w2:
      return interior;
    case Block::theta:
      return face;
  }
  return 0;
}

Index StateLayout::offset(Block b) const {
  switch (b) {
    case Block::z1:
      return 0;
    case Block::z2:
      return chamber;
    case Block::w1:
      return 2 * chamber;
    case Block::w2:
      return 2 * chamber + interior;
    case Block::theta:
      return 2 * chamber + 2 * interior;
  }
  return 0;
}

Generator assemble_generator(std::shared_ptr<const DiscreteForms> forms_ptr, const PhysicalParams& params) {
  params.validate();
  const DiscreteForms& f = *forms_ptr;
  if (f.lambda != params.lambda || f.gamma != params.gamma)
    throw AssemblyError("forms were assembled for different lambda/gamma");

  Generator gen;
  gen.params = params;
  gen.forms = forms_ptr;
  gen.layout = StateLayout{f.chamber_size(), f.interior_size(), f.face_size()};
  const auto& L = gen.layout;
  const Index n = L.dim();
  const Index oz1 = L.offset(Block::z1), oz2 = L.offset(Block::z2), ow1 = L.offset(Block::w1),
              ow2 = L.offset(Block::w2), oth = L.offset(Block::theta);
  const double alpha = params.alpha;

  const SpMat a_n_form = diag(f.m_omega) + f.s_omega;
  const SpMat m_i = diag(f.m_interior);
  // Γ₀ flux into the chamber and chamber velocity trace onto the plate.
  const SpMat inject = SpMat(f.b_trace.transpose()) * SpMat(f.r_interior.transpose()) * m_i;
  const SpMat trace = m_i * f.r_interior * f.b_trace;
  // α S_II θ_I: the αΔθ term together with the moment condition on ∂Γ₀.
  const SpMat heat_to_plate = f.s_gamma * f.r_interior;
  const SpMat plate_to_heat = SpMat(f.r_interior.transpose()) * f.s_gamma;
  const SpMat heat_form = diag(f.m_gamma) + f.robin_s;

  Triplets kt;
  add_block(kt, identity(L.chamber), oz1, oz2);
  add_block(kt, a_n_form, oz2, oz1, -1.0);
  add_block(kt, inject, oz2, ow2);
  add_block(kt, identity(L.interior), ow1, ow2);
  add_block(kt, f.k_plate, ow2, ow1, -1.0);
  add_block(kt, trace, ow2, oz2, -1.0);
  add_block(kt, heat_to_plate, ow2, oth, alpha);
  add_block(kt, plate_to_heat, oth, ow2, -alpha);
  add_block(kt, heat_form, oth, oth, -1.0);
  gen.stiffness.resize(n, n);
  gen.stiffness.setFromTriplets(kt.begin(), kt.end());
  gen.stiffness.prune(0.0);

  Triplets mt;
  add_block(mt, identity(L.chamber), oz1, oz1);
  add_block(mt, diag(f.m_omega), oz2, oz2);
  add_block(mt, identity(L.interior), ow1, ow1);
  add_block(mt, f.p_gamma, ow2, ow2);
  add_block(mt, diag(f.m_gamma), oth, oth);
  gen.mass.resize(n, n);
  gen.mass.setFromTriplets(mt.begin(), mt.end());

  Triplets wt;
  add_block(wt, a_n_form, oz1, oz1);
  add_block(wt, diag(f.m_omega), oz2, oz2);
  add_block(wt, f.k_plate, ow1, ow1);
  add_block(wt, f.p_gamma, ow2, ow2);
  add_block(wt, diag(f.m_gamma), oth, oth);
  gen.W.resize(n, n);
  gen.W.setFromTriplets(wt.begin(), wt.end());

  // A = 𝕄⁻¹𝕂 row block by row block. Diagonal blocks divide exactly; the
  // plate velocity rows need P_γ⁻¹, which is diagonal only for γ = 0.
  Eigen::VectorXd row_scale = Eigen::VectorXd::Ones(n);
  row_scale.segment(oz2, L.chamber) = f.m_omega.cwiseInverse();
  row_scale.segment(oth, L.face) = f.m_gamma.cwiseInverse();
  if (params.gamma == 0.0) row_scale.segment(ow2, L.interior) = f.m_interior.cwiseInverse();

  SpMat scaled = diag(row_scale) * gen.stiffness;
  if (params.gamma == 0.0) {
    gen.A = scaled;
  } else {
    const Eigen::MatrixXd p_inv = Eigen::MatrixXd(f.p_gamma).inverse();
    SpMat rows = gen.stiffness.middleRows(ow2, L.interior);
    Eigen::MatrixXd plate_rows = p_inv * Eigen::MatrixXd(rows);
    Triplets at;
    for (Index k = 0; k < scaled.outerSize(); ++k)
      for (SpMat::InnerIterator it(scaled, k); it; ++it)
        if (it.row() < ow2 || it.row() >= ow2 + L.interior) at.emplace_back(it.row(), it.col(), it.value());
    for (Index c = 0; c < n; ++c)
      for (Index r = 0; r < L.interior; ++r)
        if (plate_rows(r, c) != 0.0) at.emplace_back(ow2 + r, c, plate_rows(r, c));
    gen.A.resize(n, n);
    gen.A.setFromTriplets(at.begin(), at.end());
  }
  gen.A.makeCompressed();
  return gen;
}

Generator build_generator(const ModelConfig& config) {
  auto geometry = build_geometry(config);
  auto forms = std::make_shared<const DiscreteForms>(assemble_forms(geometry, config.params));
  return assemble_generator(std::move(forms), config.params);
}

Eigen::VectorXd apply_generator(const Generator& gen, const Eigen::VectorXd& phi) {
  require_dim(gen, phi.size(), "apply_generator");
  return gen.A * phi;
}

Eigen::VectorXcd apply_generator(const Generator& gen, const Eigen::VectorXcd& phi) {
  require_dim(gen, phi.size(), "apply_generator");
  return mul(gen.A, phi);
}

cplx energy_inner_product(const Generator& gen, const Eigen::VectorXcd& phi, const Eigen::VectorXcd& psi) {
  require_dim(gen, phi.size(), "energy_inner_product");
  require_dim(gen, psi.size(), "energy_inner_product");
  return psi.dot(mul(gen.W, phi));
}

double energy_norm(const Generator& gen, const Eigen::VectorXd& phi) {
  require_dim(gen, phi.size(), "energy_norm");
  return std::sqrt(std::max(0.0, phi.dot(gen.W * phi)));
}

double energy_norm(const Generator& gen, const Eigen::VectorXcd& phi) {
  return std::sqrt(std::max(0.0, energy_inner_product(gen, phi, phi).real()));
}

std::array<cplx, 7> energy_terms(const Generator& gen, const Eigen::VectorXcd& phi,
                                 const Eigen::VectorXcd& psi) {
  require_dim(gen, phi.size(), "energy_terms");
  require_dim(gen, psi.size(), "energy_terms");
  const auto& f = *gen.forms;
  const auto& L = gen.layout;
  auto b = [&L](const Eigen::VectorXcd& v, Block blk) -> Eigen::VectorXcd { return L.block(v, blk); };
  auto m = [](const Eigen::VectorXd& d, const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
    return d.cast<cplx>().cwiseProduct(x);
  };
  return {
      b(psi, Block::z1).dot(mul(f.s_omega, b(phi, Block::z1))),
      b(psi, Block::z1).dot(m(f.m_omega, b(phi, Block::z1))),
      b(psi, Block::z2).dot(m(f.m_omega, b(phi, Block::z2))),
      b(psi, Block::w1).dot(mul(f.k_plate, b(phi, Block::w1))),
      b(psi, Block::w2).dot(m(f.m_interior, b(phi, Block::w2))),
      f.gamma * b(psi, Block::w2).dot(mul(f.s_gamma, b(phi, Block::w2))),
      b(psi, Block::theta).dot(m(f.m_gamma, b(phi, Block::theta))),
  };
}

ThermalDissipation thermal_dissipation_terms(const Generator& gen, const Eigen::VectorXcd& phi) {
  require_dim(gen, phi.size(), "thermal_dissipation");
  const auto& f = *gen.forms;
  const Eigen::VectorXcd theta = gen.layout.block(phi, Block::theta);
  const Eigen::VectorXcd tb = mul(f.r_boundary, theta);
  ThermalDissipation d;
  d.gradient = theta.dot(mul(f.s_face, theta)).real();
  d.mass = theta.dot(f.m_gamma.cast<cplx>().cwiseProduct(theta)).real();
  d.boundary = f.lambda * tb.dot(f.m_dgamma.cast<cplx>().cwiseProduct(tb)).real();
  return d;
}

double thermal_dissipation(const Generator& gen, const Eigen::VectorXcd& phi) {
  return thermal_dissipation_terms(gen, phi).total();
}

double thermal_dissipation(const Generator& gen, const Eigen::VectorXd& phi) {
  return thermal_dissipation_terms(gen, phi.cast<cplx>()).total();
}

Eigen::VectorXd apply_explicit_inverse(const Generator& gen, const Eigen::VectorXd& phi_star,
                                       InverseAblation ablation) {
  require_dim(gen, phi_star.size(), "apply_explicit_inverse");
  const auto& f = *gen.forms;
  const auto& L = gen.layout;
  const double alpha = gen.params.alpha;
  const Eigen::VectorXd z1s = L.block(phi_star, Block::z1);
  const Eigen::VectorXd z2s = L.block(phi_star, Block::z2);
  const Eigen::VectorXd w1s = L.block(phi_star, Block::w1);
  const Eigen::VectorXd w2s = L.block(phi_star, Block::w2);
  const Eigen::VectorXd ths = L.block(phi_star, Block::theta);

  auto to_face = [&f](const Eigen::VectorXd& interior) -> Eigen::VectorXd {
    return f.r_interior.transpose() * interior;
  };
  // A_D of an interior field seen as a face field (zero on ∂Γ₀).
  auto a_d_face = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd { return to_face(f.apply_a_d(w)); };
  // Å⁻¹A_D(I - Dγ₀)θ - Gγ₀θ.
  auto bracket = [&](const Eigen::VectorXd& theta) -> Eigen::VectorXd {
    const Eigen::VectorXd trace = f.r_boundary * theta;
    const Eigen::VectorXd zero_trace = theta - dirichlet_lift(f, trace);
    return f.solve_plate(f.apply_a_d(f.r_interior * zero_trace)) - green_lift(f, trace);
  };

  Eigen::VectorXd out(L.dim());
  L.block(out, Block::z1) = neumann_lift(f, to_face(w1s)) - f.solve_a_n(z2s);
  L.block(out, Block::z2) = z1s;

  const Eigen::VectorXd psi1 = -alpha * alpha * bracket(f.solve_a_r(a_d_face(w1s)));
  const Eigen::VectorXd psi2 = -alpha * bracket(f.solve_a_r(ths));
  Eigen::VectorXd w1 = -f.solve_plate(f.r_interior * (f.b_trace * z1s)) -
                       f.solve_plate(f.apply_p_gamma(w2s)) + psi2;
  if (ablation != InverseAblation::drop_psi1) w1 += psi1;
  L.block(out, Block::w1) = w1;
  L.block(out, Block::w2) = w1s;
  L.block(out, Block::theta) = -alpha * f.solve_a_r(a_d_face(w1s)) - f.solve_a_r(ths);
  return out;
}

Eigen::VectorXcd apply_explicit_inverse(const Generator& gen, const Eigen::VectorXcd& phi_star,
                                        InverseAblation ablation) {
  const Eigen::VectorXd re = apply_explicit_inverse(gen, Eigen::VectorXd(phi_star.real()), ablation);
  const Eigen::VectorXd im = apply_explicit_inverse(gen, Eigen::VectorXd(phi_star.imag()), ablation);
  Eigen::VectorXcd out(re.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

Eigen::VectorXd random_real_state(const StateLayout& layout, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(layout.dim());
  for (Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  return v;
}

Eigen::VectorXcd random_complex_state(const StateLayout& layout, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXcd v(layout.dim());
  for (Index i = 0; i < v.size(); ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    v[i] = cplx(re, im);
  }
  return v;
}

void write_coo(const std::filesystem::path& path, const SpMat& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "# rows=" << m.rows() << " cols=" << m.cols() << " nnz=" << m.nonZeros() << "\n";
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << detail::format_double(it.value()) << '\n';
}

}  // namespace salab

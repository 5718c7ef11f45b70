#include "salab/salab.h"

#include "salab/dynamics.hpp"
#include "salab/error.hpp"
#include "salab/model.hpp"
#include "salab/operators.hpp"
#include "salab/spectral.hpp"
#include "salab/verify.hpp"

#include <algorithm>
#include <cstring>
#include <exception>
#include <filesystem>
#include <new>
#include <string>

struct salab_config {
  salab::ModelConfig config;
};

struct salab_model {
  salab::Generator gen;
};

struct salab_trace {
  salab::DecayTrace trace;
};

namespace {

thread_local std::string g_last_error;

salab_status fail(salab_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
salab_status guard(F&& body) {
  try {
    body();
    return SALAB_OK;
  } catch (const salab::NearSpectrumError& e) {
    return fail(SALAB_ERR_NEAR_SPECTRUM, e.what());
  } catch (const salab::StepError& e) {
    return fail(SALAB_ERR_STEP, e.what());
  } catch (const salab::ConfigError& e) {
    return fail(SALAB_ERR_CONFIG, e.what());
  } catch (const salab::ValidationError& e) {
    return fail(SALAB_ERR_VALIDATION, e.what());
  } catch (const salab::AssemblyError& e) {
    return fail(SALAB_ERR_ASSEMBLY, e.what());
  } catch (const salab::DimensionError& e) {
    return fail(SALAB_ERR_DIMENSION, e.what());
  } catch (const salab::FitError& e) {
    return fail(SALAB_ERR_FIT, e.what());
  } catch (const salab::IoError& e) {
    return fail(SALAB_ERR_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(SALAB_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SALAB_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SALAB_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SALAB_ERR_INTERNAL, "unknown error");
  }
}

#define SALAB_REQUIRE(cond, what) \
  if (!(cond)) return fail(SALAB_ERR_ARGUMENT, what)

salab_status copy_out(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buf || cap < s.size() + 1) return fail(SALAB_ERR_BUFFER, "output buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return SALAB_OK;
}

void fill_report(const salab::CheckReport& r, salab_check_report* out) {
  std::memset(out, 0, sizeof *out);
  std::strncpy(out->name, r.name.c_str(), sizeof out->name - 1);
  out->trials = r.trials;
  out->worst_residual = r.worst_residual;
  out->tolerance = r.tolerance;
  out->passed = r.passed ? 1 : 0;
}

Eigen::Map<const Eigen::VectorXd> state_in(const salab_model* m, const double* p) {
  return Eigen::Map<const Eigen::VectorXd>(p, m->gen.dim());
}

salab::GeometryReport geometry_report(const salab::ModelConfig& c, salab::DiscreteGeometry& g) {
  g = salab::build_geometry(c);
  return salab::check_geometry(g, salab::default_x0_candidates(g));
}

}  // namespace

extern "C" {

const char* salab_last_error(void) { return g_last_error.c_str(); }

const char* salab_status_name(salab_status status) {
  switch (status) {
    case SALAB_OK: return "ok";
    case SALAB_ERR_CONFIG: return "configuration error";
    case SALAB_ERR_VALIDATION: return "validation error";
    case SALAB_ERR_ASSEMBLY: return "assembly error";
    case SALAB_ERR_DIMENSION: return "dimension error";
    case SALAB_ERR_FIT: return "fit error";
    case SALAB_ERR_NEAR_SPECTRUM: return "near-spectrum error";
    case SALAB_ERR_STEP: return "step error";
    case SALAB_ERR_IO: return "i/o error";
    case SALAB_ERR_ARGUMENT: return "invalid argument";
    case SALAB_ERR_BUFFER: return "buffer too small";
    case SALAB_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* salab_version(void) { return "0.1.0"; }

salab_status salab_config_default(int dim, salab_config** out) {
  SALAB_REQUIRE(out, "null output handle");
  return guard([&] {
    if (dim != 2 && dim != 3) throw salab::ValidationError("dim must be 2 or 3");
    *out = new salab_config{salab::default_config(dim)};
  });
}

salab_status salab_config_load(const char* path, salab_config** out) {
  SALAB_REQUIRE(path && out, "null argument");
  return guard([&] { *out = new salab_config{salab::load_config(path)}; });
}

salab_status salab_config_parse(const char* text, salab_config** out) {
  SALAB_REQUIRE(text && out, "null argument");
  return guard([&] { *out = new salab_config{salab::parse_config(text)}; });
}

salab_status salab_config_copy(const salab_config* config, salab_config** out) {
  SALAB_REQUIRE(config && out, "null argument");
  return guard([&] { *out = new salab_config{config->config}; });
}

void salab_config_free(salab_config* config) { delete config; }

salab_status salab_config_set(salab_config* config, const char* key, const char* value) {
  SALAB_REQUIRE(config && key && value, "null argument");
  return guard([&] {
    salab::ModelConfig next = config->config;
    next.set(key, value);
    next.validate();
    config->config = std::move(next);
  });
}

salab_status salab_config_get(const salab_config* config, const char* key, char* buf, size_t cap,
                              size_t* needed) {
  SALAB_REQUIRE(config && key, "null argument");
  const std::string k(key);
  for (const auto& line : config->config.to_lines()) {
    const auto eq = line.find(" = ");
    if (line.compare(0, eq, k) == 0 && eq == k.size()) return copy_out(line.substr(eq + 3), buf, cap, needed);
  }
  return fail(SALAB_ERR_CONFIG, "configuration key '" + k + "' is not set");
}

salab_status salab_config_text(const salab_config* config, char* buf, size_t cap, size_t* needed) {
  SALAB_REQUIRE(config, "null argument");
  std::string text;
  for (const auto& line : config->config.to_lines()) text += line + "\n";
  return copy_out(text, buf, cap, needed);
}

salab_status salab_model_build(const salab_config* config, salab_model** out) {
  SALAB_REQUIRE(config && out, "null argument");
  return guard([&] { *out = new salab_model{salab::build_generator(config->config)}; });
}

void salab_model_free(salab_model* model) { delete model; }

size_t salab_model_dim(const salab_model* model) { return model ? static_cast<size_t>(model->gen.dim()) : 0; }

void salab_model_layout(const salab_model* model, size_t* chamber, size_t* interior, size_t* face) {
  if (!model) return;
  if (chamber) *chamber = static_cast<size_t>(model->gen.layout.chamber);
  if (interior) *interior = static_cast<size_t>(model->gen.layout.interior);
  if (face) *face = static_cast<size_t>(model->gen.layout.face);
}

salab_status salab_model_export(const salab_model* model, const char* which, const char* path) {
  SALAB_REQUIRE(model && which && path, "null argument");
  const std::string w(which);
  const salab::SpMat* m = w == "A" ? &model->gen.A
                          : w == "W" ? &model->gen.W
                          : w == "K" ? &model->gen.stiffness
                          : w == "M" ? &model->gen.mass
                                     : nullptr;
  SALAB_REQUIRE(m, "matrix name must be A, W, K or M");
  return guard([&] { salab::write_coo(path, *m); });
}

salab_status salab_model_apply(const salab_model* model, const double* phi, double* out) {
  SALAB_REQUIRE(model && phi && out, "null argument");
  return guard([&] {
    const Eigen::VectorXd r = salab::apply_generator(model->gen, Eigen::VectorXd(state_in(model, phi)));
    std::copy(r.data(), r.data() + r.size(), out);
  });
}

salab_status salab_model_energy_norm(const salab_model* model, const double* phi, double* out) {
  SALAB_REQUIRE(model && phi && out, "null argument");
  return guard([&] { *out = salab::energy_norm(model->gen, Eigen::VectorXd(state_in(model, phi))); });
}

salab_status salab_check_dissipation(const salab_model* model, int trials, uint64_t seed, salab_check_report* out) {
  SALAB_REQUIRE(model && out, "null argument");
  return guard([&] { fill_report(salab::check_dissipation_identity(model->gen, trials, seed), out); });
}

salab_status salab_check_trace_adjoints(const salab_model* model, int trials, uint64_t seed,
                                        salab_check_report* out) {
  SALAB_REQUIRE(model && out, "null argument");
  return guard([&] { fill_report(salab::check_trace_adjoints(*model->gen.forms, trials, seed), out); });
}

salab_status salab_check_inverse(const salab_model* model, int trials, uint64_t seed, salab_check_report* out) {
  SALAB_REQUIRE(model && out, "null argument");
  return guard([&] { fill_report(salab::check_inverse(model->gen, trials, seed), out); });
}

salab_status salab_check_energy_balance(const salab_trace* trace, salab_check_report* out) {
  SALAB_REQUIRE(trace && out, "null argument");
  return guard([&] { fill_report(salab::check_energy_balance(trace->trace), out); });
}

salab_status salab_spectrum_dense(const salab_model* model, double* re, double* im, double* abscissa) {
  SALAB_REQUIRE(model && re && im, "null argument");
  return guard([&] {
    const auto r = salab::compute_spectrum(model->gen, salab::SpectrumMethod::dense);
    for (std::size_t i = 0; i < r.eigenvalues.size(); ++i) {
      re[i] = r.eigenvalues[i].real();
      im[i] = r.eigenvalues[i].imag();
    }
    if (abscissa) *abscissa = r.abscissa;
  });
}

salab_status salab_spectrum_shift_invert(const salab_model* model, const double* shift_re, const double* shift_im,
                                         size_t count, double* re, double* im, double* abscissa) {
  SALAB_REQUIRE(model && shift_re && shift_im && re && im, "null argument");
  SALAB_REQUIRE(count > 0, "at least one shift is required");
  return guard([&] {
    std::vector<salab::cplx> shifts(count);
    for (size_t i = 0; i < count; ++i) shifts[i] = {shift_re[i], shift_im[i]};
    const auto r = salab::compute_spectrum(model->gen, salab::SpectrumMethod::shift_invert, shifts);
    for (std::size_t i = 0; i < r.eigenvalues.size(); ++i) {
      re[i] = r.eigenvalues[i].real();
      im[i] = r.eigenvalues[i].imag();
    }
    if (abscissa) *abscissa = r.abscissa;
  });
}

salab_status salab_log_spaced(double lo, double hi, int points, double* out) {
  SALAB_REQUIRE(out, "null argument");
  return guard([&] {
    const auto v = salab::log_spaced(lo, hi, points);
    std::copy(v.begin(), v.end(), out);
  });
}

salab_status salab_resolvent_sweep(const salab_model* model, const double* betas, size_t count, unsigned threads,
                                   salab_norm_method method, salab_resolvent_sample* out) {
  SALAB_REQUIRE(model && (betas || count == 0) && (out || count == 0), "null argument");
  salab::NormMethod m;
  switch (method) {
    case SALAB_NORM_AUTO: m = salab::NormMethod::automatic; break;
    case SALAB_NORM_HESSENBERG: m = salab::NormMethod::hessenberg_lanczos; break;
    case SALAB_NORM_DENSE_SVD: m = salab::NormMethod::dense_svd; break;
    case SALAB_NORM_SPARSE: m = salab::NormMethod::sparse_iterative; break;
    default: return fail(SALAB_ERR_ARGUMENT, "unknown resolvent norm method");
  }
  return guard([&] {
    const auto samples = salab::sweep_resolvent(model->gen, std::span<const double>(betas, count), threads, m);
    for (size_t i = 0; i < count; ++i)
      out[i] = salab_resolvent_sample{samples[i].beta, samples[i].norm, samples[i].residual, samples[i].ok ? 1 : 0};
  });
}

salab_status salab_fit_growth(const salab_resolvent_sample* samples, size_t count, double beta_min,
                              salab_growth_fit* out) {
  SALAB_REQUIRE((samples || count == 0) && out, "null argument");
  return guard([&] {
    std::vector<salab::ResolventSample> v(count);
    for (size_t i = 0; i < count; ++i) {
      v[i].beta = samples[i].beta;
      v[i].norm = samples[i].norm;
      v[i].residual = samples[i].residual;
      v[i].ok = samples[i].ok != 0;
    }
    const auto f = salab::fit_growth(v, beta_min);
    *out = salab_growth_fit{f.exponent, f.constant, f.beta_min_used, f.envelope_ok ? 1 : 0, f.samples_used};
  });
}

salab_status salab_random_state(const salab_model* model, uint64_t seed, double* phi) {
  SALAB_REQUIRE(model && phi, "null argument");
  return guard([&] {
    const auto v = salab::random_real_state(model->gen.layout, seed);
    std::copy(v.data(), v.data() + v.size(), phi);
  });
}

salab_status salab_classical_data(const salab_model* model, uint64_t seed, double* phi0, double* graph_norm) {
  SALAB_REQUIRE(model && phi0, "null argument");
  return guard([&] {
    const auto [v, gn] = salab::make_classical_data(model->gen, seed);
    std::copy(v.data(), v.data() + v.size(), phi0);
    if (graph_norm) *graph_norm = gn;
  });
}

salab_status salab_simulate(const salab_model* model, const double* phi0, double t_end, double dt, int sample_every,
                            salab_trace** out) {
  SALAB_REQUIRE(model && phi0 && out, "null argument");
  return guard([&] {
    *out = new salab_trace{
        salab::simulate(model->gen, Eigen::VectorXd(state_in(model, phi0)), t_end, dt, sample_every)};
  });
}

void salab_trace_free(salab_trace* trace) { delete trace; }

size_t salab_trace_length(const salab_trace* trace) { return trace ? trace->trace.times.size() : 0; }

salab_status salab_trace_sample(const salab_trace* trace, size_t k, double* t, double* energy, double* dissipated) {
  SALAB_REQUIRE(trace, "null argument");
  SALAB_REQUIRE(k < trace->trace.times.size(), "sample index out of range");
  if (t) *t = trace->trace.times[k];
  if (energy) *energy = trace->trace.energies[k];
  if (dissipated) *dissipated = trace->trace.dissipated[k];
  return SALAB_OK;
}

double salab_trace_graph_norm0(const salab_trace* trace) { return trace ? trace->trace.graph_norm0 : 0.0; }

double salab_trace_dt(const salab_trace* trace) { return trace ? trace->trace.dt : 0.0; }

salab_status salab_fit_decay(const salab_trace* trace, double window_begin, double window_end,
                             salab_decay_fit* out) {
  SALAB_REQUIRE(trace && out, "null argument");
  return guard([&] {
    const auto f = salab::fit_decay(trace->trace, window_begin, window_end);
    *out = salab_decay_fit{f.M, f.sup_ratio, f.slope, f.window_begin, f.window_end, f.samples_used};
  });
}

salab_status salab_geometry_check(const salab_config* config, salab_geometry_report* out) {
  SALAB_REQUIRE(config && out, "null argument");
  return guard([&] {
    salab::DiscreteGeometry g;
    const auto r = geometry_report(config->config, g);
    std::memset(out, 0, sizeof *out);
    out->dim = g.dim;
    out->gamma1_convex = r.gamma1_convex ? 1 : 0;
    out->satisfied = r.satisfied ? 1 : 0;
    out->max_flux = r.max_flux;
    for (Eigen::Index a = 0; a < r.best_x0.size() && a < 3; ++a) out->best_x0[a] = r.best_x0[a];
    out->gamma1_nodes = g.gamma1_nodes.size();
    out->candidates = r.candidate_flux.size();
  });
}

salab_status salab_geometry_nodes(const salab_config* config, double* buf, size_t cap_rows, size_t* rows) {
  SALAB_REQUIRE(config && rows, "null argument");
  salab::DiscreteGeometry g;
  salab::GeometryReport r;
  const salab_status s = guard([&] { r = geometry_report(config->config, g); });
  if (s != SALAB_OK) return s;
  size_t n = 0;
  for (const auto& f : g.gamma1_faces) n += f.nodes.size();
  *rows = n;
  if (!buf || cap_rows < n) return fail(SALAB_ERR_BUFFER, "output buffer too small");
  size_t row = 0;
  for (const auto& f : g.gamma1_faces)
    for (const auto node : f.nodes) {
      double* out = buf + 7 * row++;
      std::fill(out, out + 7, 0.0);
      double flux = 0.0;
      for (int a = 0; a < g.dim; ++a) {
        out[a] = g.coords(a, node);
        out[3 + a] = f.normal[a];
        flux += (g.coords(a, node) - r.best_x0[a]) * f.normal[a];
      }
      out[6] = flux;
    }
  return SALAB_OK;
}

}  // extern "C"

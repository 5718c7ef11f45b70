// Command line front end. Talks to the library only through salab.h.

#include "salab/salab.h"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Failure {
  int code;
  std::string message;
};

void check(salab_status s, const std::string& context) {
  if (s != SALAB_OK) {
    const int code = (s == SALAB_ERR_CONFIG || s == SALAB_ERR_VALIDATION || s == SALAB_ERR_ARGUMENT) ? 2 : 1;
    throw Failure{code, context + ": " + salab_last_error()};
  }
}

struct ConfigDeleter {
  void operator()(salab_config* c) const { salab_config_free(c); }
};
struct ModelDeleter {
  void operator()(salab_model* m) const { salab_model_free(m); }
};
struct TraceDeleter {
  void operator()(salab_trace* t) const { salab_trace_free(t); }
};
using ConfigPtr = std::unique_ptr<salab_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<salab_model, ModelDeleter>;
using TracePtr = std::unique_ptr<salab_trace, TraceDeleter>;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Options {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::optional<long long> seed;
  std::optional<double> beta_min, beta_max, fit_beta_min, dt, t_end;
  std::optional<int> points, trials, sample_every;
  std::optional<std::string> window, mode, shifts;
  unsigned threads = 0;
  std::string norm_method = "auto";
};

std::optional<std::string> get(const salab_config* c, const std::string& key) {
  size_t needed = 0;
  if (salab_config_get(c, key.c_str(), nullptr, 0, &needed) == SALAB_ERR_CONFIG) return std::nullopt;
  std::string value(needed, '\0');
  check(salab_config_get(c, key.c_str(), value.data(), value.size(), &needed), "reading '" + key + "'");
  value.resize(needed - 1);
  return value;
}

void set(salab_config* c, const std::string& key, const std::string& value) {
  check(salab_config_set(c, key.c_str(), value.c_str()), "setting '" + key + "'");
}

void set_default(salab_config* c, const std::string& key, const std::string& value) {
  if (!get(c, key)) set(c, key, value);
}

double number(const salab_config* c, const std::string& key) {
  const auto v = get(c, key);
  if (!v) throw Failure{2, "configuration key '" + key + "' is not set"};
  char* end = nullptr;
  const double d = std::strtod(v->c_str(), &end);
  if (end == v->c_str() || *end != '\0') throw Failure{2, "configuration key '" + key + "' is not a number"};
  return d;
}

std::vector<double> numbers(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double d = std::strtod(item.c_str(), &end);
    while (end && (*end == ' ' || *end == '\t')) ++end;
    if (end == item.c_str() || *end != '\0') throw Failure{2, "configuration key '" + key + "' must be a number list"};
    out.push_back(d);
  }
  return out;
}

// File values, then --set in order, then the dedicated flags.
ConfigPtr resolve_config(const Options& o) {
  salab_config* raw = nullptr;
  if (o.config_path.empty())
    check(salab_config_default(2, &raw), "default configuration");
  else
    check(salab_config_load(o.config_path.c_str(), &raw), "loading configuration");
  ConfigPtr c(raw);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Failure{2, "--set expects key=value, got '" + kv + "'"};
    set(c.get(), kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) set(c.get(), "seed", std::to_string(*o.seed));
  if (o.beta_min) set(c.get(), "beta_min", fmt(*o.beta_min));
  if (o.beta_max) set(c.get(), "beta_max", fmt(*o.beta_max));
  if (o.fit_beta_min) set(c.get(), "fit_beta_min", fmt(*o.fit_beta_min));
  if (o.points) set(c.get(), "points", std::to_string(*o.points));
  if (o.trials) set(c.get(), "trials", std::to_string(*o.trials));
  if (o.dt) set(c.get(), "dt", fmt(*o.dt));
  if (o.t_end) set(c.get(), "t_end", fmt(*o.t_end));
  if (o.sample_every) set(c.get(), "sample_every", std::to_string(*o.sample_every));
  if (o.window) set(c.get(), "window", *o.window);
  if (o.mode) set(c.get(), "mode", *o.mode);
  if (o.shifts) set(c.get(), "shifts", *o.shifts);
  set_default(c.get(), "seed", "1");
  return c;
}

ModelPtr build(const salab_config* c) {
  salab_model* m = nullptr;
  check(salab_model_build(c, &m), "building model");
  return ModelPtr(m);
}

fs::path output_dir(const Options& o) {
  fs::path dir = o.out_dir;
  if (dir.empty()) {
    const char* env = std::getenv("SALAB_OUT_DIR");
    dir = env && *env ? env : ".";
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{1, "cannot create output directory '" + dir.string() + "': " + ec.message()};
  return dir;
}

std::ofstream open_artifact(const fs::path& path, const salab_config* c) {
  std::ofstream out(path);
  if (!out) throw Failure{1, "cannot write '" + path.string() + "'"};
  size_t needed = 0;
  salab_config_text(c, nullptr, 0, &needed);
  std::string text(needed, '\0');
  check(salab_config_text(c, text.data(), text.size(), &needed), "formatting configuration");
  text.resize(needed - 1);
  out << "# --- config ---\n";
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out << "# " << line << "\n";
  out << "# --- end config ---\n";
  return out;
}

std::string report_line(const salab_check_report& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "CHECK %s: %s worst=%.6e tol=%.6e trials=%d", r.name, r.passed ? "PASS" : "FAIL",
                r.worst_residual, r.tolerance, r.trials);
  return buf;
}

std::vector<double> classical_state(const salab_model* m, long long seed, double* graph_norm) {
  std::vector<double> phi(salab_model_dim(m));
  check(salab_classical_data(m, static_cast<uint64_t>(seed), phi.data(), graph_norm), "classical data");
  return phi;
}

TracePtr run_simulation(const salab_model* m, const salab_config* c, const std::vector<double>& phi0) {
  salab_trace* t = nullptr;
  check(salab_simulate(m, phi0.data(), number(c, "t_end"), number(c, "dt"),
                       static_cast<int>(number(c, "sample_every")), &t),
        "simulation");
  return TracePtr(t);
}

int cmd_check(const Options& o) {
  ConfigPtr c = resolve_config(o);
  set_default(c.get(), "dt", "0.01");
  set_default(c.get(), "t_end", "100");
  set_default(c.get(), "sample_every", "10");
  ModelPtr m = build(c.get());
  const auto seed = static_cast<uint64_t>(number(c.get(), "seed"));
  const auto trials = get(c.get(), "trials");
  auto count = [&](int fallback) { return trials ? static_cast<int>(number(c.get(), "trials")) : fallback; };

  std::vector<salab_check_report> reports(4);
  check(salab_check_dissipation(m.get(), count(200), seed, &reports[0]), "dissipation check");
  check(salab_check_trace_adjoints(m.get(), count(100), seed, &reports[1]), "trace adjoint check");
  check(salab_check_inverse(m.get(), count(50), seed, &reports[2]), "inverse check");
  const auto phi0 = classical_state(m.get(), static_cast<long long>(seed), nullptr);
  TracePtr trace = run_simulation(m.get(), c.get(), phi0);
  check(salab_check_energy_balance(trace.get(), &reports[3]), "energy balance check");

  auto out = open_artifact(output_dir(o) / "check.csv", c.get());
  out << "name,passed,worst_residual,tolerance,trials\n";
  bool ok = true;
  for (const auto& r : reports) {
    out << r.name << ',' << (r.passed ? 1 : 0) << ',' << fmt(r.worst_residual) << ',' << fmt(r.tolerance) << ','
        << r.trials << '\n';
    std::cout << report_line(r) << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

int cmd_spectrum(const Options& o) {
  ConfigPtr c = resolve_config(o);
  set_default(c.get(), "mode", "dense");
  ModelPtr m = build(c.get());
  const std::string mode = *get(c.get(), "mode");
  std::vector<double> re, im;
  double abscissa = 0.0;
  if (mode == "dense") {
    re.resize(salab_model_dim(m.get()));
    im.resize(re.size());
    check(salab_spectrum_dense(m.get(), re.data(), im.data(), &abscissa), "dense spectrum");
  } else if (mode == "shift_invert") {
    const auto s = get(c.get(), "shifts");
    if (!s) throw Failure{2, "shift_invert mode needs 'shifts' (imaginary parts of the shifts)"};
    const auto shifts_im = numbers(*s, "shifts");
    const std::vector<double> shifts_re(shifts_im.size(), 0.0);
    re.resize(shifts_im.size());
    im.resize(shifts_im.size());
    check(salab_spectrum_shift_invert(m.get(), shifts_re.data(), shifts_im.data(), shifts_im.size(), re.data(),
                                      im.data(), &abscissa),
          "shift-invert spectrum");
  } else {
    throw Failure{2, "mode must be 'dense' or 'shift_invert'"};
  }
  auto out = open_artifact(output_dir(o) / "eigenvalues.csv", c.get());
  out << "re,im\n";
  for (std::size_t i = 0; i < re.size(); ++i) out << fmt(re[i]) << ',' << fmt(im[i]) << '\n';
  out << "# abscissa=" << fmt(abscissa) << '\n';
  std::cout << "eigenvalues: " << re.size() << "\nabscissa: " << short_fmt(abscissa) << '\n';
  return 0;
}

int cmd_sweep(const Options& o) {
  ConfigPtr c = resolve_config(o);
  set_default(c.get(), "beta_min", "1");
  set_default(c.get(), "beta_max", "200");
  set_default(c.get(), "points", "24");
  set_default(c.get(), "fit_beta_min", "10");
  ModelPtr m = build(c.get());
  const int points = static_cast<int>(number(c.get(), "points"));
  if (points < 1) throw Failure{2, "points must be >= 1"};
  std::vector<double> betas(static_cast<std::size_t>(points));
  check(salab_log_spaced(number(c.get(), "beta_min"), number(c.get(), "beta_max"), points, betas.data()),
        "sweep grid");
  salab_norm_method method = SALAB_NORM_AUTO;
  if (o.norm_method == "hessenberg") method = SALAB_NORM_HESSENBERG;
  else if (o.norm_method == "svd") method = SALAB_NORM_DENSE_SVD;
  else if (o.norm_method == "sparse") method = SALAB_NORM_SPARSE;
  std::vector<salab_resolvent_sample> samples(betas.size());
  check(salab_resolvent_sweep(m.get(), betas.data(), betas.size(), o.threads, method, samples.data()),
        "resolvent sweep");

  auto out = open_artifact(output_dir(o) / "resolvent.csv", c.get());
  out << "beta,norm,residual\n";
  std::size_t failed = 0;
  for (const auto& s : samples) {
    out << fmt(s.beta) << ',' << (s.ok ? fmt(s.norm) : std::string("inf")) << ',' << fmt(s.residual) << '\n';
    if (!s.ok) ++failed;
  }
  salab_growth_fit fit{};
  const salab_status fs = salab_fit_growth(samples.data(), samples.size(), number(c.get(), "fit_beta_min"), &fit);
  if (fs == SALAB_OK) {
    out << "# exponent=" << fmt(fit.exponent) << " constant=" << fmt(fit.constant)
        << " beta_min=" << fmt(fit.beta_min_used) << " envelope_ok=" << fit.envelope_ok
        << " samples=" << fit.samples_used << '\n';
    std::cout << "exponent: " << short_fmt(fit.exponent) << "\nconstant: " << short_fmt(fit.constant)
              << "\nenvelope_ok: " << (fit.envelope_ok ? "true" : "false") << "\nsamples: " << fit.samples_used
              << '\n';
  } else {
    out << "# fit unavailable: " << salab_last_error() << '\n';
    std::cout << "fit unavailable: " << salab_last_error() << '\n';
  }
  if (failed) {
    std::cerr << "error: " << failed << " sweep point(s) hit the spectrum\n";
    return 1;
  }
  return 0;
}

int cmd_trace(const Options& o, bool classical) {
  ConfigPtr c = resolve_config(o);
  set_default(c.get(), "dt", "0.01");
  set_default(c.get(), "t_end", "100");
  set_default(c.get(), "sample_every", "10");
  set_default(c.get(), "window", "1, 50");
  ModelPtr m = build(c.get());
  const auto seed = static_cast<long long>(number(c.get(), "seed"));
  std::vector<double> phi0(salab_model_dim(m.get()));
  if (classical)
    phi0 = classical_state(m.get(), seed, nullptr);
  else
    check(salab_random_state(m.get(), static_cast<uint64_t>(seed), phi0.data()), "random state");
  TracePtr trace = run_simulation(m.get(), c.get(), phi0);
  const auto window = numbers(*get(c.get(), "window"), "window");
  if (window.size() != 2) throw Failure{2, "window takes two values"};

  auto out = open_artifact(output_dir(o) / (classical ? "decay.csv" : "trace.csv"), c.get());
  out << "t,energy,dissipated\n";
  for (size_t k = 0; k < salab_trace_length(trace.get()); ++k) {
    double t = 0, e = 0, d = 0;
    check(salab_trace_sample(trace.get(), k, &t, &e, &d), "trace");
    out << fmt(t) << ',' << fmt(e) << ',' << fmt(d) << '\n';
  }
  salab_decay_fit fit{};
  check(salab_fit_decay(trace.get(), window[0], window[1], &fit), "decay fit");
  salab_check_report balance{};
  check(salab_check_energy_balance(trace.get(), &balance), "energy balance");
  out << "# M=" << fmt(fit.M) << " slope=" << fmt(fit.slope) << " window=[" << fmt(fit.window_begin) << ','
      << fmt(fit.window_end) << "]\n";
  out << "# graph_norm0=" << fmt(salab_trace_graph_norm0(trace.get()))
      << " balance_defect=" << fmt(balance.worst_residual) << '\n';
  double e0 = 0, e_end = 0;
  salab_trace_sample(trace.get(), 0, nullptr, &e0, nullptr);
  salab_trace_sample(trace.get(), salab_trace_length(trace.get()) - 1, nullptr, &e_end, nullptr);
  std::cout << "initial energy norm: " << short_fmt(e0) << "\nfinal energy norm: " << short_fmt(e_end)
            << "\nM: " << short_fmt(fit.M) << "\nslope: " << short_fmt(fit.slope)
            << "\nbalance defect: " << short_fmt(balance.worst_residual) << '\n';
  return 0;
}

int cmd_geometry(const Options& o) {
  ConfigPtr c = resolve_config(o);
  salab_geometry_report r{};
  check(salab_geometry_check(c.get(), &r), "geometry check");
  size_t rows = 0;
  salab_geometry_nodes(c.get(), nullptr, 0, &rows);
  std::vector<double> buf(7 * rows);
  check(salab_geometry_nodes(c.get(), buf.data(), rows, &rows), "geometry nodes");

  auto out = open_artifact(output_dir(o) / "geometry.csv", c.get());
  out << "x,y,z,nx,ny,nz,flux\n";
  for (size_t i = 0; i < rows; ++i) {
    for (int k = 0; k < 7; ++k) out << (k ? "," : "") << fmt(buf[7 * i + static_cast<size_t>(k)]);
    out << '\n';
  }
  std::string x0;
  for (int a = 0; a < r.dim; ++a) x0 += (a ? "," : "") + fmt(r.best_x0[a]);
  out << "# gamma1_convex=" << r.gamma1_convex << " satisfied=" << r.satisfied << " max_flux=" << fmt(r.max_flux)
      << " best_x0=(" << x0 << ") candidates=" << r.candidates << '\n';
  if (!r.satisfied)
    out << "# a box with one active face cannot satisfy the flux condition: opposite side faces of the\n"
           "# inactive boundary need x0 on both sides at once. Decay experiments run regardless; the\n"
           "# condition is sufficient, not necessary.\n";
  std::cout << "gamma1 convex: " << (r.gamma1_convex ? "true" : "false")
            << "\nflux condition satisfied: " << (r.satisfied ? "true" : "false")
            << "\nmax flux at best x0: " << short_fmt(r.max_flux) << '\n';
  if (!r.satisfied)
    std::cout << "note: no x0 works for a box (opposite side faces force contradictory signs); "
                 "the condition is sufficient, not necessary.\n";
  return 0;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("-c,--config", o.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  sub->add_option("-o,--out", o.out_dir, "output directory (default: $SALAB_OUT_DIR, else .)");
  sub->add_option("-s,--set", o.overrides, "override a configuration key: key=value (repeatable)");
  sub->add_option("--seed", o.seed, "random seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "salab: discrete structural acoustics with a thermoelastic plate interface.\n"
      "Precedence: dedicated flags > --set overrides > config file > built-in defaults."};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(salab_version()));
  Options o;

  auto* check_cmd = app.add_subcommand("check", "run the four verification suites");
  add_common(check_cmd, o);
  check_cmd->add_option("--trials", o.trials, "probes per check (defaults 200/100/50)");
  check_cmd->add_option("--dt", o.dt, "time step of the energy balance run");
  check_cmd->add_option("--t-end", o.t_end, "horizon of the energy balance run");

  auto* spectrum_cmd = app.add_subcommand("spectrum", "eigenvalues of the generator");
  add_common(spectrum_cmd, o);
  spectrum_cmd->add_option("--mode", o.mode, "dense or shift_invert");
  spectrum_cmd->add_option("--shifts", o.shifts, "comma-separated imaginary parts for shift_invert");

  auto* sweep_cmd = app.add_subcommand("resolvent-sweep", "resolvent norms along the imaginary axis");
  add_common(sweep_cmd, o);
  sweep_cmd->add_option("--beta-min", o.beta_min, "first beta of the sweep");
  sweep_cmd->add_option("--beta-max", o.beta_max, "last beta of the sweep");
  sweep_cmd->add_option("--points", o.points, "number of log-spaced points");
  sweep_cmd->add_option("--fit-beta-min", o.fit_beta_min, "tail threshold for the growth fit");
  sweep_cmd->add_option("--threads", o.threads, "worker threads (0 = all)");
  sweep_cmd->add_option("--method", o.norm_method, "auto, sparse, hessenberg or svd")
      ->check(CLI::IsMember({"auto", "sparse", "hessenberg", "svd"}));

  auto* simulate_cmd = app.add_subcommand("simulate", "energy trace from random finite-energy data");
  auto* decay_cmd = app.add_subcommand("decay", "energy trace and decay fit from classical data");
  for (auto* sub : {simulate_cmd, decay_cmd}) {
    add_common(sub, o);
    sub->add_option("--dt", o.dt, "time step");
    sub->add_option("--t-end", o.t_end, "final time");
    sub->add_option("--sample-every", o.sample_every, "steps between samples");
    sub->add_option("--window", o.window, "decay fit window 'a, b'");
  }

  auto* geometry_cmd = app.add_subcommand("geometry", "check the flux condition on the inactive boundary");
  add_common(geometry_cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*check_cmd) return cmd_check(o);
    if (*spectrum_cmd) return cmd_spectrum(o);
    if (*sweep_cmd) return cmd_sweep(o);
    if (*simulate_cmd) return cmd_trace(o, false);
    if (*decay_cmd) return cmd_trace(o, true);
    if (*geometry_cmd) return cmd_geometry(o);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    if (f.code == 2) std::cerr << "run with --help for usage\n";
    return f.code;
  }
  return 2;
}

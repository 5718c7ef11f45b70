#include "salab/model.hpp"

#include "salab/error.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace salab {

namespace {

constexpr std::string_view kConfigBegin = "# --- config ---";
constexpr std::string_view kConfigEnd = "# --- end config ---";

const std::vector<std::string> kModelKeys = {"dim",   "extents", "n_cells", "alpha",
                                             "gamma", "lambda",  "mu",      "active_face"};

std::vector<double> trapezoid_weights(int cells, double h) {
  std::vector<double> w(static_cast<std::size_t>(cells) + 1, h);
  w.front() = 0.5 * h;
  w.back() = 0.5 * h;
  return w;
}

}  // namespace

void PhysicalParams::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw ValidationError("alpha must be >= 0 (alpha = 0 is the decoupled control)");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in [0,1]");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be >= 0");
  if (!(mu > 0.0 && mu < 1.0)) throw ValidationError("mu must lie in (0,1)");
}

std::string FaceId::to_string() const {
  static constexpr char names[] = {'x', 'y', 'z'};
  return std::string(1, names[axis]) + (upper ? "+" : "-");
}

FaceId FaceId::parse(std::string_view text, int dim) {
  auto t = detail::trim(text);
  if (t.size() != 2 || (t[1] != '+' && t[1] != '-'))
    throw ConfigError("active_face must look like 'y-' or 'x+', got '" + std::string(t) + "'");
  int axis = -1;
  if (t[0] == 'x') axis = 0;
  if (t[0] == 'y') axis = 1;
  if (t[0] == 'z') axis = 2;
  if (axis < 0 || axis >= dim)
    throw ValidationError("active_face axis '" + std::string(1, t[0]) + "' is not an axis of a " +
                          std::to_string(dim) + "D chamber");
  return FaceId{axis, t[1] == '+'};
}

const std::vector<std::string>& run_keys() {
  static const std::vector<std::string> keys = {
      "seed",   "trials",   "dt",     "t_end",        "sample_every", "window",
      "beta_min", "beta_max", "points", "fit_beta_min", "mode",         "shifts"};
  return keys;
}

void ModelConfig::validate() const {
  if (dim != 2 && dim != 3) throw ValidationError("dim must be 2 or 3");
  for (int a = 0; a < dim; ++a) {
    if (!(extents[a] > 0.0) || !std::isfinite(extents[a]))
      throw ValidationError("extents must be positive");
    if (n_cells[a] < 3) throw ValidationError("n_cells must be >= 3 per axis");
  }
  if (active_face.axis < 0 || active_face.axis >= dim)
    throw ValidationError("active_face axis out of range for dim");
  params.validate();
}

void ModelConfig::set(std::string_view key_in, std::string_view value) {
  const std::string key(detail::trim(key_in));
  if (key == "dim") {
    dim = detail::parse_int(value, key);
    if (dim != 2 && dim != 3) throw ValidationError("dim must be 2 or 3");
    // Keep the default face meaningful when dim changes.
    active_face = FaceId{dim - 1, false};
  } else if (key == "extents") {
    auto v = detail::parse_double_list(value, key);
    if (v.size() > 3) throw ConfigError("extents takes at most 3 values");
    for (std::size_t a = 0; a < v.size(); ++a) extents[a] = v[a];
    if (!v.empty())
      for (std::size_t a = v.size(); a < 3; ++a) extents[a] = v.back();
  } else if (key == "n_cells") {
    auto v = detail::parse_double_list(value, key);
    if (v.size() > 3) throw ConfigError("n_cells takes at most 3 values");
    for (std::size_t a = 0; a < v.size(); ++a) {
      if (v[a] != std::floor(v[a])) throw ConfigError("n_cells must be integers");
      n_cells[a] = static_cast<int>(v[a]);
    }
    if (!v.empty())
      for (std::size_t a = v.size(); a < 3; ++a) n_cells[a] = n_cells[v.size() - 1];
  } else if (key == "alpha") {
    params.alpha = detail::parse_double(value, key);
  } else if (key == "gamma") {
    params.gamma = detail::parse_double(value, key);
  } else if (key == "lambda") {
    params.lambda = detail::parse_double(value, key);
  } else if (key == "mu") {
    params.mu = detail::parse_double(value, key);
  } else if (key == "active_face") {
    active_face = FaceId::parse(value, dim);
  } else if (std::find(run_keys().begin(), run_keys().end(), key) != run_keys().end()) {
    run[key] = std::string(detail::trim(value));
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

std::vector<std::string> ModelConfig::to_lines() const {
  auto join = [this](auto get) {
    std::string s;
    for (int a = 0; a < dim; ++a) {
      if (a) s += ", ";
      s += get(a);
    }
    return s;
  };
  std::vector<std::string> out;
  out.push_back("dim = " + std::to_string(dim));
  out.push_back("extents = " + join([this](int a) { return detail::format_double(extents[a]); }));
  out.push_back("n_cells = " + join([this](int a) { return std::to_string(n_cells[a]); }));
  out.push_back("alpha = " + detail::format_double(params.alpha));
  out.push_back("gamma = " + detail::format_double(params.gamma));
  out.push_back("lambda = " + detail::format_double(params.lambda));
  out.push_back("mu = " + detail::format_double(params.mu));
  out.push_back("active_face = " + active_face.to_string());
  for (const auto& [k, v] : run) out.push_back(k + " = " + v);
  return out;
}

ModelConfig parse_config(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  }

  // Artifacts written by the tool embed their configuration between marker
  // comments; such a file is accepted as configuration input directly.
  const auto begin = std::find_if(lines.begin(), lines.end(), [](const std::string& l) {
    return detail::trim(l) == kConfigBegin;
  });
  if (begin != lines.end()) {
    std::vector<std::string> block;
    for (auto it = std::next(begin); it != lines.end(); ++it) {
      auto t = detail::trim(*it);
      if (t == kConfigEnd) break;
      if (t.starts_with("#")) t.remove_prefix(1);
      block.emplace_back(t);
    }
    lines = std::move(block);
  }

  ModelConfig config;
  std::set<std::string> seen;
  int line_no = 0;
  // dim must be applied first because it resets the default face.
  std::vector<std::pair<std::string, std::string>> assignments;
  for (const auto& raw : lines) {
    ++line_no;
    auto body = std::string_view(raw);
    if (auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = detail::trim(body);
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key(detail::trim(body.substr(0, eq)));
    std::string value(detail::trim(body.substr(eq + 1)));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!seen.insert(key).second) throw ConfigError("duplicate key '" + key + "'");
    assignments.emplace_back(std::move(key), std::move(value));
  }
  std::stable_partition(assignments.begin(), assignments.end(),
                        [](const auto& kv) { return kv.first == "dim"; });
  for (const auto& [k, v] : assignments) config.set(k, v);

  for (const auto& key : kModelKeys) {
    if (key == "active_face") continue;
    if (!seen.contains(key)) throw ConfigError("missing configuration key '" + key + "'");
  }
  config.validate();
  return config;
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

ModelConfig default_config(int dim) {
  ModelConfig c;
  c.dim = dim;
  c.active_face = FaceId{dim - 1, false};
  c.extents = {1.0, 0.8, 0.9};
  if (dim == 3) c.n_cells = {6, 6, 6};
  c.validate();
  return c;
}

double DiscreteGeometry::volume() const {
  double v = 1.0;
  for (int a = 0; a < dim; ++a) v *= extents[a];
  return v;
}

DiscreteGeometry build_geometry(const ModelConfig& config) {
  config.validate();
  DiscreteGeometry g;
  g.dim = config.dim;
  g.n_cells = config.n_cells;
  g.extents = config.extents;
  g.active_face = config.active_face;
  const int d = g.dim;

  std::array<Index, 3> stride{1, 1, 1};
  std::array<std::vector<double>, 3> w1d;
  Index n_nodes = 1;
  for (int a = 0; a < d; ++a) {
    g.spacing[a] = g.extents[a] / g.n_cells[a];
    w1d[a] = trapezoid_weights(g.n_cells[a], g.spacing[a]);
    stride[a] = n_nodes;
    n_nodes *= g.n_cells[a] + 1;
  }

  g.coords.resize(d, n_nodes);
  g.w_omega.resize(n_nodes);
  std::array<int, 3> idx{};
  auto unflatten = [&](Index k) {
    for (int a = 0; a < d; ++a) {
      idx[a] = static_cast<int>(k % (g.n_cells[a] + 1));
      k /= g.n_cells[a] + 1;
    }
  };
  for (Index k = 0; k < n_nodes; ++k) {
    unflatten(k);
    double w = 1.0;
    for (int a = 0; a < d; ++a) {
      g.coords(a, k) = idx[a] * g.spacing[a];
      w *= w1d[a][idx[a]];
    }
    g.w_omega[k] = w;
  }

  // Γ₀ face grid.
  const int act = g.active_face.axis;
  const int act_index = g.active_face.upper ? g.n_cells[act] : 0;
  for (int a = 0; a < d; ++a) {
    if (a == act) continue;
    g.face_axes.push_back(a);
    g.face_cells.push_back(g.n_cells[a]);
    g.face_spacing.push_back(g.spacing[a]);
  }
  Index face_nodes = 1;
  for (int c : g.face_cells) face_nodes *= c + 1;
  g.gamma0_nodes.resize(static_cast<std::size_t>(face_nodes));
  g.w_gamma0.resize(face_nodes);
  std::vector<double> dweights;
  for (Index f = 0; f < face_nodes; ++f) {
    Index rem = f;
    Index chamber = static_cast<Index>(act_index) * stride[act];
    double w = 1.0;
    bool on_edge = false;
    std::vector<int> fidx(g.face_axes.size());
    for (std::size_t j = 0; j < g.face_axes.size(); ++j) {
      const int a = g.face_axes[j];
      fidx[j] = static_cast<int>(rem % (g.n_cells[a] + 1));
      rem /= g.n_cells[a] + 1;
      chamber += fidx[j] * stride[a];
      w *= w1d[a][fidx[j]];
      if (fidx[j] == 0 || fidx[j] == g.n_cells[a]) on_edge = true;
    }
    g.gamma0_nodes[static_cast<std::size_t>(f)] = chamber;
    g.w_gamma0[f] = w;
    if (!on_edge) {
      g.gamma0_interior.push_back(f);
      continue;
    }
    g.dgamma0.push_back(f);
    // Trapezoidal weight along ∂Γ₀: one contribution per edge through the node.
    double dw = 0.0;
    for (std::size_t j = 0; j < g.face_axes.size(); ++j) {
      const int a = g.face_axes[j];
      if (fidx[j] != 0 && fidx[j] != g.n_cells[a]) continue;
      double prod = 1.0;
      for (std::size_t k = 0; k < g.face_axes.size(); ++k)
        if (k != j) prod *= w1d[g.face_axes[k]][fidx[k]];
      dw += prod;
    }
    dweights.push_back(dw);
  }
  g.w_dgamma0 = Eigen::Map<Eigen::VectorXd>(dweights.data(), static_cast<Index>(dweights.size()));

  // Γ₁: every other face, minus nodes of Γ̄₀ (those belong to ∂Γ₀ handling).
  std::set<Index> gamma1;
  for (int a = 0; a < d; ++a) {
    for (bool upper : {false, true}) {
      FaceId face{a, upper};
      if (face == g.active_face) continue;
      BoundaryFacet facet;
      facet.face = face;
      facet.normal = Eigen::VectorXd::Zero(d);
      facet.normal[a] = upper ? 1.0 : -1.0;
      const int fixed = upper ? g.n_cells[a] : 0;
      for (Index k = 0; k < n_nodes; ++k) {
        unflatten(k);
        if (idx[a] != fixed) continue;
        if (idx[act] == act_index) continue;
        facet.nodes.push_back(k);
        gamma1.insert(k);
      }
      g.gamma1_faces.push_back(std::move(facet));
    }
  }
  g.gamma1_nodes.assign(gamma1.begin(), gamma1.end());
  return g;
}

GeometryReport check_flux_condition(const Eigen::MatrixXd& coords,
                                    const std::vector<BoundaryFacet>& facets,
                                    const std::vector<Eigen::VectorXd>& x0_candidates) {
  if (x0_candidates.empty()) throw ValidationError("check_geometry needs at least one candidate x0");
  GeometryReport report;

  // Flat-face convexity: each facet is planar and the whole node cloud lies on
  // the inner side of every facet plane.
  const double scale = std::max(1.0, coords.size() ? coords.cwiseAbs().maxCoeff() : 1.0);
  const double tol = 1e-12 * scale;
  for (const auto& f : facets) {
    if (f.nodes.empty()) continue;
    const Eigen::VectorXd p = coords.col(f.nodes.front());
    for (Index k : f.nodes)
      if (std::abs((coords.col(k) - p).dot(f.normal)) > tol) report.gamma1_convex = false;
    for (Index k = 0; k < coords.cols(); ++k)
      if ((coords.col(k) - p).dot(f.normal) > tol) report.gamma1_convex = false;
  }

  report.max_flux = std::numeric_limits<double>::infinity();
  for (const auto& x0 : x0_candidates) {
    double flux = -std::numeric_limits<double>::infinity();
    for (const auto& f : facets)
      for (Index k : f.nodes) flux = std::max(flux, (coords.col(k) - x0).dot(f.normal));
    report.candidate_flux.push_back(flux);
    if (flux < report.max_flux) {
      report.max_flux = flux;
      report.best_x0 = x0;
    }
  }
  report.satisfied = report.max_flux <= 0.0;
  return report;
}

GeometryReport check_geometry(const DiscreteGeometry& geometry,
                              const std::vector<Eigen::VectorXd>& x0_candidates) {
  return check_flux_condition(geometry.coords, geometry.gamma1_faces, x0_candidates);
}

std::vector<Eigen::VectorXd> default_x0_candidates(const DiscreteGeometry& geometry) {
  const int d = geometry.dim;
  std::vector<Eigen::VectorXd> out;
  Eigen::VectorXd center(d);
  for (int a = 0; a < d; ++a) center[a] = 0.5 * geometry.extents[a];
  out.push_back(center);
  constexpr int per_axis = 5;
  int total = 1;
  for (int a = 0; a < d; ++a) total *= per_axis;
  for (int k = 0; k < total; ++k) {
    Eigen::VectorXd p(d);
    int rem = k;
    for (int a = 0; a < d; ++a) {
      const double L = geometry.extents[a];
      p[a] = -L + 3.0 * L * (rem % per_axis) / (per_axis - 1);
      rem /= per_axis;
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace salab

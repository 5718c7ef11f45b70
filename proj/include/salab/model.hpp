#pragma once

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace salab {

using Index = Eigen::Index;

struct PhysicalParams {
  double alpha = 1.0;   // thermal coupling
  double gamma = 0.0;   // rotational inertia
  double lambda = 1.0;  // Robin coefficient of the heat equation
  double mu = 0.3;      // Poisson modulus

  /// alpha == 0 is the decoupled control experiment.
  bool decoupled() const { return alpha == 0.0; }
  void validate() const;
};

/// One face of the chamber box: axis index plus lower/upper side.
struct FaceId {
  int axis = 1;
  bool upper = false;

  std::string to_string() const;
  static FaceId parse(std::string_view text, int dim);
  friend bool operator==(const FaceId&, const FaceId&) = default;
};

struct ModelConfig {
  int dim = 2;
  std::array<double, 3> extents{1.0, 1.0, 1.0};
  std::array<int, 3> n_cells{16, 16, 16};
  PhysicalParams params;
  FaceId active_face;

  /// Optional run keys (seed, dt, beta_max, ...) carried alongside the model
  /// so that an artifact header reproduces the whole run.
  std::map<std::string, std::string> run;

  void validate() const;
  /// Applies one `key = value` assignment (model or run key).
  void set(std::string_view key, std::string_view value);
  /// `key = value` lines for every model key followed by the run keys.
  std::vector<std::string> to_lines() const;
};

/// Keys accepted in the `run` map.
const std::vector<std::string>& run_keys();

ModelConfig parse_config(std::string_view text);
ModelConfig load_config(const std::filesystem::path& path);
/// Defaults used by the command line tool when no file is given:
/// 16x16 cells on a 1 x 0.8 box (6 per axis on 1 x 0.8 x 0.9 in 3D),
/// Γ₀ the bottom face, alpha 1, gamma 0, lambda 1, mu 0.3.
ModelConfig default_config(int dim = 2);

/// A flat face of the box boundary with its outward normal.
struct BoundaryFacet {
  FaceId face;
  Eigen::VectorXd normal;
  std::vector<Index> nodes;  // chamber node indices
};

struct DiscreteGeometry {
  int dim = 2;
  std::array<int, 3> n_cells{};
  std::array<double, 3> extents{};
  std::array<double, 3> spacing{};
  FaceId active_face;

  /// dim x N, column k is the position of chamber node k. Nodes are ordered
  /// lexicographically with axis 0 fastest.
  Eigen::MatrixXd coords;

  /// Tangential axes of Γ₀ in increasing order, with their cell counts.
  std::vector<int> face_axes;
  std::vector<int> face_cells;
  std::vector<double> face_spacing;

  /// Chamber indices of the Γ₀ nodes in face-lexicographic order. Positions
  /// into this list are the "face indices" used by the interface operators.
  std::vector<Index> gamma0_nodes;
  /// Face indices of nodes interior to Γ₀ and on ∂Γ₀ (corners included).
  std::vector<Index> gamma0_interior;
  std::vector<Index> dgamma0;
  /// Boundary chamber nodes not on Γ̄₀.
  std::vector<Index> gamma1_nodes;
  std::vector<BoundaryFacet> gamma1_faces;

  Eigen::VectorXd w_omega;    // per chamber node
  Eigen::VectorXd w_gamma0;   // per face node
  Eigen::VectorXd w_dgamma0;  // per entry of dgamma0

  Index chamber_size() const { return coords.cols(); }
  Index face_size() const { return static_cast<Index>(gamma0_nodes.size()); }
  Index face_interior_size() const { return static_cast<Index>(gamma0_interior.size()); }
  double volume() const;
};

DiscreteGeometry build_geometry(const ModelConfig& config);

struct GeometryReport {
  bool gamma1_convex = true;
  Eigen::VectorXd best_x0;
  double max_flux = 0.0;
  bool satisfied = true;
  /// Per candidate max over Γ₁ of (x - x0)·ν, in candidate order.
  std::vector<double> candidate_flux;
};

/// Evaluates max_{x ∈ Γ₁} (x - x0)·ν for each candidate and keeps the best.
GeometryReport check_geometry(const DiscreteGeometry& geometry,
                              const std::vector<Eigen::VectorXd>& x0_candidates);

/// Same check against an explicit facet list; used for synthetic Γ₁ sets.
/// `coords` holds node positions as columns.
GeometryReport check_flux_condition(const Eigen::MatrixXd& coords,
                                    const std::vector<BoundaryFacet>& facets,
                                    const std::vector<Eigen::VectorXd>& x0_candidates);

/// Box center plus a 5^d lattice over the box inflated by one extent per side.
std::vector<Eigen::VectorXd> default_x0_candidates(const DiscreteGeometry& geometry);

}  // namespace salab

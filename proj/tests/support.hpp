#pragma once

#include "salab/dynamics.hpp"
#include "salab/model.hpp"
#include "salab/operators.hpp"
#include "salab/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <string>
#include <tuple>
#include <utility>

namespace salab::test {

/// Default 2D configuration with square cells of the given count per axis.
inline ModelConfig grid_config(int n, double gamma = 0.0, double alpha = 1.0) {
  ModelConfig c = default_config(2);
  c.n_cells = {n, n, n};
  c.params.gamma = gamma;
  c.params.alpha = alpha;
  return c;
}

/// Beam interface of `n` cells under a thin chamber; used for 1D plate checks.
inline ModelConfig beam_config(int n) {
  ModelConfig c = default_config(2);
  c.extents = {1.0, 0.5, 1.0};
  c.n_cells = {n, 3, 3};
  return c;
}

/// Generators are cached per (n, gamma, alpha); tests only read them.
inline const Generator& cached(int n, double gamma = 0.0, double alpha = 1.0) {
  static std::map<std::tuple<int, double, double>, Generator> cache;
  auto key = std::make_tuple(n, gamma, alpha);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, build_generator(grid_config(n, gamma, alpha))).first;
  return it->second;
}

/// The 1 x 0.8, 16 x 16 desk configuration.
inline const Generator& desk(double gamma = 0.0) {
  static std::map<double, Generator> cache;
  auto it = cache.find(gamma);
  if (it == cache.end()) {
    ModelConfig c = default_config(2);
    c.params.gamma = gamma;
    it = cache.emplace(gamma, build_generator(c)).first;
  }
  return it->second;
}

inline double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}
inline double rel(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

inline Eigen::VectorXd face_coordinate(const DiscreteGeometry& g, int k) {
  Eigen::VectorXd x(g.face_size());
  for (Index i = 0; i < g.face_size(); ++i) x[i] = g.coords(g.face_axes[k], g.gamma0_nodes[i]);
  return x;
}

/// ‖X‖ in the W-induced operator norm via a dense SVD of LᵀXL⁻ᵀ.
inline double w_operator_norm(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W) {
  Eigen::LLT<Eigen::MatrixXd> llt(W);
  const Eigen::MatrixXd L = llt.matrixL();
  const Eigen::MatrixXd LtX = L.transpose() * X;
  const Eigen::MatrixXd B = L.triangularView<Eigen::Lower>().solve(LtX.transpose()).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B);
  return svd.singularValues()[0];
}

}  // namespace salab::test

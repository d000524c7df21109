#pragma once

// Least-squares scores as polynomials in (q, p): the upper objective F
// (masked interventional losses plus alpha times the observational loss)
// and the lower objective G (observational loss plus a ridge term on p).

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "cpop/dataset.hpp"
#include "cpop/graph.hpp"
#include "cpop/poly.hpp"

namespace cpop {

enum class FeatureMode { Linear, PerPairMonomial };

struct ScoreConfig {
  double alpha = 0.2;
  double lambda_sp = 0.01;
  FeatureMode feature_mode = FeatureMode::Linear;

  void validate() const;
};

// phi_{j->i}(x) = x^degree(j, i). All degrees are 1 in linear mode.
class FeatureMap {
 public:
  FeatureMap() = default;
  static FeatureMap linear(int D);
  // Picks, per ordered pair, the monomial degree in {1,2,3} whose
  // univariate least-squares fit of x_i on x_j^g has the smallest residual.
  static FeatureMap fit(const Eigen::MatrixXd& obs);
  static FeatureMap for_config(const Dataset& ds, FeatureMode mode);

  int nodes() const { return D_; }
  int degree(int from, int to) const { return degree_[static_cast<std::size_t>(from) * D_ + to]; }
  void set_degree(int from, int to, int g) { degree_[static_cast<std::size_t>(from) * D_ + to] = g; }
  // Column of phi_{from->to} applied to the data column `from`.
  Eigen::VectorXd apply(const Eigen::MatrixXd& data, int from, int to) const;

 private:
  int D_ = 0;
  std::vector<int> degree_;
};

// (1/2N) sum_{i != mask} sum_n (x_ni - sum_j W_ji phi_ji(x_nj))^2 as a
// polynomial over `nvars` variables laid out per VarLayout.
Polynomial ls_loss(const Eigen::MatrixXd& data, const EdgeIndexMap& map,
                   std::optional<int> mask_target, const FeatureMap& features, std::size_t nvars);

Polynomial upper_objective(const Dataset& ds, const ScoreConfig& cfg, const EdgeIndexMap& map,
                           const FeatureMap& features, std::size_t nvars);
Polynomial lower_objective(const Dataset& ds, const ScoreConfig& cfg, const EdgeIndexMap& map,
                           const FeatureMap& features, std::size_t nvars);

// Numeric counterparts for a concrete weight matrix W (W(j, i) is the
// weight of j -> i). Used by refit evaluation and brute-force oracles.
double ls_loss_value(const Eigen::MatrixXd& data, const Eigen::MatrixXd& W,
                     std::optional<int> mask_target, const FeatureMap& features);
double upper_objective_value(const Dataset& ds, const ScoreConfig& cfg, const Eigen::MatrixXd& W,
                             const FeatureMap& features);

}  // namespace cpop

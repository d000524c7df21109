#include "cpop/scoring.hpp"

#include <cmath>
#include <limits>

#include "cpop/error.hpp"

namespace cpop {

void ScoreConfig::validate() const {
  if (!std::isfinite(alpha) || alpha < 0.0) throw InvalidInput("alpha must be finite and >= 0");
  if (!std::isfinite(lambda_sp) || lambda_sp < 0.0) {
    throw InvalidInput("lambda_sp must be finite and >= 0");
  }
}

FeatureMap FeatureMap::linear(int D) {
  FeatureMap f;
  f.D_ = D;
  f.degree_.assign(static_cast<std::size_t>(D) * D, 1);
  return f;
}

FeatureMap FeatureMap::fit(const Eigen::MatrixXd& obs) {
  const int D = static_cast<int>(obs.cols());
  FeatureMap f = linear(D);
  if (obs.rows() == 0) return f;
  for (int j = 0; j < D; ++j) {
    for (int i = 0; i < D; ++i) {
      if (i == j) continue;
      const Eigen::VectorXd y = obs.col(i);
      double best = std::numeric_limits<double>::infinity();
      int best_g = 1;
      for (int g = 1; g <= 3; ++g) {
        const Eigen::VectorXd phi = obs.col(j).array().pow(g);
        const double pp = phi.squaredNorm();
        if (pp <= 0.0) continue;
        const double yp = y.dot(phi);
        const double rss = y.squaredNorm() - yp * yp / pp;
        // strict improvement keeps the lowest degree on ties
        if (g == 1 || rss < best - 1e-12 * (1.0 + std::abs(best))) {
          best = rss;
          best_g = g;
        }
      }
      f.set_degree(j, i, best_g);
    }
  }
  return f;
}

FeatureMap FeatureMap::for_config(const Dataset& ds, FeatureMode mode) {
  if (mode == FeatureMode::Linear) return linear(ds.nodes());
  return fit(ds.obs);
}

Eigen::VectorXd FeatureMap::apply(const Eigen::MatrixXd& data, int from, int to) const {
  const int g = degree(from, to);
  if (g == 1) return data.col(from);
  return data.col(from).array().pow(g).matrix();
}

Polynomial ls_loss(const Eigen::MatrixXd& data, const EdgeIndexMap& map,
                   std::optional<int> mask_target, const FeatureMap& features, std::size_t nvars) {
  const int D = map.nodes();
  if (data.rows() == 0) throw InvalidInput("ls_loss: empty data");
  if (data.cols() != D) throw InvalidInput("ls_loss: column count differs from node count");
  if (mask_target && (*mask_target < 0 || *mask_target >= D)) {
    throw InvalidInput("ls_loss: mask target out of range");
  }
  const double scale = 1.0 / (2.0 * static_cast<double>(data.rows()));
  Polynomial loss(nvars);
  for (int i = 0; i < D; ++i) {
    if (mask_target && *mask_target == i) continue;
    std::vector<int> parents;
    for (int j = 0; j < D; ++j)
      if (j != i) parents.push_back(j);
    const auto n = static_cast<Eigen::Index>(parents.size());
    Eigen::MatrixXd Phi(data.rows(), n);
    for (Eigen::Index a = 0; a < n; ++a) Phi.col(a) = features.apply(data, parents[a], i);
    const Eigen::VectorXd T = Phi.transpose() * data.col(i);
    const Eigen::MatrixXd U = Phi.transpose() * Phi;
    std::vector<Polynomial> w;
    w.reserve(parents.size());
    for (int j : parents) w.push_back(edge_weight_poly(map, j, i, nvars));

    loss.add_term(Monomial{}, scale * data.col(i).squaredNorm());
    for (Eigen::Index a = 0; a < n; ++a) {
      loss += w[a] * (-2.0 * scale * T(a));
      loss += (w[a] * w[a]) * (scale * U(a, a));
      for (Eigen::Index b = a + 1; b < n; ++b) {
        loss += (w[a] * w[b]) * (2.0 * scale * U(a, b));
      }
    }
  }
  return loss;
}

Polynomial upper_objective(const Dataset& ds, const ScoreConfig& cfg, const EdgeIndexMap& map,
                           const FeatureMap& features, std::size_t nvars) {
  cfg.validate();
  if (ds.obs.rows() == 0 && ds.ints.empty()) throw InvalidInput("upper_objective: empty dataset");
  Polynomial F(nvars);
  for (const auto& blk : ds.ints) {
    if (blk.data.rows() == 0) continue;
    F += ls_loss(blk.data, map, blk.target, features, nvars);
  }
  if (cfg.alpha > 0.0 && ds.obs.rows() > 0) {
    F += ls_loss(ds.obs, map, std::nullopt, features, nvars) * cfg.alpha;
  }
  return F;
}

Polynomial lower_objective(const Dataset& ds, const ScoreConfig& cfg, const EdgeIndexMap& map,
                           const FeatureMap& features, std::size_t nvars) {
  cfg.validate();
  if (ds.obs.rows() == 0) throw InvalidInput("lower_objective: no observational data");
  Polynomial G = ls_loss(ds.obs, map, std::nullopt, features, nvars);
  const VarLayout lay{map.size()};
  for (std::size_t e = 0; e < map.size(); ++e) {
    G.add_term(Monomial::variable(lay.p(e), 2), cfg.lambda_sp);
  }
  return G;
}

double ls_loss_value(const Eigen::MatrixXd& data, const Eigen::MatrixXd& W,
                     std::optional<int> mask_target, const FeatureMap& features) {
  const auto D = data.cols();
  if (data.rows() == 0) throw InvalidInput("ls_loss_value: empty data");
  double total = 0.0;
  for (Eigen::Index i = 0; i < D; ++i) {
    if (mask_target && *mask_target == i) continue;
    Eigen::VectorXd r = data.col(i);
    for (Eigen::Index j = 0; j < D; ++j) {
      if (j == i || W(j, i) == 0.0) continue;
      r -= W(j, i) * features.apply(data, static_cast<int>(j), static_cast<int>(i));
    }
    total += r.squaredNorm();
  }
  return total / (2.0 * static_cast<double>(data.rows()));
}

double upper_objective_value(const Dataset& ds, const ScoreConfig& cfg, const Eigen::MatrixXd& W,
                             const FeatureMap& features) {
  double F = 0.0;
  for (const auto& blk : ds.ints) {
    if (blk.data.rows() > 0) F += ls_loss_value(blk.data, W, blk.target, features);
  }
  if (cfg.alpha > 0.0 && ds.obs.rows() > 0) {
    F += cfg.alpha * ls_loss_value(ds.obs, W, std::nullopt, features);
  }
  return F;
}

}  // namespace cpop

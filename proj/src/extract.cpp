#include "cpop/extract.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cpop/error.hpp"

namespace cpop {

StructureParams extract_params(const MomentVector& y, const EdgeIndexMap& map) {
  const std::size_t dbar = map.size();
  const VarLayout lay{dbar};
  std::vector<double> p(dbar), q(dbar), lambda(dbar + 1, 0.0);
  for (std::size_t e = 0; e < dbar; ++e) {
    q[e] = std::clamp(y.at(Monomial::variable(lay.q(e))), 0.0, 1.0);
    p[e] = std::clamp(y.at(Monomial::variable(lay.p(e))), -1.0, 1.0);
  }
  for (std::size_t k = 0; k <= dbar; ++k) {
    const Monomial m = Monomial::variable(lay.lambda(k));
    if (y.contains(m)) lambda[k] = std::clamp(y.at(m), 0.0, 1.0);
  }
  return StructureParams(std::move(p), std::move(q), std::move(lambda));
}

nlohmann::json Certificate::to_json() const {
  return {{"certified", certified}, {"upper_residual", upper}, {"lower_residual", lower}};
}

Certificate certify(const StructureParams& params, const SingleLevelPOP& pop, double eps) {
  if (params.p.size() != pop.dbar) throw InvalidInput("certify: parameter size mismatch");
  const auto x = params.flatten();
  Certificate c;
  for (std::size_t i = 0; i < pop.I; ++i) c.upper = std::max(c.upper, std::abs(pop.ineqs[i].evaluate(x)));
  const std::size_t first_g = pop.ineqs.size() - pop.J;
  for (std::size_t j = 0; j < pop.J; ++j) {
    // stored as -g_j >= 0
    const double g = -pop.ineqs[first_g + j].evaluate(x);
    c.lower = std::max(c.lower, g > 0.0 ? g : -g);
  }
  c.certified = c.upper <= eps && c.lower <= eps;
  return c;
}

RoundResult round_and_repair(const StructureParams& params, const EdgeIndexMap& map, double tau_p) {
  RoundResult r;
  r.adj = round_params(params, map, tau_p);
  auto strength = [&](int from, int to) {
    const std::size_t e = map.index(from, to);
    const double dir = from < to ? params.q[e] : 1.0 - params.q[e];
    return std::abs(params.p[e] * dir);
  };
  for (auto cycle = find_cycle(r.adj); !cycle.empty(); cycle = find_cycle(r.adj)) {
    Repair weakest{0, 0, std::numeric_limits<double>::infinity()};
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      const int from = cycle[k];
      const int to = cycle[(k + 1) % cycle.size()];
      const double s = strength(from, to);
      if (s < weakest.strength) weakest = {from, to, s};
    }
    r.adj(weakest.from, weakest.to) = 0;
    r.repairs.push_back(weakest);
  }
  return r;
}

RefitResult refit_weights(const Adjacency& adj, const Dataset& ds) {
  const int D = static_cast<int>(adj.rows());
  if (ds.obs.cols() != D) throw InvalidInput("refit_weights: dataset has the wrong number of columns");
  if (!is_acyclic(adj)) throw InvalidInput("refit_weights: adjacency has a cycle");
  RefitResult r;
  r.W = Eigen::MatrixXd::Zero(D, D);
  for (int i = 0; i < D; ++i) {
    std::vector<int> parents;
    for (int j = 0; j < D; ++j)
      if (adj(j, i)) parents.push_back(j);
    if (parents.empty()) continue;
    Eigen::MatrixXd X(ds.obs.rows(), static_cast<Eigen::Index>(parents.size()));
    for (std::size_t k = 0; k < parents.size(); ++k) X.col(static_cast<Eigen::Index>(k)) = ds.obs.col(parents[k]);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
    if (cod.rank() < X.cols()) r.rank_deficient = true;
    const Eigen::VectorXd b = cod.solve(ds.obs.col(i));
    for (std::size_t k = 0; k < parents.size(); ++k) r.W(parents[k], i) = b(static_cast<Eigen::Index>(k));
  }
  return r;
}

nlohmann::json LearnedGraph::to_json() const {
  nlohmann::json j = graph_to_json(adj);
  nlohmann::json w = nlohmann::json::array();
  for (Eigen::Index a = 0; a < W.rows(); ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index b = 0; b < W.cols(); ++b) row.push_back(W(a, b));
    w.push_back(row);
  }
  j["weights"] = w;
  j["rank_deficient"] = rank_deficient;
  j["certificate"] = certificate.to_json();
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& r : repairs) reps.push_back({{"from", r.from}, {"to", r.to}, {"strength", r.strength}});
  j["repairs"] = reps;
  j["order"] = order;
  j["solver_status"] = solver_status;
  return j;
}

}  // namespace cpop

#include "cpop/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "cpop/error.hpp"

namespace cpop {

namespace {
constexpr double kBoxTol = 1e-9;
constexpr std::size_t kNoPair = static_cast<std::size_t>(-1);
}  // namespace

EdgeIndexMap::EdgeIndexMap(int D) : D_(D) {
  if (D < 1) throw InvalidInput("node count must be positive");
  lookup_.assign(static_cast<std::size_t>(D) * D, kNoPair);
  for (int i = 0; i < D; ++i) {
    for (int j = i + 1; j < D; ++j) {
      const std::size_t e = pairs_.size();
      pairs_.emplace_back(i, j);
      lookup_[static_cast<std::size_t>(i) * D + j] = e;
      lookup_[static_cast<std::size_t>(j) * D + i] = e;
    }
  }
}

std::size_t EdgeIndexMap::index(int i, int j) const {
  if (i == j) throw InvalidInput("edge_index: self pair (" + std::to_string(i) + ")");
  if (i < 0 || j < 0 || i >= D_ || j >= D_) throw InvalidInput("edge_index: node out of range");
  return lookup_[static_cast<std::size_t>(i) * D_ + j];
}

StructureParams::StructureParams(std::vector<double> p_, std::vector<double> q_,
                                 std::vector<double> lambda_)
    : p(std::move(p_)), q(std::move(q_)), lambda(std::move(lambda_)) {
  if (p.size() != q.size()) throw InvalidInput("p and q lengths differ");
  if (!lambda.empty() && lambda.size() != p.size() + 1) {
    throw InvalidInput("lambda must have Dbar + 1 entries");
  }
  for (double v : p)
    if (!(std::abs(v) <= 1.0 + kBoxTol)) throw InvalidInput("p outside [-1, 1]");
  for (double v : q)
    if (!(v >= -kBoxTol && v <= 1.0 + kBoxTol)) throw InvalidInput("q outside [0, 1]");
  for (double v : lambda)
    if (!(v >= -kBoxTol)) throw InvalidInput("negative multiplier");
}

std::vector<double> StructureParams::flatten() const {
  const std::size_t dbar = p.size();
  std::vector<double> x(3 * dbar + 1, 0.0);
  for (std::size_t e = 0; e < dbar; ++e) {
    x[e] = q[e];
    x[dbar + e] = p[e];
  }
  for (std::size_t k = 0; k < lambda.size(); ++k) x[2 * dbar + k] = lambda[k];
  return x;
}

StructureParams StructureParams::from_flat(std::span<const double> x, std::size_t dbar,
                                           bool with_lambda) {
  StructureParams s;
  s.q.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(dbar));
  s.p.assign(x.begin() + static_cast<std::ptrdiff_t>(dbar),
             x.begin() + static_cast<std::ptrdiff_t>(2 * dbar));
  if (with_lambda) {
    s.lambda.assign(x.begin() + static_cast<std::ptrdiff_t>(2 * dbar),
                    x.begin() + static_cast<std::ptrdiff_t>(3 * dbar + 1));
  }
  return s;
}

Polynomial edge_weight_poly(const EdgeIndexMap& map, int from, int to, std::size_t nvars) {
  const VarLayout lay{map.size()};
  const std::size_t e = map.index(from, to);
  const Monomial pq = Monomial{{lay.p(e), 1}, {lay.q(e), 1}};
  Polynomial w(nvars);
  if (from < to) {
    w.add_term(pq, 1.0);
  } else {
    w.add_term(Monomial::variable(lay.p(e)), 1.0);
    w.add_term(pq, -1.0);
  }
  return w;
}

Eigen::MatrixXd assemble_W(const StructureParams& params, const EdgeIndexMap& map) {
  const int D = map.nodes();
  if (params.p.size() != map.size()) throw InvalidInput("params do not match the edge map");
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(D, D);
  for (std::size_t e = 0; e < map.size(); ++e) {
    const auto [i, j] = map.pair(e);
    W(i, j) = params.p[e] * params.q[e];
    W(j, i) = params.p[e] * (1.0 - params.q[e]);
  }
  return W;
}

std::vector<Polynomial> acyclicity_polys(const EdgeIndexMap& map, int k_max, std::size_t nvars) {
  const int D = map.nodes();
  if (k_max < 2 || k_max > D) throw InvalidInput("k_max must lie in [2, D]");
  const VarLayout lay{map.size()};
  // Walk matrix with polynomial entries; zero polynomials off the pairs.
  std::vector<std::vector<Polynomial>> A(D, std::vector<Polynomial>(D, Polynomial(nvars)));
  for (std::size_t e = 0; e < map.size(); ++e) {
    const auto [i, j] = map.pair(e);
    const Monomial p2 = Monomial::variable(lay.p(e), 2);
    const Monomial p2q = p2 * Monomial::variable(lay.q(e));
    A[i][j].add_term(p2q, 1.0);
    A[j][i].add_term(p2, 1.0);
    A[j][i].add_term(p2q, -1.0);
  }
  std::vector<Polynomial> out;
  auto power = A;  // A^k
  for (int k = 2; k <= k_max; ++k) {
    std::vector<std::vector<Polynomial>> next(D, std::vector<Polynomial>(D, Polynomial(nvars)));
    for (int i = 0; i < D; ++i)
      for (int m = 0; m < D; ++m) {
        if (power[i][m].is_zero()) continue;
        for (int j = 0; j < D; ++j) {
          if (A[m][j].is_zero()) continue;
          next[i][j] += power[i][m] * A[m][j];
        }
      }
    power = std::move(next);
    Polynomial tr(nvars);
    for (int i = 0; i < D; ++i) tr += power[i][i];
    out.push_back(std::move(tr));
  }
  return out;
}

Adjacency round_params(const StructureParams& params, const EdgeIndexMap& map, double tau_p) {
  if (!(tau_p > 0.0 && tau_p < 1.0)) throw InvalidInput("tau_p must lie in (0, 1)");
  const int D = map.nodes();
  Adjacency adj = Adjacency::Zero(D, D);
  for (std::size_t e = 0; e < map.size(); ++e) {
    if (std::abs(params.p[e]) < tau_p) continue;
    const auto [i, j] = map.pair(e);
    if (params.q[e] >= 0.5) {
      adj(i, j) = 1;
    } else {
      adj(j, i) = 1;
    }
  }
  return adj;
}

std::vector<int> find_cycle(const Adjacency& adj) {
  const int D = static_cast<int>(adj.rows());
  std::vector<int> color(D, 0), parent(D, -1);
  std::vector<int> cycle;
  std::function<bool(int)> dfs = [&](int u) {
    color[u] = 1;
    for (int v = 0; v < D; ++v) {
      if (!adj(u, v)) continue;
      if (color[v] == 1) {
        // back edge u -> v closes a cycle v -> ... -> u -> v
        for (int w = u; w != v; w = parent[w]) cycle.push_back(w);
        cycle.push_back(v);
        std::reverse(cycle.begin(), cycle.end());
        return true;
      }
      if (color[v] == 0) {
        parent[v] = u;
        if (dfs(v)) return true;
      }
    }
    color[u] = 2;
    return false;
  };
  for (int s = 0; s < D; ++s)
    if (color[s] == 0 && dfs(s)) return cycle;
  return {};
}

bool is_acyclic(const Adjacency& adj) { return find_cycle(adj).empty(); }

std::size_t edge_count(const Adjacency& adj) {
  std::size_t n = 0;
  for (int i = 0; i < adj.rows(); ++i)
    for (int j = 0; j < adj.cols(); ++j)
      if (i != j && adj(i, j)) ++n;
  return n;
}

nlohmann::json graph_to_json(const Adjacency& adj) {
  nlohmann::json edges = nlohmann::json::array();
  for (int i = 0; i < adj.rows(); ++i)
    for (int j = 0; j < adj.cols(); ++j)
      if (adj(i, j)) edges.push_back({i, j});
  return {{"D", adj.rows()}, {"edges", edges}};
}

Adjacency graph_from_json(const nlohmann::json& j) {
  const int D = j.at("D").get<int>();
  if (D < 1) throw InvalidInput("graph JSON: D must be positive");
  Adjacency adj = Adjacency::Zero(D, D);
  for (const auto& e : j.at("edges")) {
    const int a = e.at(0).get<int>(), b = e.at(1).get<int>();
    if (a < 0 || b < 0 || a >= D || b >= D || a == b) throw InvalidInput("graph JSON: bad edge");
    adj(a, b) = 1;
  }
  return adj;
}

}  // namespace cpop

#pragma once

// Edge parameterization of a causal graph on D nodes: one (q_e, p_e) pair
// per unordered node pair, the weighted adjacency W built from them, and
// the walk-count acyclicity polynomials.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cpop/poly.hpp"

namespace cpop {

using Adjacency = Eigen::MatrixXi;

class EdgeIndexMap {
 public:
  explicit EdgeIndexMap(int D);

  int nodes() const { return D_; }
  // Dbar = D(D-1)/2.
  std::size_t size() const { return pairs_.size(); }
  std::size_t index(int i, int j) const;
  // (i, j) with i < j.
  std::pair<int, int> pair(std::size_t e) const { return pairs_.at(e); }

 private:
  int D_;
  std::vector<std::pair<int, int>> pairs_;
  std::vector<std::size_t> lookup_;  // D x D, row-major
};

// Variable positions inside x = (q, p, lambda). The bilevel problem uses
// only the first 2*Dbar slots; the single-level problem appends Dbar + 1
// multipliers with lambda_0 first.
struct VarLayout {
  std::size_t dbar = 0;

  VarIndex q(std::size_t e) const { return static_cast<VarIndex>(e); }
  VarIndex p(std::size_t e) const { return static_cast<VarIndex>(dbar + e); }
  VarIndex lambda(std::size_t k) const { return static_cast<VarIndex>(2 * dbar + k); }
  std::size_t bilevel_vars() const { return 2 * dbar; }
  std::size_t pop_vars() const { return 3 * dbar + 1; }
};

struct StructureParams {
  std::vector<double> p;
  std::vector<double> q;
  std::vector<double> lambda;

  StructureParams() = default;
  StructureParams(std::vector<double> p_, std::vector<double> q_, std::vector<double> lambda_ = {});

  // Flat x = (q, p, lambda) in VarLayout order; lambda padded with zeros
  // when absent.
  std::vector<double> flatten() const;
  static StructureParams from_flat(std::span<const double> x, std::size_t dbar,
                                   bool with_lambda);
};

// Polynomial weight of the directed edge from -> to, in the 2*Dbar (or
// larger) variable universe: p_e*q_e when from < to, else p_e*(1 - q_e).
Polynomial edge_weight_poly(const EdgeIndexMap& map, int from, int to, std::size_t nvars);

Eigen::MatrixXd assemble_W(const StructureParams& params, const EdgeIndexMap& map);

// h_k = trace(A^k) for k = 2..k_max, with A_ij = p_e^2 q_e and
// A_ji = p_e^2 (1 - q_e) for i < j.
std::vector<Polynomial> acyclicity_polys(const EdgeIndexMap& map, int k_max, std::size_t nvars);

Adjacency round_params(const StructureParams& params, const EdgeIndexMap& map, double tau_p);

bool is_acyclic(const Adjacency& adj);
// Nodes on some directed cycle (empty when acyclic); found by DFS.
std::vector<int> find_cycle(const Adjacency& adj);
std::size_t edge_count(const Adjacency& adj);

nlohmann::json graph_to_json(const Adjacency& adj);
Adjacency graph_from_json(const nlohmann::json& j);

}  // namespace cpop

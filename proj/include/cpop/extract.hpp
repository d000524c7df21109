#pragma once

// From a relaxation solution to a DAG: first-order moment extraction,
// the binary optimality certificate, thresholding with cycle repair, and
// least-squares refitting of the surviving edges.

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cpop/bilevel.hpp"
#include "cpop/dataset.hpp"
#include "cpop/graph.hpp"
#include "cpop/poly.hpp"

namespace cpop {

// Reads q, p and the Dbar + 1 multipliers from the degree-one moments and
// clips them to [0,1], [-1,1] and [0,1]. Missing lambda moments are
// allowed (zero); missing q or p moments throw MissingMoment.
StructureParams extract_params(const MomentVector& y, const EdgeIndexMap& map);

struct Certificate {
  bool certified = false;
  double upper = 0.0;  // max |f_i|
  double lower = 0.0;  // max |g_j|, with g_j > 0 counted as violation
  nlohmann::json to_json() const;
};

// True iff every upper inequality f_i lies in [-eps, eps] and every lower
// inequality g_j in [-eps, 0] up to eps.
Certificate certify(const StructureParams& params, const SingleLevelPOP& pop, double eps = 1e-4);

struct Repair {
  int from = 0;
  int to = 0;
  double strength = 0.0;
};

struct RoundResult {
  Adjacency adj;
  std::vector<Repair> repairs;
};

// Thresholds with round_params, then removes the weakest edge on each
// remaining directed cycle (strength |p_e q_e| or |p_e (1 - q_e)|).
RoundResult round_and_repair(const StructureParams& params, const EdgeIndexMap& map,
                             double tau_p = 0.3);

struct RefitResult {
  Eigen::MatrixXd W;  // W(j, i) for j -> i
  bool rank_deficient = false;
};

// Per-node least squares on the parents over the observational rows;
// minimum-norm solution when the design is rank deficient.
RefitResult refit_weights(const Adjacency& adj, const Dataset& ds);

struct LearnedGraph {
  Adjacency adj;
  Eigen::MatrixXd W;
  bool rank_deficient = false;
  Certificate certificate;
  std::vector<Repair> repairs;
  int order = 0;
  std::string solver_status;

  nlohmann::json to_json() const;
};

}  // namespace cpop

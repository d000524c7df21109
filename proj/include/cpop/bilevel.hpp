#pragma once

// Bilevel structure-learning program and its single-level reformulation
// through the Fritz-John/KKT conditions of the lower problem in p.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpop/dataset.hpp"
#include "cpop/graph.hpp"
#include "cpop/poly.hpp"
#include "cpop/scoring.hpp"

namespace cpop {

// Upper inequalities are stored as f_i <= 0, lower ones as g_j <= 0.
struct BilevelProblem {
  std::size_t dbar = 0;
  int nodes = 0;
  int k_max = 0;  // longest closed walk the acyclicity constraints see
  Polynomial F;
  std::vector<Polynomial> upper_ineqs;
  std::size_t n_acyclic = 0;  // leading entries of upper_ineqs that are h_k
  Polynomial G;
  std::vector<Polynomial> lower_ineqs;  // g_j depends on p_j only

  std::size_t nvars() const { return 2 * dbar; }
  std::size_t I() const { return upper_ineqs.size(); }
  std::size_t J() const { return lower_ineqs.size(); }
};

BilevelProblem build_bilevel(const Dataset& ds, const ScoreConfig& cfg, const EdgeIndexMap& map,
                             int k_max, const FeatureMap& features);

// g(p) = -p^2 (1 - p^2) for the given variable.
Polynomial lower_box_poly(std::size_t nvars, VarIndex p);

// The bilevel problem seen by a single pair e: every other pair's (q, p)
// is fixed to `x` (flat (q, p) vector), the result lives on two variables
// (q, p) with dbar = 1. The acyclicity constraints become "the pair adds
// no closed walk of length <= k_max": one constraint
// (p^2 q)^s (p^2 (1 - q))^t <= 0 per walk class that uses the forward arc
// s times and the backward arc t times and has positive weight under the
// fixed pairs. Each class is nonnegative on the box, so this is the same
// feasible set as the summed traces without their tiny cancelling terms.
BilevelProblem restrict_to_pair(const BilevelProblem& bp, std::size_t e, std::span<const double> x);

enum class MultiplierNormalization { Sphere, None };

enum class ConstraintKind { Upper, Multiplier, LowerBox };

struct SingleLevelPOP {
  std::size_t dbar = 0;
  std::size_t I = 0;
  std::size_t n_acyclic = 0;  // leading upper inequalities that are -h_k
  std::size_t J = 0;
  Polynomial objective;
  std::vector<Polynomial> ineqs;  // fhat_k >= 0
  std::vector<Polynomial> eqs;    // ghat_k = 0: dbar stationarity, then J complementarity
  // lambda_0^2 + sum lambda_j^2 - 1 = 0 when the sphere normalization is on.
  std::optional<Polynomial> normalization;
  // Lower-level data, kept for multiplier recovery and residual checks.
  Polynomial G;
  std::vector<Polynomial> lower_ineqs;

  std::size_t nvars() const { return 3 * dbar + 1; }
  ConstraintKind ineq_kind(std::size_t k) const;
  // All equality constraints in assembly order (normalization last).
  std::vector<Polynomial> all_eqs() const;
  nlohmann::json to_json() const;
};

SingleLevelPOP kkt_reformulate(const BilevelProblem& bp,
                               MultiplierNormalization norm = MultiplierNormalization::Sphere);

struct KktResidual {
  double stationarity = 0.0;
  double complementarity = 0.0;
  double sign = 0.0;         // lambda >= 0 and -g_j >= 0
  double inequality = 0.0;   // upper inequalities
  double normalization = 0.0;
  double max() const;
  nlohmann::json to_json() const;
};

KktResidual verify_kkt(const SingleLevelPOP& pop, std::span<const double> x);

// Multipliers for a given (q, p): tries the lambda_0 > 0 branch from the
// closed form a_j = -dG/dp_j / dg_j/dp_j on active constraints and the
// lambda_0 = 0 branch (weight on pairs with p_j = 0), returns whichever
// leaves the smaller residual. Output has J + 1 entries.
std::vector<double> recover_multipliers(const SingleLevelPOP& pop, std::span<const double> q,
                                        std::span<const double> p, double active_tol = 1e-6);

}  // namespace cpop

#pragma once

// End-to-end structure learning: scores -> bilevel program -> KKT
// single-level program -> sparse moment relaxation -> interior-point solve
// -> extraction, certificate, rounding, repair and refit.
//
// Two strategies share every stage. `Global` relaxes the whole program in
// one SDP. `Block` sweeps over node pairs: each pair's (q, p) is solved by
// its own relaxation with every other pair fixed, optionally pulled toward
// an anchor by rho * ||(q, p) - anchor||^2. `Auto` uses Global when there
// is a single pair and Block otherwise.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpop/bilevel.hpp"
#include "cpop/conic.hpp"
#include "cpop/dataset.hpp"
#include "cpop/extract.hpp"
#include "cpop/graph.hpp"
#include "cpop/moment.hpp"
#include "cpop/scoring.hpp"

namespace cpop {

enum class Strategy { Global, Block, Auto };

struct LearnConfig {
  ScoreConfig score;
  int k_max = 3;
  int order = 0;  // 0 means d_min of each relaxed program
  double tau_p = 0.3;
  double eps_cert = 1e-4;
  TermSparsity term_sparsity = TermSparsity::On;
  MultiplierNormalization normalization = MultiplierNormalization::Sphere;
  Strategy strategy = Strategy::Auto;
  double rho = 0.1;
  int max_sweeps = 20;
  double sweep_tol = 1e-4;
  bool observational_only = false;  // alpha-weighted observational score only
  // A solve that stops short of the tolerances is still used when the
  // worst residual of its best iterate is at most this; otherwise the pair
  // keeps its previous value and the solve counts as rejected.
  double accept_tol = 1e-4;
  // Block strategy only: extra descents that visit the pairs in a seeded
  // random order; the run with the lowest upper objective is kept.
  int restarts = 3;
  std::uint64_t seed = 0;
  SolveOptions solver;

  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown enum strings throw
  // InvalidInput naming the field.
  static LearnConfig from_json(const nlohmann::json& j);
};

// Everything derived from the data once per run.
struct LearnProblem {
  EdgeIndexMap map{2};
  FeatureMap features;
  BilevelProblem bilevel;
};

LearnProblem prepare_problem(const Dataset& ds, const LearnConfig& cfg);

// x = (q, p) of length 2 * Dbar.
using PairState = std::vector<double>;
PairState initial_state(std::size_t dbar);

struct SubproblemLog {
  int sweep = 0;
  std::size_t pair = 0;
  SolveStatus status = SolveStatus::Optimal;
  double objective = 0.0;
  int iterations = 0;
  double merit = 0.0;  // worst of primal, dual residual and gap
  bool accepted = true;
  std::vector<TraceRow> trace;
};

struct SweepResult {
  PairState x;
  double drift = 0.0;  // max-norm change over the sweep
  std::vector<SubproblemLog> logs;
  nlohmann::json sparsity;  // report of the first subproblem
};

// One Gauss-Seidel pass over all pairs starting from `x`, in index order
// or in `visit` order when given.
SweepResult block_sweep(const BilevelProblem& bp, const PairState& x,
                        const std::optional<PairState>& anchor, const LearnConfig& cfg, int sweep = 0,
                        std::span<const std::size_t> visit = {});

// Pair visiting order of descent `restart`: identity for restart 0, a
// permutation seeded by (seed, restart) otherwise.
std::vector<std::size_t> visit_order(std::size_t dbar, std::uint64_t seed, int restart);

struct LearnResult {
  LearnedGraph graph;
  StructureParams params;
  int sweeps = 0;
  std::vector<double> drift;
  int restart = 0;                         // descent that was kept
  std::vector<double> restart_objectives;  // upper objective per descent
  std::vector<SubproblemLog> logs;
  nlohmann::json sparsity;
  // Worst status over all solves; Optimal only if every solve was.
  SolveStatus status = SolveStatus::Optimal;
  int optimal_solves = 0;
  int accepted_solves = 0;  // not Optimal but within accept_tol
  int rejected_solves = 0;

  bool solver_failed() const { return rejected_solves > 0; }
  nlohmann::json summary() const;
};

// Certificate, rounding, repair and refit of a final (q, p).
LearnedGraph finalize(const LearnProblem& prob, const PairState& x, const Dataset& ds,
                      const LearnConfig& cfg, int order, SolveStatus status,
                      StructureParams* params_out = nullptr);

LearnResult learn(const Dataset& ds, const LearnConfig& cfg);

SolveStatus worst_status(SolveStatus a, SolveStatus b);

}  // namespace cpop

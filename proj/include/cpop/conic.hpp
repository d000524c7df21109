#pragma once

// Primal-dual interior-point solver for
//
//   min  c'y + c0   s.t.  Z_b = A0_b + sum_k y_k A_k^b  PSD for each block b,
//                         E y = h,
//
// with Nesterov-Todd scaling and Mehrotra predictor-corrector steps. The
// dual variables are one PSD matrix X_b per block and a vector mu for the
// equalities.

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cpop {

struct SymEntry {
  int i = 0;
  int j = 0;  // i <= j
  double v = 0.0;
};

struct ConicBlock {
  int n = 0;
  std::vector<SymEntry> A0;
  // (variable, upper-triangular entries of A_k), variables ascending.
  std::vector<std::pair<int, std::vector<SymEntry>>> terms;

  Eigen::MatrixXd constant_matrix() const;
  // A0 + sum y_k A_k
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& y) const;
};

struct ConicProgram {
  int m = 0;
  Eigen::VectorXd c;
  double c0 = 0.0;
  std::vector<ConicBlock> blocks;
  Eigen::MatrixXd E;  // rows x m, possibly 0 rows
  Eigen::VectorXd h;

  void validate() const;
};

enum class SolveStatus { Optimal, MaxIterations, Infeasible, NumericalTrouble };
std::string to_string(SolveStatus s);

struct SolveOptions {
  double feas_tol = 1e-7;
  double gap_tol = 1e-7;
  int max_iter = 200;
  // Stop with NumericalTrouble when the worst residual has not halved
  // within this many iterations.
  int progress_window = 10;
};

struct TraceRow {
  int iter = 0;
  double pobj = 0.0, dobj = 0.0, gap = 0.0, pinf = 0.0, dinf = 0.0, mu = 0.0;
  double step_primal = 0.0, step_dual = 0.0;
};

struct SolveResult {
  Eigen::VectorXd y;
  double objective = 0.0;
  double dual_objective = 0.0;
  SolveStatus status = SolveStatus::NumericalTrouble;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  std::vector<Eigen::MatrixXd> X;  // dual blocks
  std::vector<TraceRow> trace;
};

SolveResult solve(const ConicProgram& prog, const SolveOptions& opts = {});

void write_trace_csv(const std::vector<TraceRow>& trace, std::ostream& out);

}  // namespace cpop

#pragma once

// Moment relaxation of a single-level POP: per-clique moment and
// localizing matrices (split by term sparsity), linear equalities from the
// equality constraints, assembled into a ConicProgram over the moment
// variables y_alpha (y_0 = 1 is substituted into the constant part).

#include <iosfwd>
#include <map>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cpop/bilevel.hpp"
#include "cpop/conic.hpp"
#include "cpop/poly.hpp"
#include "cpop/sparsity.hpp"

namespace cpop {

enum class BlockKind { Moment, LocalizingIneq, LocalizingEq };

// Entry (a, b) is the polynomial g * basis[a] * basis[b]; the matrix of
// the relaxation is its image under L_y.
struct SdpBlock {
  BlockKind kind = BlockKind::Moment;
  int clique = 0;
  int constraint = -1;  // index into CliqueSet::constraints, -1 for moment blocks
  std::vector<Monomial> basis;
  std::vector<Polynomial> entries;  // row-major r x r

  int size() const { return static_cast<int>(basis.size()); }
  const Polynomial& at(int a, int b) const { return entries[static_cast<std::size_t>(a) * basis.size() + b]; }
  Eigen::MatrixXd evaluate(const MomentVector& y) const;
};

SdpBlock moment_block(const std::vector<VarIndex>& clique, int d, std::size_t nvars);
// Throws InvalidAssignment when g uses a variable outside the clique.
SdpBlock localizing_block(const Polynomial& g, const std::vector<VarIndex>& clique, int order);

int d_min(const SingleLevelPOP& pop);

enum class TermSparsity { On, Off };

struct SdpProblem {
  ConicProgram program;
  std::vector<Monomial> monomials;            // variable k <-> monomials[k]
  std::map<Monomial, int, GrlexLess> index;   // inverse of monomials
  std::vector<SdpBlock> blocks;               // one per PSD block of the program
  std::size_t equality_rows = 0;
  std::size_t skipped_equality_rows = 0;      // rows touching unregistered moments
  int order = 0;

  MomentVector moments(const Eigen::VectorXd& y) const;
  nlohmann::json report() const;
};

SdpProblem assemble_sdp(const SingleLevelPOP& pop, const CliqueSet& cliques, int d,
                        TermSparsity tsp = TermSparsity::On);

// Sparse SDPA-like dump: sizes, then "block row col value" per variable.
void write_sdpa(const SdpProblem& sdp, std::ostream& out);

// Minimum eigenvalue over every block evaluated at y.
double min_block_eigenvalue(const SdpProblem& sdp, const Eigen::VectorXd& y);

}  // namespace cpop

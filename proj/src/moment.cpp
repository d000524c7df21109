#include "cpop/moment.hpp"

#include <algorithm>
#include <limits>
#include <ostream>

#include "cpop/error.hpp"

namespace cpop {

namespace {

int half_degree(const Polynomial& f) { return static_cast<int>(degree_and_halfdeg(f).half_degree); }

bool covers(const std::vector<VarIndex>& clique, const Polynomial& g) {
  const auto vars = g.variables();
  return std::includes(clique.begin(), clique.end(), vars.begin(), vars.end());
}

SdpBlock sub_block(BlockKind kind, const Polynomial& g, const std::vector<Monomial>& basis,
                   const std::vector<int>& rows) {
  SdpBlock blk;
  blk.kind = kind;
  for (int r : rows) blk.basis.push_back(basis[r]);
  const std::size_t n = blk.basis.size();
  blk.entries.reserve(n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      blk.entries.push_back(g * Polynomial::monomial(g.nvars(), blk.basis[a] * blk.basis[b]));
  return blk;
}

std::vector<int> all_rows(std::size_t n) {
  std::vector<int> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = static_cast<int>(i);
  return r;
}

}  // namespace

Eigen::MatrixXd SdpBlock::evaluate(const MomentVector& y) const {
  const int n = size();
  Eigen::MatrixXd M(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) M(a, b) = apply_Ly(y, at(a, b));
  return M;
}

SdpBlock moment_block(const std::vector<VarIndex>& clique, int d, std::size_t nvars) {
  if (d < 1) throw InvalidInput("moment_block: order must be >= 1");
  const auto basis = make_basis(clique, d);
  return sub_block(BlockKind::Moment, Polynomial::constant(nvars, 1.0), basis, all_rows(basis.size()));
}

SdpBlock localizing_block(const Polynomial& g, const std::vector<VarIndex>& clique, int order) {
  if (order < 0) throw OrderError("localizing_block: negative order");
  std::vector<VarIndex> sorted = clique;
  std::sort(sorted.begin(), sorted.end());
  if (!covers(sorted, g)) throw InvalidAssignment("localizing_block: constraint leaves the clique");
  const auto basis = make_basis(sorted, order);
  return sub_block(BlockKind::LocalizingIneq, g, basis, all_rows(basis.size()));
}

int d_min(const SingleLevelPOP& pop) {
  int d = std::max(1, half_degree(pop.objective));
  for (const auto& f : pop.ineqs) d = std::max(d, half_degree(f));
  for (const auto& g : pop.all_eqs()) d = std::max(d, half_degree(g));
  return d;
}

SdpProblem assemble_sdp(const SingleLevelPOP& pop, const CliqueSet& cs, int d, TermSparsity tsp) {
  const int dm = d_min(pop);
  if (d < dm) {
    throw OrderError("relaxation order " + std::to_string(d) + " below d_min = " + std::to_string(dm));
  }
  const std::size_t nvars = pop.nvars();
  SdpProblem sdp;
  sdp.order = d;

  const std::size_t L = cs.extended.size();
  std::vector<MonomialSet> support(L);
  for (std::size_t l = 0; l < L; ++l) {
    support[l].insert(Monomial{});
    for (const auto& [m, c] : pop.objective.terms()) {
      const auto vars = m.variables();
      if (std::includes(cs.extended[l].begin(), cs.extended[l].end(), vars.begin(), vars.end())) {
        support[l].insert(m);
      }
    }
  }
  for (std::size_t k = 0; k < cs.constraints.size(); ++k) {
    const auto& rc = cs.constraints[k];
    for (std::size_t l = 0; l < L; ++l) {
      if (cs.assignment[k] != static_cast<int>(l) && !rc.shared) continue;
      for (const auto& [m, c] : rc.poly.terms()) {
        const auto vars = m.variables();
        if (std::includes(cs.extended[l].begin(), cs.extended[l].end(), vars.begin(), vars.end())) {
          support[l].insert(m);
        }
      }
    }
  }

  const Polynomial one = Polynomial::constant(nvars, 1.0);
  for (std::size_t l = 0; l < L; ++l) {
    const auto& ext = cs.extended[l];
    const TspGraph mg = tsp == TermSparsity::On ? build_tsp(ext, d, nullptr, support[l]) : dense_tsp(ext, d);
    for (const auto& comp : mg.blocks) {
      SdpBlock blk = sub_block(BlockKind::Moment, one, mg.basis, comp);
      blk.clique = static_cast<int>(l);
      sdp.blocks.push_back(std::move(blk));
    }
    for (std::size_t k : cs.partition[l]) {
      const auto& rc = cs.constraints[k];
      if (rc.equality) continue;
      const int order = d - half_degree(rc.poly);
      const TspGraph lg = tsp == TermSparsity::On ? build_tsp(ext, order, &rc.poly, support[l])
                                                  : dense_tsp(ext, order);
      for (const auto& comp : lg.blocks) {
        SdpBlock blk = sub_block(BlockKind::LocalizingIneq, rc.poly, lg.basis, comp);
        blk.clique = static_cast<int>(l);
        blk.constraint = static_cast<int>(k);
        sdp.blocks.push_back(std::move(blk));
      }
    }
  }

  // register moment variables in graded-lex order
  MonomialSet registered;
  for (const auto& blk : sdp.blocks)
    for (const auto& e : blk.entries)
      for (const auto& [m, c] : e.terms())
        if (!m.is_constant()) registered.insert(m);
  for (const auto& m : registered) {
    sdp.index.emplace(m, static_cast<int>(sdp.monomials.size()));
    sdp.monomials.push_back(m);
  }
  const int nm = static_cast<int>(sdp.monomials.size());

  ConicProgram& prog = sdp.program;
  prog.m = nm;
  prog.c = Eigen::VectorXd::Zero(nm);
  for (const auto& [m, c] : pop.objective.terms()) {
    if (m.is_constant()) {
      prog.c0 += c;
      continue;
    }
    auto it = sdp.index.find(m);
    if (it == sdp.index.end()) {
      throw InvalidAssignment("objective monomial " + m.to_string() + " is in no moment block");
    }
    prog.c(it->second) += c;
  }

  for (const auto& blk : sdp.blocks) {
    ConicBlock cb;
    cb.n = blk.size();
    std::map<int, std::vector<SymEntry>> terms;
    for (int a = 0; a < cb.n; ++a)
      for (int b = a; b < cb.n; ++b)
        for (const auto& [m, c] : blk.at(a, b).terms()) {
          if (m.is_constant()) {
            cb.A0.push_back({a, b, c});
          } else {
            terms[sdp.index.at(m)].push_back({a, b, c});
          }
        }
    for (auto& [k, es] : terms) cb.terms.emplace_back(k, std::move(es));
    prog.blocks.push_back(std::move(cb));
  }

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  auto add_rows = [&](const Polynomial& g, const std::vector<VarIndex>& vars, int mult_deg) {
    if (mult_deg < 0) return;
    for (const auto& mono : make_basis(vars, mult_deg)) {
      const Polynomial gm = g * Polynomial::monomial(nvars, mono);
      Eigen::VectorXd row = Eigen::VectorXd::Zero(nm);
      double r = 0.0;
      bool ok = true;
      for (const auto& [m, c] : gm.terms()) {
        if (m.is_constant()) {
          r -= c;
          continue;
        }
        auto it = sdp.index.find(m);
        if (it == sdp.index.end()) {
          ok = false;
          break;
        }
        row(it->second) += c;
      }
      if (!ok) {
        ++sdp.skipped_equality_rows;
        continue;
      }
      rows.push_back(std::move(row));
      rhs.push_back(r);
    }
  };
  for (std::size_t k = 0; k < cs.constraints.size(); ++k) {
    const auto& rc = cs.constraints[k];
    if (!rc.equality) continue;
    const int mult_deg = 2 * (d - half_degree(rc.poly));
    if (rc.shared) {
      add_rows(rc.poly, cs.common_vars, mult_deg);
    } else {
      add_rows(rc.poly, cs.extended[cs.assignment[k]], mult_deg);
    }
  }
  prog.E = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), nm);
  prog.h = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    prog.E.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    prog.h(static_cast<Eigen::Index>(r)) = rhs[r];
  }
  sdp.equality_rows = rows.size();
  return sdp;
}

MomentVector SdpProblem::moments(const Eigen::VectorXd& y) const {
  MomentVector mv;
  for (std::size_t k = 0; k < monomials.size(); ++k) mv.set(monomials[k], y(static_cast<Eigen::Index>(k)));
  return mv;
}

nlohmann::json SdpProblem::report() const {
  nlohmann::json j;
  j["order"] = order;
  j["moment_variables"] = monomials.size();
  j["equality_rows"] = equality_rows;
  j["skipped_equality_rows"] = skipped_equality_rows;
  nlohmann::json sizes = nlohmann::json::array();
  std::size_t moment_blocks = 0, localizing_blocks = 0;
  for (const auto& b : blocks) {
    sizes.push_back(b.size());
    (b.kind == BlockKind::Moment ? moment_blocks : localizing_blocks) += 1;
  }
  j["block_sizes"] = sizes;
  j["moment_blocks"] = moment_blocks;
  j["localizing_blocks"] = localizing_blocks;
  return j;
}

void write_sdpa(const SdpProblem& sdp, std::ostream& out) {
  const auto& p = sdp.program;
  out << p.m << " variables\n" << p.blocks.size() << " blocks\n";
  for (const auto& b : p.blocks) out << b.n << ' ';
  out << '\n';
  for (int k = 0; k < p.m; ++k) out << p.c(k) << (k + 1 < p.m ? ' ' : '\n');
  // variable 0 is the constant matrix; variable k+1 is y_k
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    for (const auto& e : p.blocks[b].A0) out << 0 << ' ' << b + 1 << ' ' << e.i + 1 << ' ' << e.j + 1 << ' ' << e.v << '\n';
  }
  for (std::size_t b = 0; b < p.blocks.size(); ++b)
    for (const auto& [k, es] : p.blocks[b].terms)
      for (const auto& e : es) out << k + 1 << ' ' << b + 1 << ' ' << e.i + 1 << ' ' << e.j + 1 << ' ' << e.v << '\n';
  out << p.E.rows() << " equalities\n";
  for (Eigen::Index r = 0; r < p.E.rows(); ++r) {
    for (Eigen::Index k = 0; k < p.E.cols(); ++k)
      if (p.E(r, k) != 0.0) out << r + 1 << ' ' << k + 1 << ' ' << p.E(r, k) << '\n';
    out << r + 1 << " rhs " << p.h(r) << '\n';
  }
}

double min_block_eigenvalue(const SdpProblem& sdp, const Eigen::VectorXd& y) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& b : sdp.program.blocks) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.evaluate(y), Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues()(0));
  }
  return lo;
}

}  // namespace cpop

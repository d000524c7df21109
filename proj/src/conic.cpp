#include "cpop/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "cpop/error.hpp"

namespace cpop {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void add_sym(MatrixXd& M, const std::vector<SymEntry>& entries, double s) {
  for (const auto& e : entries) {
    M(e.i, e.j) += s * e.v;
    if (e.i != e.j) M(e.j, e.i) += s * e.v;
  }
}

double inner(const std::vector<SymEntry>& entries, const MatrixXd& M) {
  double acc = 0.0;
  for (const auto& e : entries) acc += e.v * (e.i == e.j ? M(e.i, e.i) : M(e.i, e.j) + M(e.j, e.i));
  return acc;
}

MatrixXd sym(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

// Largest alpha in (0, inf] with S + alpha dS PSD, given S = F F'.
double max_step(const Eigen::LLT<MatrixXd>& F, const MatrixXd& dS) {
  const auto& L = F.matrixL();
  MatrixXd T = L.solve(dS);
  T = L.solve(T.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym(T), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin < 0.0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

struct Scaling {
  MatrixXd G, Ginv, W;
  VectorXd lam;
};

struct Presolved {
  MatrixXd E;
  VectorXd h;
  bool infeasible = false;
};

Presolved presolve_equalities(const ConicProgram& prog) {
  Presolved p;
  const Eigen::Index rows = prog.E.rows();
  p.E.resize(0, prog.m);
  p.h.resize(0);
  if (rows == 0) return p;
  MatrixXd E = prog.E;
  VectorXd h = prog.h;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double nr = E.row(r).norm();
    if (nr == 0.0) {
      if (std::abs(h(r)) > 1e-12) {
        p.infeasible = true;
        return p;
      }
      continue;
    }
    E.row(r) /= nr;
    h(r) /= nr;
    keep.push_back(r);
  }
  MatrixXd Ek(static_cast<Eigen::Index>(keep.size()), prog.m);
  VectorXd hk(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t a = 0; a < keep.size(); ++a) {
    Ek.row(static_cast<Eigen::Index>(a)) = E.row(keep[a]);
    hk(static_cast<Eigen::Index>(a)) = h(keep[a]);
  }
  if (Ek.rows() == 0) return p;
  // consistency of E y = h
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(Ek);
  cod.setThreshold(1e-10);
  const VectorXd ls = cod.solve(hk);
  if ((Ek * ls - hk).norm() > 1e-8 * (1.0 + hk.norm())) {
    p.infeasible = true;
    return p;
  }
  // independent rows = pivot columns of E'
  Eigen::ColPivHouseholderQR<MatrixXd> qr(Ek.transpose());
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  std::vector<Eigen::Index> idx;
  for (Eigen::Index a = 0; a < rank; ++a) idx.push_back(qr.colsPermutation().indices()(a));
  std::sort(idx.begin(), idx.end());
  p.E.resize(rank, prog.m);
  p.h.resize(rank);
  for (Eigen::Index a = 0; a < rank; ++a) {
    p.E.row(a) = Ek.row(idx[a]);
    p.h(a) = hk(idx[a]);
  }
  return p;
}

}  // namespace

MatrixXd ConicBlock::constant_matrix() const {
  MatrixXd M = MatrixXd::Zero(n, n);
  add_sym(M, A0, 1.0);
  return M;
}

MatrixXd ConicBlock::evaluate(const VectorXd& y) const {
  MatrixXd M = constant_matrix();
  for (const auto& [k, entries] : terms) add_sym(M, entries, y(k));
  return M;
}

void ConicProgram::validate() const {
  if (m < 0 || c.size() != m) throw InvalidInput("conic program: cost vector length differs from m");
  if (E.rows() > 0 && E.cols() != m) throw InvalidInput("conic program: E has wrong column count");
  if (E.rows() != h.size()) throw InvalidInput("conic program: E and h disagree");
  if (blocks.empty() && E.rows() == 0) throw InvalidInput("conic program: nothing to solve");
  for (const auto& b : blocks) {
    auto check = [&](const std::vector<SymEntry>& es) {
      for (const auto& e : es)
        if (e.i < 0 || e.j < e.i || e.j >= b.n) throw InvalidInput("conic program: bad entry");
    };
    check(b.A0);
    for (const auto& [k, es] : b.terms) {
      if (k < 0 || k >= m) throw InvalidInput("conic program: variable out of range");
      check(es);
    }
  }
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::MaxIterations: return "MaxIterations";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::NumericalTrouble: return "NumericalTrouble";
  }
  return "Unknown";
}

void write_trace_csv(const std::vector<TraceRow>& trace, std::ostream& out) {
  out << "iteration,pobj,dobj,gap,pinf,dinf,mu,step_primal,step_dual\n";
  for (const auto& t : trace) {
    out << t.iter << ',' << t.pobj << ',' << t.dobj << ',' << t.gap << ',' << t.pinf << ','
        << t.dinf << ',' << t.mu << ',' << t.step_primal << ',' << t.step_dual << '\n';
  }
}

SolveResult solve(const ConicProgram& prog, const SolveOptions& opts) {
  prog.validate();
  if (opts.max_iter < 1) throw InvalidInput("solve: max_iter must be >= 1");
  SolveResult res;
  const int m = prog.m;
  const auto nb = prog.blocks.size();
  res.y = VectorXd::Zero(m);

  const Presolved pre = presolve_equalities(prog);
  if (pre.infeasible) {
    res.status = SolveStatus::Infeasible;
    return res;
  }
  const MatrixXd& E = pre.E;
  const VectorXd& h = pre.h;
  const Eigen::Index me = E.rows();

  std::vector<MatrixXd> A0(nb), X(nb), Z(nb);
  double norm_A0 = 0.0;
  int total_n = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& blk = prog.blocks[b];
    A0[b] = blk.constant_matrix();
    norm_A0 += A0[b].squaredNorm();
    total_n += blk.n;
    double max_ak = 0.0, ratio = 0.0;
    for (const auto& [k, es] : blk.terms) {
      double nk = 0.0;
      for (const auto& e : es) nk += (e.i == e.j ? 1.0 : 2.0) * e.v * e.v;
      nk = std::sqrt(nk);
      max_ak = std::max(max_ak, nk);
      ratio = std::max(ratio, (1.0 + std::abs(prog.c(k))) / (1.0 + nk));
    }
    const double sn = std::sqrt(static_cast<double>(blk.n));
    const double xi = std::max({10.0, sn, ratio * sn});
    const double zeta = std::max({10.0, sn, A0[b].norm(), max_ak});
    X[b] = xi * MatrixXd::Identity(blk.n, blk.n);
    Z[b] = zeta * MatrixXd::Identity(blk.n, blk.n);
  }
  norm_A0 = std::sqrt(norm_A0);
  std::vector<bool> touched(m, false);
  for (const auto& blk : prog.blocks)
    for (const auto& [k, es] : blk.terms)
      if (!es.empty()) touched[k] = true;
  const double norm_c = prog.c.norm();
  const double norm_h = h.norm();
  VectorXd y = VectorXd::Zero(m);
  VectorXd mu_e = VectorXd::Zero(me);

  auto adjoint = [&](const std::vector<MatrixXd>& M) {
    VectorXd out = VectorXd::Zero(m);
    for (std::size_t b = 0; b < nb; ++b)
      for (const auto& [k, es] : prog.blocks[b].terms) out(k) += inner(es, M[b]);
    return out;
  };
  auto apply = [&](std::size_t b, const VectorXd& v) {
    MatrixXd M = MatrixXd::Zero(prog.blocks[b].n, prog.blocks[b].n);
    for (const auto& [k, es] : prog.blocks[b].terms)
      if (v(k) != 0.0) add_sym(M, es, v(k));
    return M;
  };

  double best_merit = std::numeric_limits<double>::infinity();
  auto record_best = [&](double pinf, double dinf, double gap, double pobj, double dobj) {
    const double merit = std::max({pinf, dinf, gap});
    if (merit < best_merit) {
      best_merit = merit;
      res.y = y;
      res.X = X;
      res.objective = pobj;
      res.dual_objective = dobj;
      res.primal_residual = pinf;
      res.dual_residual = dinf;
      res.gap = gap;
    }
  };

  int stalls = 0;
  double progress_merit = std::numeric_limits<double>::infinity();
  int progress_iter = 0;
  res.status = SolveStatus::MaxIterations;
  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    // residuals
    std::vector<MatrixXd> Rz(nb);
    double rz_norm = 0.0, xz = 0.0, a0x = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      Rz[b] = A0[b] + apply(b, y) - Z[b];
      rz_norm += Rz[b].squaredNorm();
      xz += X[b].cwiseProduct(Z[b]).sum();
      a0x += A0[b].cwiseProduct(X[b]).sum();
    }
    rz_norm = std::sqrt(rz_norm);
    const VectorXd re = h - E * y;
    const VectorXd rd = prog.c - adjoint(X) - E.transpose() * mu_e;
    const double mu = total_n > 0 ? xz / total_n : 0.0;
    const double pobj = prog.c.dot(y) + prog.c0;
    const double dobj = -a0x + h.dot(mu_e) + prog.c0;
    const double pinf = std::max(rz_norm / (1.0 + norm_A0), re.norm() / (1.0 + norm_h));
    const double dinf = rd.norm() / (1.0 + norm_c);
    const double gap =
        std::max(std::abs(pobj - dobj), std::abs(xz)) / (1.0 + std::abs(pobj) + std::abs(dobj));
    record_best(pinf, dinf, gap, pobj, dobj);
    res.iterations = iter;
    const double merit = std::max({pinf, dinf, gap});
    if (merit < 0.5 * progress_merit) {
      progress_merit = merit;
      progress_iter = iter;
    }
    TraceRow row{iter, pobj, dobj, gap, pinf, dinf, mu, 0.0, 0.0};

    if (pinf <= opts.feas_tol && dinf <= opts.feas_tol && gap <= opts.gap_tol) {
      res.status = SolveStatus::Optimal;
      res.trace.push_back(row);
      // the last iterate is the one that met the tolerances
      best_merit = -1.0;
      res.y = y;
      res.X = X;
      res.objective = pobj;
      res.dual_objective = dobj;
      res.primal_residual = pinf;
      res.dual_residual = dinf;
      res.gap = gap;
      break;
    }
    if (iter == opts.max_iter) {
      res.trace.push_back(row);
      break;
    }
    // no halving of the merit for a while: the iterates have stalled
    if (iter - progress_iter >= opts.progress_window) {
      res.status = SolveStatus::NumericalTrouble;
      res.trace.push_back(row);
      break;
    }

    // Nesterov-Todd scaling per block
    std::vector<Scaling> sc(nb);
    std::vector<Eigen::LLT<MatrixXd>> cx(nb), cz(nb);
    bool broken = false;
    for (std::size_t b = 0; b < nb && !broken; ++b) {
      cx[b].compute(X[b]);
      cz[b].compute(Z[b]);
      if (cx[b].info() != Eigen::Success || cz[b].info() != Eigen::Success) {
        broken = true;
        break;
      }
      const MatrixXd L = cx[b].matrixL();
      const MatrixXd R = cz[b].matrixL();
      Eigen::JacobiSVD<MatrixXd> svd(R.transpose() * L, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const VectorXd s = svd.singularValues();
      if (s.minCoeff() <= 0.0 || !std::isfinite(s.maxCoeff())) {
        broken = true;
        break;
      }
      const VectorXd isq = s.array().rsqrt();
      sc[b].lam = s;
      sc[b].G = L * svd.matrixV() * isq.asDiagonal();
      const MatrixXd Linv = L.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(L.rows(), L.cols()));
      sc[b].Ginv = s.array().sqrt().matrix().asDiagonal() * svd.matrixV().transpose() * Linv;
      sc[b].W = sc[b].G * sc[b].G.transpose();
    }
    if (broken) {
      res.status = SolveStatus::NumericalTrouble;
      res.trace.push_back(row);
      break;
    }

    // Schur complement H_kl = sum_b A_k . (W A_l W)
    MatrixXd H = MatrixXd::Zero(m, m);
    for (std::size_t b = 0; b < nb; ++b) {
      const auto& terms = prog.blocks[b].terms;
      const MatrixXd& W = sc[b].W;
      const int n = prog.blocks[b].n;
      for (std::size_t li = 0; li < terms.size(); ++li) {
        const auto& [l, el] = terms[li];
        MatrixXd M;
        if (el.size() * 2 > static_cast<std::size_t>(n)) {
          MatrixXd Al = MatrixXd::Zero(n, n);
          add_sym(Al, el, 1.0);
          M = W * Al * W;
        } else {
          M = MatrixXd::Zero(n, n);
          for (const auto& e : el) {
            M.noalias() += e.v * W.col(e.i) * W.row(e.j);
            if (e.i != e.j) M.noalias() += e.v * W.col(e.j) * W.row(e.i);
          }
        }
        for (std::size_t ki = 0; ki <= li; ++ki) {
          const auto& [k, ek] = terms[ki];
          const double v = inner(ek, M);
          H(k, l) += v;
          if (k != l) H(l, k) += v;
        }
      }
    }
    // variables touched by no block would leave H singular
    const double hscale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    for (int k = 0; k < m; ++k)
      if (!touched[k]) H(k, k) += 1e-10 * hscale;

    // Augmented system [H E'; E 0] (dy, -dmu) = (g, re), LU with refinement.
    MatrixXd K = MatrixXd::Zero(m + me, m + me);
    K.topLeftCorner(m, m) = H;
    if (me > 0) {
      K.topRightCorner(m, me) = E.transpose();
      K.bottomLeftCorner(me, m) = E;
    }
    Eigen::PartialPivLU<MatrixXd> kf(K);
    std::vector<MatrixXd> WRzW(nb);
    for (std::size_t b = 0; b < nb; ++b) WRzW[b] = sc[b].W * Rz[b] * sc[b].W;
    const VectorXd a_wrzw = adjoint(WRzW);

    struct Direction {
      VectorXd dy, dmu;
      std::vector<MatrixXd> dX, dZ;
    };
    auto direction = [&](const std::vector<MatrixXd>& Rc) {
      Direction d;
      VectorXd rhs(m + me);
      rhs.head(m) = adjoint(Rc) - a_wrzw - rd;
      if (me > 0) rhs.tail(me) = re;
      VectorXd sol = kf.solve(rhs);
      // Refine against the block operators rather than K itself, so the
      // step satisfies the linearized dual equation to working accuracy.
      for (int refine = 0; refine < 2; ++refine) {
        const VectorXd dy = sol.head(m);
        std::vector<MatrixXd> WAW(nb);
        for (std::size_t b = 0; b < nb; ++b) WAW[b] = sc[b].W * apply(b, dy) * sc[b].W;
        VectorXd r(m + me);
        r.head(m) = rhs.head(m) - adjoint(WAW);
        if (me > 0) {
          r.head(m) -= E.transpose() * sol.tail(me);
          r.tail(me) = rhs.tail(me) - E * dy;
        }
        sol += kf.solve(r);
      }
      d.dy = sol.head(m);
      d.dmu = -sol.tail(me);
      d.dX.resize(nb);
      d.dZ.resize(nb);
      for (std::size_t b = 0; b < nb; ++b) {
        d.dZ[b] = apply(b, d.dy) + Rz[b];
        d.dX[b] = sym(Rc[b] - sc[b].W * d.dZ[b] * sc[b].W);
      }
      return d;
    };
    auto steps = [&](const Direction& d, double& ax, double& az) {
      ax = std::numeric_limits<double>::infinity();
      az = ax;
      for (std::size_t b = 0; b < nb; ++b) {
        ax = std::min(ax, max_step(cx[b], d.dX[b]));
        az = std::min(az, max_step(cz[b], d.dZ[b]));
      }
    };

    // predictor: Rc = -X
    std::vector<MatrixXd> Rc(nb);
    for (std::size_t b = 0; b < nb; ++b) Rc[b] = -X[b];
    Direction pred = direction(Rc);
    double ax = 0.0, az = 0.0;
    steps(pred, ax, az);
    ax = std::min(1.0, ax);
    az = std::min(1.0, az);
    double xz_aff = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      xz_aff += (X[b] + ax * pred.dX[b]).cwiseProduct(Z[b] + az * pred.dZ[b]).sum();
    }
    const double mu_aff = total_n > 0 ? xz_aff / total_n : 0.0;
    double sigma = mu > 0.0 ? std::pow(std::max(0.0, mu_aff) / mu, 3) : 0.0;
    sigma = std::clamp(sigma, 0.0, 1.0);

    // corrector in the scaled space
    for (std::size_t b = 0; b < nb; ++b) {
      const auto& s = sc[b];
      const MatrixXd dXt = s.Ginv * pred.dX[b] * s.Ginv.transpose();
      const MatrixXd dZt = s.G.transpose() * pred.dZ[b] * s.G;
      MatrixXd Rm = -sym(dXt * dZt);
      for (Eigen::Index i = 0; i < Rm.rows(); ++i) Rm(i, i) += sigma * mu - s.lam(i) * s.lam(i);
      MatrixXd T(Rm.rows(), Rm.cols());
      for (Eigen::Index i = 0; i < Rm.rows(); ++i)
        for (Eigen::Index j = 0; j < Rm.cols(); ++j) T(i, j) = 2.0 * Rm(i, j) / (s.lam(i) + s.lam(j));
      Rc[b] = s.G * T * s.G.transpose();
    }
    Direction corr = direction(Rc);
    steps(corr, ax, az);
    const double tau = 0.98;
    ax = std::min(1.0, tau * ax);
    az = std::min(1.0, tau * az);
    row.step_primal = az;
    row.step_dual = ax;
    res.trace.push_back(row);

    for (std::size_t b = 0; b < nb; ++b) {
      X[b] = sym(X[b] + ax * corr.dX[b]);
      Z[b] = sym(Z[b] + az * corr.dZ[b]);
    }
    y += az * corr.dy;
    if (me > 0) mu_e += ax * corr.dmu;

    if (std::max(ax, az) < 1e-9) {
      if (++stalls >= 3) {
        res.status = SolveStatus::NumericalTrouble;
        break;
      }
    } else {
      stalls = 0;
    }
    if (!y.allFinite()) {
      res.status = SolveStatus::NumericalTrouble;
      break;
    }
  }
  return res;
}

}  // namespace cpop

#pragma once

// Small semidefinite programs with closed-form optima, shared by the unit
// and acceptance suites.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpop/conic.hpp"

namespace cpop::testing {

// Block from dense symmetric matrices: A0 + sum_k y_k A[k].
inline ConicBlock dense_block(const Eigen::MatrixXd& A0, const std::vector<Eigen::MatrixXd>& A) {
  ConicBlock b;
  b.n = static_cast<int>(A0.rows());
  for (int i = 0; i < b.n; ++i)
    for (int j = i; j < b.n; ++j)
      if (A0(i, j) != 0.0) b.A0.push_back({i, j, A0(i, j)});
  for (std::size_t k = 0; k < A.size(); ++k) {
    std::vector<SymEntry> e;
    for (int i = 0; i < b.n; ++i)
      for (int j = i; j < b.n; ++j)
        if (A[k](i, j) != 0.0) e.push_back({i, j, A[k](i, j)});
    if (!e.empty()) b.terms.emplace_back(static_cast<int>(k), std::move(e));
  }
  return b;
}

inline Eigen::MatrixXd sym2(double a, double b, double c) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, b, c;
  return m;
}

inline Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

inline ConicProgram program(int m, std::vector<double> c) {
  ConicProgram p;
  p.m = m;
  p.c = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  p.E.resize(0, m);
  p.h.resize(0);
  return p;
}

inline double min_eig(const ConicProgram& p, const Eigen::VectorXd& y) {
  double lo = INFINITY;
  for (const auto& b : p.blocks) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.evaluate(y));
    lo = std::min(lo, es.eigenvalues().minCoeff());
  }
  return lo;
}

struct AnalyticSdp {
  std::string name;
  ConicProgram program;
  double optimum;
};

inline std::vector<AnalyticSdp> analytic_sdps() {
  std::vector<AnalyticSdp> out;
  const Eigen::MatrixXd I2 = Eigen::Matrix2d::Identity();

  auto p = program(1, {1.0});
  p.blocks.push_back(dense_block(I2, {sym2(0, 1, 0)}));
  out.push_back({"2x2 Schur complement, minimize", p, -1.0});

  p = program(1, {-1.0});
  p.blocks.push_back(dense_block(I2, {sym2(0, 1, 0)}));
  out.push_back({"2x2 Schur complement, maximize", p, -1.0});

  p = program(2, {1.0, 1.0});
  p.blocks.push_back(dense_block(Eigen::Vector2d(-1.0, -2.0).asDiagonal(), {sym2(1, 0, 0), sym2(0, 0, 1)}));
  out.push_back({"diagonal block", p, 3.0});

  // [[y, 1], [1, 1]] PSD iff y >= 1
  p = program(1, {1.0});
  p.blocks.push_back(dense_block(sym2(0, 1, 1), {sym2(1, 0, 0)}));
  out.push_back({"lower-right fixed", p, 1.0});

  // [[y1, 1], [1, y2]] PSD iff y1 y2 >= 1; min 2 y1 + y2 = 2 sqrt(2)
  p = program(2, {2.0, 1.0});
  p.blocks.push_back(dense_block(sym2(0, 1, 0), {sym2(1, 0, 0), sym2(0, 0, 1)}));
  out.push_back({"hyperbolic constraint", p, 2.0 * std::sqrt(2.0)});

  // eigenvalues 1 and 1 +- sqrt(2)|y|
  Eigen::MatrixXd T(3, 3);
  T << 0, 1, 0, 1, 0, 1, 0, 1, 0;
  p = program(1, {1.0});
  p.blocks.push_back(dense_block(Eigen::Matrix3d::Identity(), {T}));
  out.push_back({"tridiagonal 3x3", p, -1.0 / std::sqrt(2.0)});

  p = program(2, {-1.0, -1.0});
  p.blocks.push_back(dense_block(I2, {sym2(0, 1, 0), sym2(0, 0, 0)}));
  p.blocks.push_back(dense_block(sym2(4, 0, 1), {sym2(0, 0, 0), sym2(0, 1, 0)}));
  out.push_back({"two blocks", p, -3.0});

  // y1 + y2 = 0.5 with |y1| <= 1 and y2 >= -1: min y1 = -1
  p = program(2, {1.0, 0.0});
  p.blocks.push_back(dense_block(I2, {sym2(0, 1, 0), sym2(0, 0, 0)}));
  p.blocks.push_back(dense_block(scalar(1.0), {scalar(0.0), scalar(1.0)}));
  p.E = Eigen::RowVector2d(1.0, 1.0);
  p.h = Eigen::VectorXd::Constant(1, 0.5);
  out.push_back({"equality coupling", p, -1.0});

  // min x s.t. 1 - x^2 >= 0: M_1 = [[1, y1], [y1, y2]], localizing 1 - y2
  p = program(2, {1.0, 0.0});
  p.blocks.push_back(dense_block(sym2(1, 0, 0), {sym2(0, 1, 0), sym2(0, 0, 1)}));
  p.blocks.push_back(dense_block(scalar(1.0), {scalar(0.0), scalar(-1.0)}));
  out.push_back({"univariate moment relaxation", p, -1.0});

  p = program(1, {0.0});
  p.blocks.push_back(dense_block(I2, {sym2(0, 1, 0)}));
  out.push_back({"zero objective", p, 0.0});
  return out;
}

}  // namespace cpop::testing

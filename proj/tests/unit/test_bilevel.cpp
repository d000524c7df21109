#include <doctest.h>

#include <random>

#include "cpop/bilevel.hpp"
#include "cpop/error.hpp"

using namespace cpop;

namespace {

Dataset chain2(int n, double w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Dataset ds;
  ds.obs.resize(n, 2);
  for (int r = 0; r < n; ++r) {
    ds.obs(r, 0) = z(rng);
    ds.obs(r, 1) = w * ds.obs(r, 0);
  }
  return ds;
}

Dataset random_ds(int n, int D, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Dataset ds;
  ds.obs.resize(n, D);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < D; ++c) ds.obs(r, c) = z(rng);
  return ds;
}

BilevelProblem make(const Dataset& ds, int k_max, ScoreConfig cfg = {}) {
  EdgeIndexMap map(ds.nodes());
  return build_bilevel(ds, cfg, map, k_max, FeatureMap::linear(ds.nodes()));
}

}  // namespace

TEST_CASE("bilevel constraint counts") {
  auto bp = make(random_ds(20, 2, 1), 2);
  CHECK(bp.I() == 2);
  CHECK(bp.J() == 1);
  bp = make(random_ds(20, 3, 1), 3);
  CHECK(bp.I() == 5);
  CHECK(bp.J() == 3);
  CHECK(bp.n_acyclic == 2);
  const std::vector<double> x{0.0, 0.0, 0.0, 0.5, 0.0, 0.0};
  CHECK(bp.lower_ineqs[0].evaluate(x) == doctest::Approx(-0.1875));
  // Universe is (q, p) only.
  CHECK(bp.F.nvars() == 6);
  CHECK(bp.G.nvars() == 6);
}

TEST_CASE("KKT reformulation layout") {
  const auto bp = make(random_ds(20, 3, 2), 3);
  const auto pop = kkt_reformulate(bp);
  CHECK(pop.nvars() == 10);
  CHECK(pop.ineqs.size() == bp.I() + 2 * bp.J() + 1);
  CHECK(pop.eqs.size() == 2 * bp.dbar);
  CHECK(pop.ineq_kind(0) == ConstraintKind::Upper);
  CHECK(pop.ineq_kind(pop.I) == ConstraintKind::Multiplier);
  CHECK(pop.ineq_kind(pop.I + pop.J) == ConstraintKind::Multiplier);
  CHECK(pop.ineq_kind(pop.I + pop.J + 1) == ConstraintKind::LowerBox);
  REQUIRE(pop.normalization.has_value());
  for (const auto& f : pop.ineqs)
    for (VarIndex v : f.variables()) CHECK(v < pop.nvars());
  for (const auto& g : pop.eqs)
    for (VarIndex v : g.variables()) CHECK(v < pop.nvars());
  CHECK_FALSE(kkt_reformulate(bp, MultiplierNormalization::None).normalization.has_value());
}

TEST_CASE("stationarity with zero data is satisfied at p = 0 by any multipliers") {
  Dataset ds;
  ds.obs = Eigen::MatrixXd::Zero(5, 2);
  ScoreConfig cfg;
  cfg.lambda_sp = 1.0;
  const auto pop = kkt_reformulate(make(ds, 2, cfg));
  for (double l0 : {0.0, 0.3, 1.0})
    for (double l1 : {0.0, 0.7}) {
      const std::vector<double> x{0.4, 0.0, l0, l1};
      CHECK(pop.eqs[0].evaluate(x) == 0.0);
      CHECK(pop.eqs[1].evaluate(x) == 0.0);
    }
}

TEST_CASE("complementarity vanishes for binary-magnitude p") {
  const auto pop = kkt_reformulate(make(random_ds(30, 3, 3), 3));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(pop.nvars());
    for (std::size_t e = 0; e < 3; ++e) {
      x[e] = u(rng);
      x[3 + e] = std::vector<double>{-1.0, 0.0, 1.0}[t % 3];
    }
    for (std::size_t k = 6; k < x.size(); ++k) x[k] = u(rng);
    for (std::size_t j = 0; j < pop.J; ++j) CHECK(pop.eqs[pop.dbar + j].evaluate(x) == 0.0);
  }
}

TEST_CASE("KKT residual at the true point of a noiseless edge") {
  ScoreConfig cfg;
  cfg.lambda_sp = 0.0;
  const auto ds = chain2(100, 1.0, 4);
  const auto pop = kkt_reformulate(make(ds, 2, cfg));
  const std::vector<double> q{1.0}, p{1.0};
  const auto lambda = recover_multipliers(pop, q, p);
  REQUIRE(lambda.size() == 2);
  const std::vector<double> x{1.0, 1.0, lambda[0], lambda[1]};
  CHECK(verify_kkt(pop, x).max() <= 1e-8);

  // Interior lower solution: no active g, so lambda_0 carries all weight.
  Dataset flat;
  flat.obs = Eigen::MatrixXd::Zero(10, 2);
  const auto pop0 = kkt_reformulate(make(flat, 2));
  const std::vector<double> q0{0.5}, p0{0.0};
  const auto l0 = recover_multipliers(pop0, q0, p0);
  const std::vector<double> x0{0.5, 0.0, l0[0], l0[1]};
  CHECK(verify_kkt(pop0, x0).max() <= 1e-10);
}

TEST_CASE("KKT residual flags violations") {
  const auto pop = kkt_reformulate(make(chain2(50, 0.7, 6), 2));
  // q outside the box and negative multiplier.
  const std::vector<double> bad{1.5, 0.3, -0.2, 0.5};
  const auto r = verify_kkt(pop, bad);
  CHECK(r.max() > 0.0);
  CHECK(r.inequality > 0.0);
  CHECK(r.sign > 0.0);

  // Feasible point that is not stationary: p perturbed off the optimum.
  const std::vector<double> q{1.0}, p{1.0};
  const auto lambda = recover_multipliers(pop, q, p);
  const std::vector<double> off{1.0, 0.6, lambda[0], lambda[1]};
  const auto r2 = verify_kkt(pop, off);
  CHECK(r2.stationarity > 1e-3);
  CHECK(r2.inequality == 0.0);
  CHECK(r2.sign == 0.0);
}

TEST_CASE("pair restriction") {
  const auto ds = random_ds(40, 3, 7);
  const auto bp = make(ds, 3);
  // Pairs (0,1) and (1,2) active as 0->1 and 1->2; restricting pair (0,2)
  // must forbid 2->0 (3-cycle) and allow 0->2.
  std::vector<double> x{1.0, 0.5, 1.0, 1.0, 0.0, 1.0};
  const auto sub = restrict_to_pair(bp, 1, x);
  CHECK(sub.dbar == 1);
  CHECK(sub.F.nvars() == 2);
  const std::vector<double> fwd{1.0, 1.0}, back{0.0, 1.0}, none{0.3, 0.0};
  for (std::size_t i = 0; i < sub.n_acyclic; ++i) {
    CHECK(sub.upper_ineqs[i].evaluate(fwd) <= 0.0);
    CHECK(sub.upper_ineqs[i].evaluate(none) <= 0.0);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < sub.n_acyclic; ++i) worst = std::max(worst, sub.upper_ineqs[i].evaluate(back));
  CHECK(worst > 0.0);
  // The restricted objective agrees with the full one.
  std::vector<double> full = x;
  full[1] = 0.3;
  full[4] = -0.6;
  const std::vector<double> local{0.3, -0.6};
  CHECK(sub.F.evaluate(local) == doctest::Approx(bp.F.evaluate(full)).epsilon(1e-12));
  CHECK(sub.G.evaluate(local) == doctest::Approx(bp.G.evaluate(full)).epsilon(1e-12));
  CHECK_THROWS_AS(restrict_to_pair(bp, 3, x), InvalidInput);
}

TEST_CASE("single-level problem json dump") {
  const auto pop = kkt_reformulate(make(random_ds(10, 2, 8), 2));
  const auto j = pop.to_json();
  CHECK(j.contains("objective"));
  CHECK(j.at("ineqs").size() == pop.ineqs.size());
}

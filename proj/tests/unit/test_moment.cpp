#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "cpop/bilevel.hpp"
#include "cpop/error.hpp"
#include "cpop/moment.hpp"
#include "cpop/sparsity.hpp"

using namespace cpop;

namespace {

Dataset chain2(int n, double w, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Dataset ds;
  ds.obs.resize(n, 2);
  for (int r = 0; r < n; ++r) {
    ds.obs(r, 0) = z(rng);
    ds.obs(r, 1) = w * ds.obs(r, 0) + noise * z(rng);
  }
  InterventionBlock blk;
  blk.target = 0;
  blk.data.resize(n, 2);
  for (int r = 0; r < n; ++r) {
    blk.data(r, 0) = 2.0 * z(rng);
    blk.data(r, 1) = w * blk.data(r, 0) + noise * z(rng);
  }
  ds.ints.push_back(blk);
  return ds;
}

SingleLevelPOP pop2(const Dataset& ds, ScoreConfig cfg = {}) {
  EdgeIndexMap map(2);
  return kkt_reformulate(build_bilevel(ds, cfg, map, 2, FeatureMap::linear(2)));
}

double poly_at(const Polynomial& p, const Monomial& m) { return p.coefficient(m); }

}  // namespace

TEST_CASE("d_min") {
  const auto pop = pop2(chain2(40, 0.8, 0.4, 1));
  CHECK(d_min(pop) == 3);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0.0, 1.0);
  Dataset ds3;
  ds3.obs.resize(30, 3);
  for (int r = 0; r < 30; ++r)
    for (int c = 0; c < 3; ++c) ds3.obs(r, c) = z(rng);
  EdgeIndexMap m3(3);
  const auto pop3 = kkt_reformulate(build_bilevel(ds3, ScoreConfig{}, m3, 3, FeatureMap::linear(3)));
  // h_3 has nominal degree 9, but its q_a q_b q_c p^6 terms cancel between
  // the two orientations of the triangle, so the true degree is 8.
  CHECK(pop3.ineqs[1].degree() == 8);
  CHECK(d_min(pop3) == 4);

  SingleLevelPOP lin;
  lin.dbar = 1;
  lin.objective = Polynomial::variable(4, 0);
  lin.ineqs = {Polynomial::variable(4, 1)};
  CHECK(d_min(lin) == 1);
}

TEST_CASE("moment blocks") {
  const std::vector<VarIndex> x{0};
  auto b = moment_block(x, 1, 1);
  REQUIRE(b.size() == 2);
  CHECK((b.at(0, 0) - Polynomial::constant(1, 1.0)).is_zero());
  CHECK((b.at(0, 1) - Polynomial::variable(1, 0)).is_zero());
  CHECK((b.at(1, 1) - Polynomial::monomial(1, Monomial::variable(0, 2))).is_zero());

  const std::vector<VarIndex> xy{0, 1};
  b = moment_block(xy, 1, 2);
  REQUIRE(b.size() == 3);
  std::set<Monomial, GrlexLess> distinct;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      CHECK(b.at(i, j).size() == 1);
      distinct.insert(b.at(i, j).support()[0]);
    }
  CHECK(distinct.size() == 6);  // constant plus five moments
  CHECK(b.at(0, 0).constant_term() == 1.0);
}

TEST_CASE("localizing blocks") {
  const std::vector<VarIndex> x{0};
  Polynomial g = Polynomial::constant(1, 1.0);
  g.add_term(Monomial::variable(0, 2), -1.0);
  auto b = localizing_block(g, x, 0);
  REQUIRE(b.size() == 1);
  CHECK((b.at(0, 0) - g).is_zero());

  // -g_j = p^2 (1 - p^2) at order 0
  Polynomial h(1);
  h.add_term(Monomial::variable(0, 2), 1.0);
  h.add_term(Monomial::variable(0, 4), -1.0);
  b = localizing_block(h, x, 0);
  CHECK(poly_at(b.at(0, 0), Monomial::variable(0, 2)) == 1.0);
  CHECK(poly_at(b.at(0, 0), Monomial::variable(0, 4)) == -1.0);

  // A bare multiplier shifts the moment matrix.
  const std::vector<VarIndex> xl{0, 1};
  const auto lam = Polynomial::variable(2, 1);
  b = localizing_block(lam, xl, 1);
  const auto M = moment_block(xl, 1, 2);
  for (int i = 0; i < b.size(); ++i)
    for (int j = 0; j < b.size(); ++j) CHECK((b.at(i, j) - M.at(i, j) * lam).is_zero());

  const std::vector<VarIndex> other{1};
  CHECK_THROWS_AS(localizing_block(Polynomial::variable(2, 0), other, 0), InvalidAssignment);
}

TEST_CASE("assembly rejects a low order") {
  const auto pop = pop2(chain2(40, 0.8, 0.4, 3));
  CHECK_THROWS_AS(assemble_sdp(pop, generate_cliques(pop), 2), OrderError);
}

TEST_CASE("assembly report matches the golden file") {
  const auto pop = pop2(chain2(100, 0.8, 0.4, 4));
  const auto sdp = assemble_sdp(pop, generate_cliques(pop), 3);
  std::ifstream in(CPOP_TEST_DATA "/golden_sdp_2node.json");
  REQUIRE(in.good());
  const auto golden = nlohmann::json::parse(in);
  auto rep = sdp.report();
  CHECK(rep.at("order") == golden.at("order"));
  CHECK(rep.at("moment_variables") == golden.at("moment_variables"));
  CHECK(rep.at("block_sizes") == golden.at("block_sizes"));
  CHECK(rep.at("equality_rows") == golden.at("equality_rows"));
  // Stable across runs.
  CHECK(assemble_sdp(pop, generate_cliques(pop), 3).report() == rep);
  std::ostringstream dump;
  write_sdpa(sdp, dump);
  CHECK(dump.str().size() > 0);
}

TEST_CASE("dense and sparse assembly agree on two nodes") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto pop = pop2(chain2(100, 0.8, 0.4, 10 + seed));
    const auto sparse = assemble_sdp(pop, generate_cliques(pop), 3, TermSparsity::On);
    const auto dense = assemble_sdp(pop, single_clique(pop), 3, TermSparsity::Off);
    const auto rs = solve(sparse.program);
    const auto rd = solve(dense.program);
    CHECK(std::abs(rs.objective - rd.objective) <= 1e-5);
    CHECK(min_block_eigenvalue(sparse, rs.y) >= -1e-6);
    CHECK(min_block_eigenvalue(dense, rd.y) >= -1e-6);
  }
}

TEST_CASE("zero-data objective vanishes") {
  Dataset ds;
  ds.obs = Eigen::MatrixXd::Zero(10, 2);
  const auto pop = pop2(ds);
  const auto sdp = assemble_sdp(pop, generate_cliques(pop), 3);
  CHECK(sdp.program.c.isZero());
  CHECK(sdp.program.c0 == 0.0);
}

namespace {

// Hand-built program over `dbar` pairs: each pair e carries its own
// objective piece in (q_e, p_e) and box constraints on both. Multiplier
// variables appear in no term.
SingleLevelPOP separable_pop(const std::vector<int>& kinds) {
  const std::size_t dbar = kinds.size();
  SingleLevelPOP pop;
  pop.dbar = dbar;
  const std::size_t n = 3 * dbar + 1;
  pop.objective = Polynomial(n);
  pop.G = Polynomial(n);
  for (std::size_t e = 0; e < dbar; ++e) {
    const auto q = Polynomial::variable(n, static_cast<VarIndex>(e));
    const auto p = Polynomial::variable(n, static_cast<VarIndex>(dbar + e));
    const auto one = Polynomial::constant(n, 1.0);
    if (kinds[e] == 0) {
      const auto d = p - Polynomial::constant(n, 0.3);
      pop.objective = pop.objective + d * d + q * p - Polynomial::constant(n, 0.5) * q;
    } else {
      pop.objective = pop.objective + p * p * p * p - p * p + Polynomial::constant(n, 0.2) * q;
    }
    pop.ineqs.push_back(q * (one - q));
    pop.ineqs.push_back(one - p * p);
  }
  pop.I = pop.ineqs.size();
  return pop;
}

double relaxed_optimum(const SingleLevelPOP& pop, const std::vector<std::vector<int>>& cliques) {
  const auto sdp = assemble_sdp(pop, extend_and_assign(cliques, pop), 2);
  const auto r = solve(sdp.program);
  REQUIRE(r.status == SolveStatus::Optimal);
  return r.objective;
}

}  // namespace

TEST_CASE("independent subproblems relax to the sum of their optima") {
  const double a = relaxed_optimum(separable_pop({0}), {{0}});
  const double b = relaxed_optimum(separable_pop({1}), {{0}});
  const double both = relaxed_optimum(separable_pop({0, 1}), {{0}, {1}});
  CHECK(std::abs(both - (a + b)) <= 1e-6);
  // Piece 0 is minimized at q = 1, p = -0.2; piece 1 at q = 0, p^2 = 1/2.
  CHECK(a == doctest::Approx(-0.45).epsilon(1e-6));
  CHECK(b == doctest::Approx(-0.25).epsilon(1e-6));
}

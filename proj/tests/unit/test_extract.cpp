#include <doctest.h>

#include <random>

#include "cpop/bilevel.hpp"
#include "cpop/error.hpp"
#include "cpop/extract.hpp"
#include "cpop/scoring.hpp"

using namespace cpop;

namespace {

Dataset random_ds(int n, int D, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Dataset ds;
  ds.obs.resize(n, D);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < D; ++c) ds.obs(r, c) = z(rng);
  return ds;
}

// x1 = w x0 + noise * z, plus an intervention on node 0.
Dataset chain2(int n, double w, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Dataset ds;
  ds.obs.resize(n, 2);
  InterventionBlock b{0, Eigen::MatrixXd(n, 2)};
  for (int r = 0; r < n; ++r) {
    ds.obs(r, 0) = z(rng);
    ds.obs(r, 1) = w * ds.obs(r, 0) + noise * z(rng);
    b.data(r, 0) = 2.0 * z(rng);
    b.data(r, 1) = w * b.data(r, 0) + noise * z(rng);
  }
  ds.ints.push_back(b);
  return ds;
}

SingleLevelPOP pop3(std::uint64_t seed) {
  EdgeIndexMap m(3);
  return kkt_reformulate(build_bilevel(random_ds(30, 3, seed), ScoreConfig{}, m, 3, FeatureMap::linear(3)));
}

// Per pair state: 0 none, 1 i->j, 2 j->i.
StructureParams binary(const std::vector<int>& state) {
  std::vector<double> p, q;
  for (int s : state) {
    p.push_back(s == 0 ? 0.0 : 1.0);
    q.push_back(s == 2 ? 0.0 : 1.0);
  }
  return StructureParams(p, q);
}

MomentVector first_moments(const StructureParams& s) {
  MomentVector y;
  const auto x = s.flatten();
  for (std::size_t v = 0; v < x.size(); ++v) y.set(Monomial::variable(static_cast<VarIndex>(v)), x[v]);
  return y;
}

}  // namespace

TEST_CASE("first-order moment extraction") {
  EdgeIndexMap m(2);
  MomentVector y;
  y.set(Monomial::variable(0), 1.0);
  y.set(Monomial::variable(1), 1.0);
  auto s = extract_params(y, m);
  CHECK(s.q[0] == 1.0);
  CHECK(s.p[0] == 1.0);
  CHECK(round_params(s, m, 0.3)(0, 1) == 1);
  CHECK(s.lambda == std::vector<double>{0.0, 0.0});

  y.set(Monomial::variable(0), 1.02);
  y.set(Monomial::variable(1), -1.3);
  y.set(Monomial::variable(2), 0.4);
  s = extract_params(y, m);
  CHECK(s.q[0] == 1.0);
  CHECK(s.p[0] == -1.0);
  CHECK(s.lambda[0] == 0.4);

  MomentVector partial;
  partial.set(Monomial::variable(0), 0.5);
  CHECK_THROWS_AS(extract_params(partial, m), MissingMoment);
}

TEST_CASE("extraction at the brute-force optimum of a 2-node instance") {
  const auto ds = chain2(200, 0.8, 0.0, 1);
  EdgeIndexMap m(2);
  const auto F = upper_objective(ds, ScoreConfig{}, m, FeatureMap::linear(2), 2);
  double best = INFINITY, bq = 0, bp = 0;
  for (double q : {0.0, 1.0})
    for (int k = -100; k <= 100; ++k) {
      const double p = k / 100.0;
      const double v = F.evaluate(std::vector<double>{q, p});
      if (v < best) best = v, bq = q, bp = p;
    }
  MomentVector y;
  y.set(Monomial::variable(0), bq);
  y.set(Monomial::variable(1), bp);
  const auto adj = round_params(extract_params(y, m), m, 0.3);
  CHECK(adj(0, 1) == 1);
  CHECK(adj(1, 0) == 0);
}

TEST_CASE("certificate") {
  const auto pop = pop3(1);
  auto c = certify(binary({1, 1, 1}), pop);
  CHECK(c.certified);
  CHECK(c.upper == 0.0);
  CHECK(c.lower == 0.0);

  auto half = binary({1, 0, 0});
  half.p[0] = 0.5;
  c = certify(half, pop);
  CHECK_FALSE(c.certified);
  CHECK(c.lower == doctest::Approx(0.1875));

  // 0->1, 1->2, 2->0
  c = certify(binary({1, 2, 1}), pop);
  CHECK_FALSE(c.certified);
  CHECK(c.upper == doctest::Approx(3.0));
  CHECK(c.lower == 0.0);

  CHECK_THROWS_AS(certify(binary({1}), pop), InvalidInput);
  const auto j = c.to_json();
  CHECK(j.at("certified") == false);
}

TEST_CASE("certificate is monotone in its tolerance") {
  const auto pop = pop3(2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    auto s = binary({t % 3, (t / 3) % 3, (t / 9) % 3});
    for (std::size_t e = 0; e < 3; ++e) {
      s.p[e] += (u(rng) - 0.5) * 1e-3 * (s.p[e] > 0.5 ? -1.0 : 1.0) * (t % 2);
      s.q[e] = std::clamp(s.q[e] + (u(rng) - 0.5) * 1e-3, 0.0, 1.0);
    }
    bool prev = false;
    for (double eps : {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1}) {
      const bool now = certify(s, pop, eps).certified;
      if (prev) CHECK(now);
      prev = now;
    }
  }
}

TEST_CASE("rounding with cycle repair") {
  EdgeIndexMap m(3);
  auto s = binary({0, 0, 0});
  auto r = round_and_repair(s, m);
  CHECK(edge_count(r.adj) == 0);
  CHECK(r.repairs.empty());

  s = binary({1, 1, 1});
  r = round_and_repair(s, m);
  CHECK(edge_count(r.adj) == 3);
  CHECK(r.repairs.empty());

  // 0->1 (0.9), 1->2 (0.8), 2->0 (0.35)
  s = StructureParams({0.9, 0.35, 0.8}, {1.0, 0.0, 1.0});
  r = round_and_repair(s, m);
  REQUIRE(r.repairs.size() == 1);
  CHECK(r.repairs[0].from == 2);
  CHECK(r.repairs[0].to == 0);
  CHECK(r.repairs[0].strength == doctest::Approx(0.35));
  CHECK(is_acyclic(r.adj));
  CHECK(edge_count(r.adj) == 2);
}

TEST_CASE("rounding output is always acyclic") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uq(0.0, 1.0), up(-1.0, 1.0);
  for (int D = 3; D <= 6; ++D) {
    EdgeIndexMap m(D);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> p(m.size()), q(m.size());
      for (std::size_t e = 0; e < m.size(); ++e) {
        p[e] = up(rng);
        q[e] = uq(rng);
      }
      CHECK(is_acyclic(round_and_repair(StructureParams(p, q), m).adj));
    }
  }
}

TEST_CASE("certified points round without repairs when every cycle length is constrained") {
  const auto pop = pop3(4);
  EdgeIndexMap m(3);
  int certified = 0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        const auto s = binary({a, b, c});
        if (!certify(s, pop).certified) continue;
        ++certified;
        for (double tau : {0.01, 0.3, 0.5, 0.99}) CHECK(round_and_repair(s, m, tau).repairs.empty());
      }
  CHECK(certified == 25);
}

TEST_CASE("least-squares refit") {
  auto ds = chain2(100, 0.8, 0.0, 2);
  Adjacency a = Adjacency::Zero(2, 2);
  a(0, 1) = 1;
  auto r = refit_weights(a, ds);
  CHECK(std::abs(r.W(0, 1) - 0.8) <= 1e-6);
  CHECK(r.W(1, 0) == 0.0);
  CHECK_FALSE(r.rank_deficient);

  CHECK(refit_weights(Adjacency::Zero(2, 2), ds).W.isZero());

  for (std::uint64_t s = 0; s < 5; ++s) {
    ds = chain2(300, 0.8, 0.4, 10 + s);
    CHECK(std::abs(refit_weights(a, ds).W(0, 1) - 0.8) <= 0.15);
  }

  // Duplicate parent columns are flagged and solved by minimum norm.
  Dataset dup;
  dup.obs.resize(50, 3);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  for (int i = 0; i < 50; ++i) {
    dup.obs(i, 0) = z(rng);
    dup.obs(i, 1) = dup.obs(i, 0);
    dup.obs(i, 2) = dup.obs(i, 0);
  }
  Adjacency b = Adjacency::Zero(3, 3);
  b(0, 2) = b(1, 2) = 1;
  r = refit_weights(b, dup);
  CHECK(r.rank_deficient);
  CHECK(r.W(0, 2) == doctest::Approx(0.5));
  CHECK(r.W(1, 2) == doctest::Approx(0.5));

  b(2, 0) = 1;
  CHECK_THROWS_AS(refit_weights(b, dup), InvalidInput);
}

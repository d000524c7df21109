#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cpop/datagen.hpp"
#include "cpop/dataset.hpp"
#include "cpop/error.hpp"

using namespace cpop;

namespace {

double corr(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd x = a.array() - a.mean();
  const Eigen::VectorXd y = b.array() - b.mean();
  return x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm());
}

std::vector<int> parents(const GroundTruthGraph& g, int i) {
  std::vector<int> out;
  for (int j = 0; j < g.nodes(); ++j)
    if (g.adj(j, i)) out.push_back(j);
  return out;
}

bool in_signed_range(double v, double lo, double hi) {
  return std::abs(v) >= lo && std::abs(v) <= hi;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("scale-free DAG sampling") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto rng = derived_rng(s, 0);
    const auto g = sample_sf_dag(5, 8, rng);
    CHECK(is_acyclic(g.adj));
    CHECK(edge_count(g.adj) == 8);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        if (g.adj(i, j)) {
          CHECK(in_signed_range(g.coeff(i, j), 0.4, 1.0));
          CHECK(g.degree(i, j) == 1);
        } else {
          CHECK(g.coeff(i, j) == 0.0);
        }
      }
  }
  auto rng = derived_rng(1, 0);
  const auto g2 = sample_sf_dag(2, 1, rng);
  CHECK(g2.adj(0, 1) + g2.adj(1, 0) == 1);

  auto r1 = derived_rng(7, 0), r2 = derived_rng(7, 0);
  CHECK(sample_sf_dag(6, 9, r1).to_json().dump() == sample_sf_dag(6, 9, r2).to_json().dump());

  CHECK_THROWS_AS(sample_sf_dag(4, 7, rng), InvalidInput);
  CHECK_THROWS_AS(sample_sf_dag(4, 2, rng), InvalidInput);
}

TEST_CASE("polynomial mechanism uses coefficient 0.8 and degrees 1 to 3") {
  bool saw_nonlinear = false;
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto rng = derived_rng(s, 0);
    const auto g = sample_sf_dag(5, 8, rng, Mechanism::Polynomial);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        if (!g.adj(i, j)) continue;
        CHECK(g.coeff(i, j) == 0.8);
        CHECK(g.degree(i, j) >= 1);
        CHECK(g.degree(i, j) <= 3);
        saw_nonlinear = saw_nonlinear || g.degree(i, j) > 1;
      }
  }
  CHECK(saw_nonlinear);
}

TEST_CASE("observational sampling") {
  auto grng = derived_rng(3, 0);
  const auto g = sample_sf_dag(5, 7, grng);
  const auto order = g.topological_order();

  // Without noise every variable equals its mechanism exactly.
  auto rng = derived_rng(3, 1);
  const auto X0 = sample_observational(g, 50, 0.0, rng);
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd pred = Eigen::VectorXd::Zero(50);
    for (int j : parents(g, i)) pred += g.coeff(j, i) * X0.col(j);
    CHECK((X0.col(i) - pred).norm() == 0.0);
  }

  // Root variance close to noise_scale^2.
  rng = derived_rng(3, 2);
  const auto X = sample_observational(g, 300, 0.4, rng);
  for (int i = 0; i < 5; ++i) {
    if (!parents(g, i).empty()) continue;
    const Eigen::VectorXd c = X.col(i).array() - X.col(i).mean();
    const double var = c.squaredNorm() / 299.0;
    CHECK(std::abs(var - 0.16) <= 0.2 * 0.16);
  }
}

TEST_CASE("noiseless ordinary least squares recovers linear coefficients") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto grng = derived_rng(s, 0);
    const auto g = sample_sf_dag(5, 8, grng);
    // Non-degenerate parents: perturb roots only through a tiny noise scale.
    auto rng = derived_rng(s, 1);
    Eigen::MatrixXd X = sample_observational(g, 200, 1e-3, rng);
    for (int i = 0; i < 5; ++i) {
      const auto pa = parents(g, i);
      if (pa.empty()) continue;
      // Regress on the parents' exact values; the child's own noise is
      // removed by rebuilding it from the mechanism.
      Eigen::MatrixXd A(200, static_cast<Eigen::Index>(pa.size()));
      Eigen::VectorXd y = Eigen::VectorXd::Zero(200);
      for (std::size_t k = 0; k < pa.size(); ++k) {
        A.col(static_cast<Eigen::Index>(k)) = X.col(pa[k]);
        y += g.coeff(pa[k], i) * X.col(pa[k]);
      }
      const Eigen::VectorXd w = A.colPivHouseholderQr().solve(y);
      for (std::size_t k = 0; k < pa.size(); ++k)
        CHECK(std::abs(w(static_cast<Eigen::Index>(k)) - g.coeff(pa[k], i)) <= 1e-8);
    }
  }
}

TEST_CASE("perfect interventions cut the parents") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto grng = derived_rng(s, 0);
    const auto g = sample_sf_dag(5, 8, grng);
    for (int t = 0; t < 5; ++t) {
      auto rng = derived_rng(s, 10 + static_cast<std::uint64_t>(t));
      const auto X = sample_interventional(g, t, 300, InterventionKind::Perfect, 0.4, rng);
      CHECK(X.rows() == 300);
      for (int j : parents(g, t)) CHECK(std::abs(corr(X.col(t), X.col(j))) < 0.15);
      CHECK(X.col(t).minCoeff() >= -2.0);
      CHECK(X.col(t).maxCoeff() <= 2.0);
    }
  }
}

TEST_CASE("perfect intervention on a root is uniform on [-2, 2]") {
  GroundTruthGraph g;
  g.adj = Adjacency::Zero(2, 2);
  g.adj(0, 1) = 1;
  g.coeff = Eigen::MatrixXd::Zero(2, 2);
  g.coeff(0, 1) = 0.7;
  g.degree = Eigen::MatrixXi::Ones(2, 2);
  g.hidden.assign(2, false);
  auto rng = derived_rng(5, 0);
  const auto X = sample_interventional(g, 0, 300, InterventionKind::Perfect, 0.4, rng);
  std::vector<double> v(X.col(0).data(), X.col(0).data() + 300);
  std::sort(v.begin(), v.end());
  double ks = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double F = (v[k] + 2.0) / 4.0;
    ks = std::max({ks, std::abs(F - static_cast<double>(k) / 300.0),
                   std::abs(F - static_cast<double>(k + 1) / 300.0)});
  }
  // Critical value of the one-sample KS statistic at level 0.01.
  CHECK(ks < 1.628 / std::sqrt(300.0));
}

TEST_CASE("imperfect interventions rescale the incoming edges") {
  GroundTruthGraph g;
  g.adj = Adjacency::Zero(2, 2);
  g.adj(0, 1) = 1;
  g.coeff = Eigen::MatrixXd::Zero(2, 2);
  g.coeff(0, 1) = 0.5;
  g.degree = Eigen::MatrixXi::Ones(2, 2);
  g.hidden.assign(2, false);
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto rng = derived_rng(s, 0);
    const auto X = sample_interventional(g, 1, 300, InterventionKind::Imperfect, 0.4, rng);
    const Eigen::VectorXd x = X.col(0).array() - X.col(0).mean();
    const Eigen::VectorXd y = X.col(1).array() - X.col(1).mean();
    const double slope = std::abs(x.dot(y) / x.squaredNorm());
    CHECK(slope >= 1.2 - 0.15);
    CHECK(slope <= 2.0 + 0.15);
    // The root target is replaced, not rescaled.
    auto r2 = derived_rng(s, 1);
    const auto R = sample_interventional(g, 0, 300, InterventionKind::Imperfect, 0.4, r2);
    CHECK(R.col(0).cwiseAbs().maxCoeff() <= 2.0);
    CHECK(R.col(0).cwiseAbs().maxCoeff() > 1.5);
  }
}

TEST_CASE("latent confounder") {
  GenConfig cfg;
  cfg.latent = true;
  cfg.seed = 4;
  const auto gen = generate(cfg);
  CHECK(gen.truth.nodes() == 6);
  CHECK(gen.truth.observed_nodes() == 5);
  CHECK(gen.truth.hidden.back());
  CHECK(gen.data.obs.cols() == 5);
  for (const auto& b : gen.data.ints) CHECK(b.data.cols() == 5);
  CHECK(parents(gen.truth, 5).empty());
  int children = 0;
  for (int i = 0; i < 5; ++i) children += gen.truth.adj(5, i);
  CHECK(children >= 2);
  CHECK(gen.truth.observed_adjacency().rows() == 5);
  const auto j = gen.truth.to_json();
  REQUIRE(j.contains("latent"));
  CHECK(j.at("latent").at(0).at("children").size() == 2);

  // Two otherwise unrelated roots sharing a strong hidden parent.
  GroundTruthGraph base;
  base.adj = Adjacency::Zero(2, 2);
  base.coeff = Eigen::MatrixXd::Zero(2, 2);
  base.degree = Eigen::MatrixXi::Zero(2, 2);
  base.hidden.assign(2, false);
  auto lrng = derived_rng(1, 0);
  auto g = add_latent_confounder(base, lrng);
  g.coeff(2, 0) = 1.0;
  g.coeff(2, 1) = -1.0;
  auto rng = derived_rng(1, 1);
  const auto X = sample_observational(g, 300, 0.4, rng);
  CHECK(X.cols() == 2);
  CHECK(std::abs(corr(X.col(0), X.col(1))) > 0.2);
}

TEST_CASE("generate is deterministic and emits one regime per node") {
  GenConfig cfg;
  cfg.seed = 11;
  const auto a = generate(cfg);
  const auto b = generate(cfg);
  CHECK(a.truth.to_json().dump() == b.truth.to_json().dump());
  CHECK(a.data.obs == b.data.obs);
  REQUIRE(a.data.ints.size() == 5);
  for (int t = 0; t < 5; ++t) {
    CHECK(a.data.ints[t].target == t);
    CHECK(a.data.ints[t].data == b.data.ints[t].data);
  }
  cfg.seed = 12;
  CHECK_FALSE(generate(cfg).data.obs == a.data.obs);
}

TEST_CASE("dataset csv round trip") {
  GenConfig cfg;
  cfg.seed = 2;
  const auto gen = generate(cfg);
  const auto path = temp_path("cpop_roundtrip.csv");
  write_dataset_csv(gen.data, path);
  const auto back = read_dataset_csv(path);
  CHECK(back.obs == gen.data.obs);
  REQUIRE(back.ints.size() == gen.data.ints.size());
  for (std::size_t k = 0; k < back.ints.size(); ++k) {
    CHECK(back.ints[k].target == gen.data.ints[k].target);
    CHECK(back.ints[k].data == gen.data.ints[k].data);
  }

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "X1,X2,X3,X4,X5,target");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    const int target = std::stoi(line.substr(line.rfind(',') + 1));
    CHECK(target >= 0);
    CHECK(target <= 5);
  }
  CHECK(rows == 1800);
  in.close();
  std::remove(path.c_str());

  CHECK_THROWS_AS(write_dataset_csv(gen.data, "/nonexistent_dir/x.csv"), IoError);
  CHECK_THROWS_AS(read_dataset_csv("/nonexistent_dir/x.csv"), IoError);

  const auto bad = temp_path("cpop_bad.csv");
  std::ofstream(bad) << "X1,X2,target\n1.0,abc,0\n";
  CHECK_THROWS_AS(read_dataset_csv(bad), IoError);
  std::ofstream(bad) << "X1,X2,target\n1.0,2.0,7\n";
  CHECK_THROWS_AS(read_dataset_csv(bad), IoError);
  std::remove(bad.c_str());
}

TEST_CASE("generator config") {
  GenConfig c;
  c.edge_count = 11;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c.edge_count = 8;
  c.noise_scale = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);

  const auto j = GenConfig{}.to_json();
  CHECK(GenConfig::from_json(j).to_json() == j);
  CHECK_THROWS_AS(GenConfig::from_json({{"mechanism", "cubic"}}), InvalidInput);
  CHECK_THROWS_AS(GenConfig::from_json({{"D", "five"}}), InvalidInput);
  CHECK(GenConfig::from_json({{"D", 4}, {"edge_count", 4}}).D == 4);
}

#include "cpop/metrics.hpp"

#include "cpop/error.hpp"

namespace cpop {

namespace {

void check_dims(const Adjacency& est, const Adjacency& truth) {
  if (est.rows() != truth.rows() || est.cols() != truth.cols() || est.rows() != est.cols()) {
    throw InvalidInput("graphs differ in size: " + std::to_string(est.rows()) + " vs " +
                       std::to_string(truth.rows()));
  }
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j{{"shd", shd},        {"tpr", tpr},         {"tp", tp},
                   {"fp", fp},          {"fn", fn},           {"reversed", reversed},
                   {"true_edges", true_edges}, {"empty_truth", empty_truth}};
  if (!config.is_null()) j["config"] = config;
  return j;
}

EvalReport evaluate(const Adjacency& est, const Adjacency& truth) {
  check_dims(est, truth);
  EvalReport r;
  const int D = static_cast<int>(est.rows());
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) {
      if (i == j) continue;
      if (truth(i, j)) {
        ++r.true_edges;
        if (est(i, j)) {
          ++r.tp;
        } else {
          ++r.fn;
        }
      }
    }
  // Each unordered pair is edited independently: any change of its state
  // costs one edit, except going between no edge and both directions.
  for (int i = 0; i < D; ++i)
    for (int j = i + 1; j < D; ++j) {
      const bool e_ij = est(i, j), e_ji = est(j, i), t_ij = truth(i, j), t_ji = truth(j, i);
      if (e_ij == t_ij && e_ji == t_ji) continue;
      const bool e_none = !e_ij && !e_ji, t_none = !t_ij && !t_ji;
      const bool e_both = e_ij && e_ji, t_both = t_ij && t_ji;
      r.shd += (e_none && t_both) || (e_both && t_none) ? 2 : 1;
      if (t_none) {
        r.fp += static_cast<int>(e_ij) + static_cast<int>(e_ji);
      } else if (!e_none && !e_both && !t_both && e_ij != t_ij) {
        ++r.reversed;
      }
    }
  r.empty_truth = r.true_edges == 0;
  r.tpr = r.empty_truth ? 1.0 : static_cast<double>(r.tp) / r.true_edges;
  return r;
}

int shd(const Adjacency& est, const Adjacency& truth) { return evaluate(est, truth).shd; }

double tpr(const Adjacency& est, const Adjacency& truth) { return evaluate(est, truth).tpr; }

}  // namespace cpop

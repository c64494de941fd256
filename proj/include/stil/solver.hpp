#pragma once

#include <cstdint>
#include <vector>

#include "stil/types.hpp"

namespace stil {

struct WeightedExample {
  Eigen::VectorXd x;
  double y = 1.0;       // -1 or +1
  double weight = 1.0;  // >= 0; scales this example's hinge term
};

struct TrainingSet {
  std::vector<WeightedExample> examples;
  double C = 1.0;
};

struct SolverTrace {
  // Objective of the model state after each pass; non-increasing.
  std::vector<double> pass_objectives;
  int passes = 0;
  bool converged = false;
};

// Hinge-loss linear classifier,
//   min 1/2 (||w||^2 + b^2) + C sum_i u_i max(0, 1 - y_i (<w,x_i> + b)).
// The bias enters as an augmented constant feature of value 1, so it is
// part of the regularizer; this is the usual liblinear-style
// approximation of the unregularized-bias objective. Solved by dual
// coordinate descent with a seeded pass order; the returned model is
// the best (lowest-objective) state seen, which makes the per-pass
// objective trace non-increasing. Deterministic given (ts, seed).
LinearModel fit(const TrainingSet& ts, std::uint64_t seed, SolverTrace* trace = nullptr);

// The objective above, evaluated at (m.weights, m.bias).
double primal_objective(const TrainingSet& ts, const LinearModel& m);

double score(const LinearModel& m, const Eigen::Ref<const Eigen::VectorXd>& x);
double score(const LinearModel& m, const Eigen::Ref<const Eigen::VectorXf>& x);

// Box scorer backed by a model; copies the model so the closure owns it.
inline BoxScoreFn model_box_score(LinearModel m) {
  return [m = std::move(m)](const BoxProposal& b) { return score(m, b.feature); };
}

}  // namespace stil

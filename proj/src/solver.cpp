#include "stil/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "stil/random.hpp"

namespace stil {
namespace {

constexpr int kMaxPasses = 1000;
constexpr double kRelTol = 1e-6;

void validate(const TrainingSet& ts) {
  if (ts.examples.empty()) throw DataError("empty training set");
  if (!(ts.C > 0.0)) throw DataError("regularization parameter C must be > 0");
  const Eigen::Index dim = ts.examples.front().x.size();
  bool has_pos = false, has_neg = false;
  for (const auto& e : ts.examples) {
    if (e.x.size() != dim) throw DataError("feature dimensionality mismatch in training set");
    if (e.y != 1.0 && e.y != -1.0) throw DataError("labels must be -1 or +1");
    if (e.weight < 0.0) throw DataError("example weights must be >= 0");
    if (!e.x.allFinite() || !std::isfinite(e.weight))
      throw NumericError("non-finite value in training set");
    (e.y > 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw DataError("degenerate labels");
}

// Objective at an augmented weight vector v = [w; b].
double objective_aug(const TrainingSet& ts, const Eigen::VectorXd& v) {
  double loss = 0.0;
  for (const auto& e : ts.examples) {
    const double margin = e.y * (e.x.dot(v.head(e.x.size())) + v[v.size() - 1]);
    loss += e.weight * std::max(0.0, 1.0 - margin);
  }
  return 0.5 * v.squaredNorm() + ts.C * loss;
}

}  // namespace

LinearModel fit(const TrainingSet& ts, std::uint64_t seed, SolverTrace* trace) {
  validate(ts);
  const Eigen::Index dim = ts.examples.front().x.size();
  const std::size_t n = ts.examples.size();

  std::vector<double> alpha(n, 0.0);
  std::vector<double> upper(n);   // per-example box constraint C * u_i
  std::vector<double> q_diag(n);  // ||x_i||^2 + 1 (augmented)
  for (std::size_t i = 0; i < n; ++i) {
    upper[i] = ts.C * ts.examples[i].weight;
    q_diag[i] = ts.examples[i].x.squaredNorm() + 1.0;
  }

  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim + 1);  // [w; b]
  double prev_obj = objective_aug(ts, v);
  Eigen::VectorXd best_v = v;
  double best_obj = prev_obj;

  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  int pass = 0;
  bool converged = false;
  while (pass < kMaxPasses) {
    ++pass;
    rng.shuffle(order);
    for (std::size_t i : order) {
      if (upper[i] <= 0.0) continue;
      const auto& e = ts.examples[i];
      const double g = e.y * (e.x.dot(v.head(dim)) + v[dim]) - 1.0;
      double pg = g;
      if (alpha[i] <= 0.0)
        pg = std::min(g, 0.0);
      else if (alpha[i] >= upper[i])
        pg = std::max(g, 0.0);
      if (pg == 0.0) continue;
      const double old = alpha[i];
      alpha[i] = std::min(std::max(old - g / q_diag[i], 0.0), upper[i]);
      const double delta = (alpha[i] - old) * e.y;
      if (delta != 0.0) {
        v.head(dim) += delta * e.x;
        v[dim] += delta;
      }
    }

    const double obj = objective_aug(ts, v);
    if (!std::isfinite(obj)) throw NumericError("solver objective diverged");
    if (obj < best_obj) {
      best_obj = obj;
      best_v = v;
    }
    if (trace) trace->pass_objectives.push_back(best_obj);
    if (std::abs(obj - prev_obj) < kRelTol * std::max(std::abs(prev_obj), 1e-12)) {
      converged = true;
      break;
    }
    prev_obj = obj;
  }

  if (trace) {
    trace->passes = pass;
    trace->converged = converged;
  }

  LinearModel m;
  m.weights = best_v.head(dim);
  m.bias = best_v[dim];
  return m;
}

double primal_objective(const TrainingSet& ts, const LinearModel& m) {
  Eigen::VectorXd v(m.weights.size() + 1);
  v.head(m.weights.size()) = m.weights;
  v[m.weights.size()] = m.bias;
  return objective_aug(ts, v);
}

double score(const LinearModel& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != m.weights.size())
    throw DataError("feature dimensionality does not match model '" + m.action_id + "'");
  return m.weights.dot(x) + m.bias;
}

double score(const LinearModel& m, const Eigen::Ref<const Eigen::VectorXf>& x) {
  if (x.size() != m.weights.size())
    throw DataError("feature dimensionality does not match model '" + m.action_id + "'");
  return m.weights.dot(x.cast<double>()) + m.bias;
}

}  // namespace stil

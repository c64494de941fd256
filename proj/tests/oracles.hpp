#pragma once

// Independent reference implementations used to cross-check the library.
// These deliberately favour directness over efficiency: full edge lists
// that are re-scanned at every step, literal triple loops, and plain
// subgradient descent. They share no code with the production paths
// they validate.

#include <set>
#include <vector>

#include "stil/linking.hpp"
#include "stil/random.hpp"
#include "stil/solver.hpp"
#include "stil/types.hpp"

namespace oracle {

// Greedy bidirectional growth that materializes every consecutive-frame
// edge up front and re-scans the whole list at each step.
stil::Tube naive_grow_tube(const stil::VideoDecomposition& video, int seed_frame, int seed_idx,
                           const stil::BoxScoreFn& score, stil::StopRule stop_rule,
                           const std::vector<std::vector<char>>* suppressed = nullptr);

std::vector<stil::Tube> naive_link_video(const stil::VideoDecomposition& video,
                                         const stil::BoxScoreFn& score,
                                         const stil::LinkConfig& cfg);

// Exhaustive enumeration of every (tube, start, length) subtube with
// direct summation.
stil::LatentAssignment brute_force_e_step(const stil::VideoDecomposition& video,
                                          const stil::BoxScoreFn& score, double lambda);

// Projected subgradient descent on the same augmented hinge objective
// the solver minimizes; returns the best objective value seen.
double subgradient_reference_objective(const stil::TrainingSet& ts, int iterations);

// All average-precision values reachable by a greedy matcher that is
// free to break score ties (detection order) and overlap ties (ground
// truth choice) arbitrarily.
struct RefDetection {
  double score = 0.0;
  bool in_positive_video = false;
  std::vector<double> overlaps;  // st-IoU against each ground-truth instance
};
std::set<double> reference_ap_values(const std::vector<RefDetection>& dets, int num_gt,
                                     double tau);

// Random proposal videos for the linking and e-step oracles.
struct RandomVideoOpts {
  int max_frames = 30;
  int max_boxes_per_frame = 8;
  bool allow_empty_frames = true;
  bool clustered = true;  // keep boxes overlapping so chains exist
  double prior_min = 0.0;
  double prior_max = 1.0;
};
stil::VideoDecomposition random_video(stil::Rng& rng, const RandomVideoOpts& opts);

// Guaranteed growable: one full-length random-walk lane per "slot" so a
// video-length tube always exists; used for the work-bound check.
stil::VideoDecomposition laned_video(stil::Rng& rng, int frames, int lanes);

}  // namespace oracle

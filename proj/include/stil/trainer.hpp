#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stil/types.hpp"

namespace stil {

struct TrainConfig {
  double C = 10.0;
  int epochs = 5;
  int folds = 3;
  double lambda = 1.0;  // subtube length regularizer
  int background_negatives_per_video = 10;
  std::uint64_t seed = 0;
  int jobs = 1;
};

// One training-log line: per-fold rows carry the fold model's stats,
// the fold == -1 row per epoch carries the all-fold refit.
struct EpochLogRow {
  int epoch = 0;
  int fold = 0;
  double mean_subtube_length = 0.0;
  double mean_subtube_score = 0.0;
  double svm_objective = 0.0;
};

struct FoldProvenance {
  int epoch = 0;
  int fold = 0;
  std::vector<std::string> model_positive_videos;  // positives the fold model saw
  std::vector<std::string> relocalized_videos;     // positives it relocalized
};

struct TrainTrace {
  std::vector<EpochLogRow> rows;
  std::vector<FoldProvenance> provenance;
};

// Sum of box scores over the subtube of tube `tube_idx` starting at
// frame `start_frame` with stride `stride` (covering stride+1 boxes),
// minus lambda * stride.
double subtube_score(const VideoDecomposition& video, int tube_idx, int start_frame, int stride,
                     const BoxScoreFn& box_score, double lambda);

// Highest-scoring subtube over all tubes and contiguous ranges. Ties
// prefer the longer subtube, then the lower tube index, then the lower
// start frame.
LatentAssignment e_step(const VideoDecomposition& video, const BoxScoreFn& box_score,
                        double lambda);

// Constrained latent max-margin EM: alternates subtube relocalization
// (fold-isolated for positives) with hinge-loss refits. Initialized
// from prior box scores; negative videos contribute their top-scoring
// subtube plus low-prior background boxes as negatives.
LinearModel train_stil(const Dataset& ds, const std::string& action, const TrainConfig& cfg,
                       TrainTrace* trace = nullptr, DiagLog* log = nullptr);

// (Generalized) MIL baseline: mu top-scoring boxes per video instead of
// a subtube, random positive selection at initialization, otherwise the
// same optimization. mu = 1 is plain MIL.
LinearModel train_mil(const Dataset& ds, const std::string& action, const TrainConfig& cfg,
                      int mu, TrainTrace* trace = nullptr, DiagLog* log = nullptr);

// Whole-video classifier on video features, used for contextual
// reranking. One-vs-rest per action, no latent variables.
LinearModel train_video_classifier(const Dataset& ds, const std::string& action,
                                   const TrainConfig& cfg, DiagLog* log = nullptr);

}  // namespace stil

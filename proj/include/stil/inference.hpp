#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stil/io.hpp"
#include "stil/linking.hpp"
#include "stil/types.hpp"

namespace stil {

struct Detection {
  std::string video_id;
  std::string action_id;
  Tube tube;
  double score = 0.0;
  double context_term = 0.0;
  double negative_penalty = 0.0;
};

// Mean box score over the tube's boxes.
double tube_score(const LinearModel& m, const VideoDecomposition& video, const Tube& tube);

// Per action: scores boxes with the model, links with the inference
// stop rule, and emits one Detection per tube.
std::vector<Detection> detect(const VideoDecomposition& video,
                              const std::vector<LinearModel>& models, const LinkConfig& link_cfg,
                              DiagLog* log = nullptr);

// Adds the whole-video classifier score to the detection. Passes the
// detection through unchanged (with a diagnostic) when the video has no
// video feature.
Detection rerank_context(const Detection& d, const LinearModel& video_model,
                         const std::optional<Eigen::VectorXd>& video_feature,
                         DiagLog* log = nullptr);

// Negative-evidence adjustment for one tube: s'_c = s_c - (max_c' s_c' - s_c).
std::map<std::string, double> rerank_negative(const std::map<std::string, double>& per_action);

struct RerankFlags {
  bool context = false;
  bool negative = false;
};

// Full test-time pipeline over a dataset: detect per video, apply the
// requested rerankers (context first, negative evidence on the adjusted
// scores), and flatten to dump records. `video_models` may be empty
// when context reranking is off.
std::vector<DetectionRecord> run_inference(const Dataset& ds,
                                           const std::vector<LinearModel>& models,
                                           const std::vector<LinearModel>& video_models,
                                           const RerankFlags& flags, const LinkConfig& link_cfg,
                                           int jobs = 1, DiagLog* log = nullptr);

}  // namespace stil

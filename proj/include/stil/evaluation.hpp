#pragma once

#include <map>
#include <string>
#include <vector>

#include "stil/io.hpp"
#include "stil/types.hpp"

namespace stil {

// Spatio-temporal overlap: mean per-frame spatial IoU over the union of
// both tubes' covered frames; frames covered by only one tube count 0.
double st_iou(const BoxTrack& a, const BoxTrack& b);

// Ground-truth tubes grouped per action and video.
struct GroundTruth {
  // action -> video_id -> instances
  std::map<std::string, std::map<std::string, std::vector<BoxTrack>>> by_action;

  static GroundTruth from_annotations(const std::vector<AnnotationRecord>& records);
  int num_instances(const std::string& action) const;
  bool video_is_positive(const std::string& action, const std::string& video_id) const;
};

// Greedy matching in score order: a detection is a true positive iff its
// video is positive for the action, it overlaps some ground-truth tube
// of that video by >= tau, and that tube is still unmatched; it then
// claims the highest-overlap unmatched tube.
// `ranked` must be sorted by descending score.
std::vector<bool> match_detections(const std::vector<const DetectionRecord*>& ranked,
                                   const GroundTruth& gt, const std::string& action, double tau);

// Non-interpolated average precision from ranked tp/fp flags.
double average_precision(const std::vector<bool>& flags, int num_gt);

// ROC AUC over per-video top detections: sample = (score, correct);
// correct means the video is positive and the detection overlaps some
// ground-truth tube by >= tau.
double auc_from_samples(std::vector<std::pair<double, bool>> samples);

struct EvalReport {
  std::vector<double> taus;
  struct ActionRow {
    std::string action;
    int num_gt = 0;
    std::vector<double> ap;   // per tau
    std::vector<double> auc;  // per tau; NaN when undefined
  };
  std::vector<ActionRow> rows;
  std::vector<double> mean_ap;
  std::vector<double> mean_auc;

  double map_at(double tau) const;
};

EvalReport evaluate(const std::vector<DetectionRecord>& dets, const GroundTruth& gt,
                    const std::vector<double>& taus, DiagLog* log = nullptr);

// Tab-separated report mirroring the evaluate() output.
std::string format_report(const EvalReport& report);

}  // namespace stil

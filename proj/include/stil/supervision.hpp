#pragma once

#include <memory>
#include <string>
#include <vector>

#include "stil/types.hpp"

namespace stil {

// Temporal annotation weight: 1 in the annotated frame, 1/2 in the two
// neighbouring frames, 0 beyond.
double temporal_delta(int a_frame, int b_frame);

// Spatial annotation weight: IoU for box annotations, point match for
// points (1 at the box center, 0 at the corner distance), -1 for an
// explicit "no action here" frame.
double spatial_delta(const Annotation& ann, const Rect& box);

// Eq-5-style total: sum over annotations of temporal * spatial weight.
double supervision_score(const BoxProposal& box, const std::vector<Annotation>& anns);

// Adds supervision scores to the prior of every box of every annotated
// video, then restores the descending-prior frame order. Run before
// linking and training.
void apply_supervision(Dataset& ds, const std::vector<AnnotationRecord>& records,
                       DiagLog* log = nullptr);

// Simulated annotations at a supervision level, derived from
// ground-truth tubes: one box or center point every `stride` covered
// frames of each tube.
std::vector<AnnotationRecord> derive_annotations(const std::vector<AnnotationRecord>& ground_truth,
                                                 Annotation::Kind kind, int stride);

// Annotation-time model, seconds per video. A class label costs 5 s;
// every annotated frame adds 15 s for a box or 1.5 s for a point, with
// num_frames/stride annotated frames (fractional counts allowed).
class CostStrategy {
 public:
  static CostStrategy labels();
  static CostStrategy points(int stride);
  static CostStrategy boxes(int stride);
  static CostStrategy mixture(double w, CostStrategy first, CostStrategy second);

  double cost_seconds(double num_frames) const;
  std::string describe() const;

 private:
  enum class Kind { Labels, Points, Boxes, Mixture };
  CostStrategy() = default;
  Kind kind_ = Kind::Labels;
  int stride_ = 1;
  double mix_weight_ = 0.5;
  std::shared_ptr<const CostStrategy> first_, second_;
};

double annotation_cost(double num_frames, const CostStrategy& strategy);

}  // namespace stil

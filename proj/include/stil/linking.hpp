#pragma once

#include <cstddef>
#include <vector>

#include "stil/types.hpp"

namespace stil {

// Training-time growth stops in a direction when no consecutive
// overlapping box has a positive edge weight. Inference additionally
// stops when the best candidate's own box score is <= 0.
enum class StopRule { Training, Inference };

struct LinkConfig {
  StopRule stop_rule = StopRule::Training;
  int max_tubes = 5;
  // After a tube is extracted, same-frame boxes overlapping the tube's
  // box with IoU above this are removed from the pool.
  double suppression_iou = 0.5;
};

struct LinkStats {
  std::size_t edge_evaluations = 0;
};

// Eq.-style sparse edge: score(a) + score(b) when the boxes sit in
// consecutive frames and overlap with IoU >= 0.1, else 0.
double edge_weight(const BoxProposal& a, const BoxProposal& b, const BoxScoreFn& score);

// Grows a tube bidirectionally from the seed box, at each step taking
// the higher of the best forward and best backward edge (forward wins
// ties). `suppressed`, when given, removes boxes from the candidate
// pool; it is indexed [frame][box].
Tube grow_tube(const VideoDecomposition& video, int seed_frame, int seed_idx,
               const BoxScoreFn& score, StopRule stop_rule,
               const std::vector<std::vector<char>>* suppressed = nullptr,
               LinkStats* stats = nullptr);

// Repeatedly seeds grow_tube at the highest-scoring unsuppressed box,
// suppressing per-frame overlaps after each tube. Pure in its inputs.
std::vector<Tube> compute_tubes(const VideoDecomposition& video, const BoxScoreFn& score,
                                const LinkConfig& cfg, LinkStats* stats = nullptr,
                                DiagLog* log = nullptr);

// compute_tubes, stored into video.tubes.
std::vector<Tube> link_video(VideoDecomposition& video, const BoxScoreFn& score,
                             const LinkConfig& cfg, LinkStats* stats = nullptr,
                             DiagLog* log = nullptr);

// Prior-score linking of every video in the dataset.
void link_dataset(Dataset& ds, const LinkConfig& cfg, int jobs = 1, DiagLog* log = nullptr);

}  // namespace stil

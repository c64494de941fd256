#include "stil/linking.hpp"

#include <cmath>
#include <deque>

#include "stil/parallel.hpp"

namespace stil {
namespace {

constexpr double kEdgeIou = 0.1;

bool is_suppressed(const std::vector<std::vector<char>>* suppressed, int frame, int idx) {
  if (!suppressed) return false;
  return (*suppressed)[static_cast<std::size_t>(frame)][static_cast<std::size_t>(idx)] != 0;
}

// Best edge from `endpoint` into the adjacent frame of one direction.
struct Frontier {
  bool alive = false;
  int frame = -1;    // candidate frame
  int idx = -1;      // candidate box index
  double edge = 0.0; // its edge weight
};

Frontier scan_frontier(const VideoDecomposition& video, const BoxProposal& endpoint,
                       int candidate_frame, const BoxScoreFn& score, StopRule stop_rule,
                       const std::vector<std::vector<char>>* suppressed, LinkStats* stats) {
  Frontier f;
  if (candidate_frame < 0 || candidate_frame >= video.num_frames) return f;
  const auto& boxes = video.frames[static_cast<std::size_t>(candidate_frame)];
  double best_edge = 0.0;
  int best_idx = -1;
  for (int i = 0; i < static_cast<int>(boxes.size()); ++i) {
    if (is_suppressed(suppressed, candidate_frame, i)) continue;
    if (stats) ++stats->edge_evaluations;
    const double e = edge_weight(endpoint, boxes[static_cast<std::size_t>(i)], score);
    if (e > best_edge) {  // strict: earliest index wins ties
      best_edge = e;
      best_idx = i;
    }
  }
  if (best_idx < 0) return f;  // no box with support
  if (stop_rule == StopRule::Inference &&
      score(boxes[static_cast<std::size_t>(best_idx)]) <= 0.0)
    return f;
  f.alive = true;
  f.frame = candidate_frame;
  f.idx = best_idx;
  f.edge = best_edge;
  return f;
}

}  // namespace

double edge_weight(const BoxProposal& a, const BoxProposal& b, const BoxScoreFn& score) {
  if (std::abs(a.frame - b.frame) != 1) return 0.0;
  if (spatial_iou(a.rect, b.rect) < kEdgeIou) return 0.0;
  return score(a) + score(b);
}

Tube grow_tube(const VideoDecomposition& video, int seed_frame, int seed_idx,
               const BoxScoreFn& score, StopRule stop_rule,
               const std::vector<std::vector<char>>* suppressed, LinkStats* stats) {
  std::deque<int> indices;  // box index per covered frame
  indices.push_back(seed_idx);
  int head_frame = seed_frame;  // backward end
  int tail_frame = seed_frame;  // forward end

  Frontier fwd = scan_frontier(video, video.box(seed_frame, seed_idx), seed_frame + 1, score,
                               stop_rule, suppressed, stats);
  Frontier bwd = scan_frontier(video, video.box(seed_frame, seed_idx), seed_frame - 1, score,
                               stop_rule, suppressed, stats);

  while (fwd.alive || bwd.alive) {
    // Highest edge overall decides the direction; forward wins ties.
    const bool forward = fwd.alive && (!bwd.alive || fwd.edge >= bwd.edge);
    if (forward) {
      indices.push_back(fwd.idx);
      tail_frame = fwd.frame;
      fwd = scan_frontier(video, video.box(tail_frame, fwd.idx), tail_frame + 1, score,
                          stop_rule, suppressed, stats);
    } else {
      indices.push_front(bwd.idx);
      head_frame = bwd.frame;
      bwd = scan_frontier(video, video.box(head_frame, bwd.idx), head_frame - 1, score,
                          stop_rule, suppressed, stats);
    }
  }

  Tube tube;
  tube.start_frame = head_frame;
  tube.box_indices.assign(indices.begin(), indices.end());
  return tube;
}

std::vector<Tube> compute_tubes(const VideoDecomposition& video, const BoxScoreFn& score,
                                const LinkConfig& cfg, LinkStats* stats, DiagLog* log) {
  std::vector<Tube> tubes;
  if (cfg.max_tubes < 1) throw DataError("max_tubes must be >= 1");
  if (video.total_boxes() == 0) {
    diag(log, "video '" + video.video_id + "' has no box proposals; no tubes linked");
    return tubes;
  }

  std::vector<std::vector<char>> suppressed(video.frames.size());
  for (std::size_t f = 0; f < video.frames.size(); ++f)
    suppressed[f].assign(video.frames[f].size(), 0);

  while (static_cast<int>(tubes.size()) < cfg.max_tubes) {
    // Seed at the highest-scoring unsuppressed box (lowest frame, then
    // lowest within-frame index on ties).
    int seed_frame = -1, seed_idx = -1;
    double seed_score = 0.0;
    for (int f = 0; f < video.num_frames; ++f) {
      const auto& boxes = video.frames[static_cast<std::size_t>(f)];
      for (int i = 0; i < static_cast<int>(boxes.size()); ++i) {
        if (suppressed[static_cast<std::size_t>(f)][static_cast<std::size_t>(i)]) continue;
        const double s = score(boxes[static_cast<std::size_t>(i)]);
        if (seed_idx < 0 || s > seed_score) {
          seed_score = s;
          seed_frame = f;
          seed_idx = i;
        }
      }
    }
    if (seed_idx < 0) break;  // pool exhausted

    Tube tube = grow_tube(video, seed_frame, seed_idx, score, cfg.stop_rule, &suppressed, stats);
    for (int k = 0; k < tube.length(); ++k) {
      const int f = tube.start_frame + k;
      const Rect& tube_rect = video.tube_box(tube, k).rect;
      auto& mask = suppressed[static_cast<std::size_t>(f)];
      const auto& boxes = video.frames[static_cast<std::size_t>(f)];
      for (std::size_t i = 0; i < boxes.size(); ++i)
        if (spatial_iou(boxes[i].rect, tube_rect) > cfg.suppression_iou) mask[i] = 1;
      // The tube's own box always leaves the pool, whatever the threshold.
      mask[static_cast<std::size_t>(tube.box_indices[static_cast<std::size_t>(k)])] = 1;
    }
    tubes.push_back(std::move(tube));
  }
  return tubes;
}

std::vector<Tube> link_video(VideoDecomposition& video, const BoxScoreFn& score,
                             const LinkConfig& cfg, LinkStats* stats, DiagLog* log) {
  video.tubes = compute_tubes(video, score, cfg, stats, log);
  return video.tubes;
}

void link_dataset(Dataset& ds, const LinkConfig& cfg, int jobs, DiagLog* log) {
  parallel_for(ds.videos.size(), jobs, [&](std::size_t i) {
    link_video(ds.videos[i], prior_box_score(), cfg, nullptr, log);
  });
}

}  // namespace stil

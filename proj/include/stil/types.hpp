#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "stil/errors.hpp"
#include "stil/geometry.hpp"

namespace stil {

// One detected box in one frame. Frame indices are positions in the
// video's sampled-frame sequence; "consecutive" always means adjacent
// sampled frames. Features are unit l2-norm after ingestion (zero
// vectors stay zero).
struct BoxProposal {
  int frame = 0;
  Rect rect;
  double prior = 0.0;  // zero-shot / actor prior score s(B)
  Eigen::VectorXf feature;
};

// Temporally contiguous run of boxes, one per covered frame.
// box_indices[k] indexes into the video's box list for frame
// start_frame + k.
struct Tube {
  int start_frame = 0;
  std::vector<int> box_indices;

  int length() const { return static_cast<int>(box_indices.size()); }
  int end_frame() const { return start_frame + length() - 1; }
  bool covers(int frame) const {
    return frame >= start_frame && frame <= end_frame();
  }
};

struct VideoDecomposition {
  std::string video_id;
  int num_frames = 0;
  std::vector<std::string> labels;  // sorted, unique
  // boxes_per_frame; within a frame sorted by descending prior score
  std::vector<std::vector<BoxProposal>> frames;
  std::vector<Tube> tubes;
  std::optional<Eigen::VectorXd> video_feature;

  bool has_label(const std::string& action) const {
    return std::binary_search(labels.begin(), labels.end(), action);
  }

  const BoxProposal& box(int frame, int idx) const {
    return frames.at(static_cast<std::size_t>(frame))
        .at(static_cast<std::size_t>(idx));
  }

  // Box of `tube` at the k-th covered frame.
  const BoxProposal& tube_box(const Tube& tube, int k) const {
    return box(tube.start_frame + k, tube.box_indices.at(static_cast<std::size_t>(k)));
  }

  std::size_t total_boxes() const {
    std::size_t n = 0;
    for (const auto& f : frames) n += f.size();
    return n;
  }
};

// Selected (tube, start frame, end frame) marking which boxes enter the
// hinge loss. Inclusive frame range, one contiguous run in one tube.
struct LatentAssignment {
  int tube_idx = 0;
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  friend bool operator==(const LatentAssignment&, const LatentAssignment&) = default;
};

struct LinearModel {
  std::string action_id;
  Eigen::VectorXd weights;
  double bias = 0.0;
};

// A single manual annotation in one frame.
struct Annotation {
  enum class Kind { Box, Point, None };
  Kind kind = Kind::None;
  int frame = 0;
  Rect rect;       // Kind::Box
  double px = 0.0; // Kind::Point
  double py = 0.0;
};

// All annotations of one action in one video. Ground-truth tubes use
// Kind::Box with one entry per frame.
struct AnnotationRecord {
  std::string video_id;
  std::string action;
  std::vector<Annotation> entries;
};

struct Dataset {
  std::vector<VideoDecomposition> videos;
  std::vector<std::string> actions;  // sorted union of video labels
  int feature_dim = 0;
  int video_feature_dim = -1;  // -1 when no video has a video feature
  // Prior-score range observed at ingestion, for diagnostics; the paper
  // does not pin a calibration for s(B).
  double prior_min = 0.0;
  double prior_max = 0.0;

  const VideoDecomposition* find_video(const std::string& id) const {
    for (const auto& v : videos)
      if (v.video_id == id) return &v;
    return nullptr;
  }

  bool has_action(const std::string& action) const {
    return std::binary_search(actions.begin(), actions.end(), action);
  }
};

// Geometry-only tube: rects over a contiguous frame range. Detections
// and ground-truth tubes are compared in this form.
struct BoxTrack {
  int start_frame = 0;
  std::vector<Rect> rects;

  int length() const { return static_cast<int>(rects.size()); }
  int end_frame() const { return start_frame + length() - 1; }
  const Rect* rect_at(int frame) const {
    if (frame < start_frame || frame > end_frame()) return nullptr;
    return &rects[static_cast<std::size_t>(frame - start_frame)];
  }
};

inline BoxTrack to_track(const VideoDecomposition& video, const Tube& tube) {
  BoxTrack t;
  t.start_frame = tube.start_frame;
  t.rects.reserve(tube.box_indices.size());
  for (int k = 0; k < tube.length(); ++k) t.rects.push_back(video.tube_box(tube, k).rect);
  return t;
}

using BoxScoreFn = std::function<double(const BoxProposal&)>;

inline BoxScoreFn prior_box_score() {
  return [](const BoxProposal& b) { return b.prior; };
}

// Throws unless `tube` satisfies every Tube invariant within `video`:
// in-range indices, one box per covered frame (structural), and spatial
// IoU >= 0.1 between consecutive boxes.
void validate_tube(const VideoDecomposition& video, const Tube& tube);

// Throws unless `a` selects a contiguous in-range run of one tube with
// 1 <= length <= num_frames.
void validate_assignment(const VideoDecomposition& video, const LatentAssignment& a);

// Collector for non-fatal notes (zero-box videos, clamped parameters,
// missing optional inputs). Functions accept a nullable pointer.
// Appends may come from parallel sections.
class DiagLog {
 public:
  void note(std::string s) {
    std::lock_guard<std::mutex> lock(mutex_);
    lines_.push_back(std::move(s));
  }
  std::vector<std::string> lines() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return lines_;
  }
  bool empty() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return lines_.empty();
  }

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> lines_;
};

inline void diag(DiagLog* log, std::string s) {
  if (log) log->note(std::move(s));
}

}  // namespace stil

#include "stil/types.hpp"

namespace stil {

namespace {
constexpr double kTubeLinkIou = 0.1;
}

void validate_tube(const VideoDecomposition& video, const Tube& tube) {
  if (tube.box_indices.empty())
    throw DataError("tube in video '" + video.video_id + "' is empty");
  if (tube.start_frame < 0 || tube.end_frame() >= video.num_frames)
    throw DataError("tube in video '" + video.video_id + "' exceeds frame range");
  for (int k = 0; k < tube.length(); ++k) {
    const int f = tube.start_frame + k;
    const auto& boxes = video.frames[static_cast<std::size_t>(f)];
    const int idx = tube.box_indices[static_cast<std::size_t>(k)];
    if (idx < 0 || idx >= static_cast<int>(boxes.size()))
      throw DataError("tube in video '" + video.video_id + "' has bad box index at frame " +
                      std::to_string(f));
    if (k > 0) {
      const Rect& prev = video.tube_box(tube, k - 1).rect;
      const Rect& cur = boxes[static_cast<std::size_t>(idx)].rect;
      if (spatial_iou(prev, cur) < kTubeLinkIou)
        throw DataError("tube in video '" + video.video_id +
                        "' violates the 0.1 overlap invariant at frame " + std::to_string(f));
    }
  }
}

void validate_assignment(const VideoDecomposition& video, const LatentAssignment& a) {
  if (a.tube_idx < 0 || a.tube_idx >= static_cast<int>(video.tubes.size()))
    throw DataError("assignment in video '" + video.video_id + "' selects missing tube " +
                    std::to_string(a.tube_idx));
  const Tube& tube = video.tubes[static_cast<std::size_t>(a.tube_idx)];
  if (a.start > a.end)
    throw DataError("assignment in video '" + video.video_id + "' has start > end");
  if (a.start < tube.start_frame || a.end > tube.end_frame())
    throw DataError("assignment in video '" + video.video_id + "' leaves tube span");
  if (a.length() < 1 || a.length() > video.num_frames)
    throw DataError("assignment in video '" + video.video_id + "' has bad length " +
                    std::to_string(a.length()));
}

}  // namespace stil

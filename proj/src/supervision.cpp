#include "stil/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace stil {

namespace {
constexpr double kLabelSeconds = 5.0;
constexpr double kBoxSeconds = 15.0;
constexpr double kPointSeconds = 1.5;
}  // namespace

double temporal_delta(int a_frame, int b_frame) {
  return std::max(0.0, 1.0 - std::abs(a_frame - b_frame) / 2.0);
}

double spatial_delta(const Annotation& ann, const Rect& box) {
  switch (ann.kind) {
    case Annotation::Kind::Box:
      return spatial_iou(ann.rect, box);
    case Annotation::Kind::Point: {
      const double dx = ann.px - rect_center_x(box);
      const double dy = ann.py - rect_center_y(box);
      const double dist = std::sqrt(dx * dx + dy * dy);
      return std::max(0.0, 1.0 - dist / rect_half_diagonal(box));
    }
    case Annotation::Kind::None:
      return -1.0;
  }
  return 0.0;
}

double supervision_score(const BoxProposal& box, const std::vector<Annotation>& anns) {
  double total = 0.0;
  for (const auto& ann : anns)
    total += temporal_delta(ann.frame, box.frame) * spatial_delta(ann, box.rect);
  return total;
}

void apply_supervision(Dataset& ds, const std::vector<AnnotationRecord>& records, DiagLog* log) {
  std::map<std::string, std::vector<Annotation>> by_video;
  for (const auto& rec : records) {
    if (!ds.has_action(rec.action))
      throw DataError("unknown action identifier '" + rec.action + "' in supervision file");
    auto& anns = by_video[rec.video_id];
    anns.insert(anns.end(), rec.entries.begin(), rec.entries.end());
  }

  std::size_t matched = 0;
  for (auto& video : ds.videos) {
    auto it = by_video.find(video.video_id);
    if (it == by_video.end()) continue;
    ++matched;
    for (auto& frame : video.frames)
      for (auto& box : frame) box.prior += supervision_score(box, it->second);
    for (auto& frame : video.frames)
      std::stable_sort(frame.begin(), frame.end(),
                       [](const BoxProposal& a, const BoxProposal& b) { return a.prior > b.prior; });
  }
  if (matched < by_video.size())
    diag(log, "supervision file annotates " + std::to_string(by_video.size() - matched) +
                  " video(s) not present in the dataset");
  std::ostringstream os;
  os << "supervision applied to " << matched << " video(s)";
  diag(log, os.str());
}

std::vector<AnnotationRecord> derive_annotations(const std::vector<AnnotationRecord>& ground_truth,
                                                 Annotation::Kind kind, int stride) {
  if (stride < 1) throw DataError("annotation stride must be >= 1");
  if (kind == Annotation::Kind::None)
    throw DataError("cannot derive 'none' annotations from ground truth");
  std::vector<AnnotationRecord> out;
  for (const auto& rec : ground_truth) {
    AnnotationRecord derived;
    derived.video_id = rec.video_id;
    derived.action = rec.action;
    for (std::size_t k = 0; k < rec.entries.size(); k += static_cast<std::size_t>(stride)) {
      const Annotation& gt = rec.entries[k];
      if (gt.kind != Annotation::Kind::Box)
        throw DataError("ground-truth record for video '" + rec.video_id +
                        "' contains a non-box entry");
      Annotation a;
      a.frame = gt.frame;
      if (kind == Annotation::Kind::Box) {
        a.kind = Annotation::Kind::Box;
        a.rect = gt.rect;
      } else {
        a.kind = Annotation::Kind::Point;
        a.px = rect_center_x(gt.rect);
        a.py = rect_center_y(gt.rect);
      }
      derived.entries.push_back(a);
    }
    if (!derived.entries.empty()) out.push_back(std::move(derived));
  }
  return out;
}

CostStrategy CostStrategy::labels() {
  CostStrategy s;
  s.kind_ = Kind::Labels;
  return s;
}

CostStrategy CostStrategy::points(int stride) {
  if (stride < 1) throw DataError("annotation stride must be >= 1");
  CostStrategy s;
  s.kind_ = Kind::Points;
  s.stride_ = stride;
  return s;
}

CostStrategy CostStrategy::boxes(int stride) {
  if (stride < 1) throw DataError("annotation stride must be >= 1");
  CostStrategy s;
  s.kind_ = Kind::Boxes;
  s.stride_ = stride;
  return s;
}

CostStrategy CostStrategy::mixture(double w, CostStrategy first, CostStrategy second) {
  if (w < 0.0 || w > 1.0) throw DataError("mixture weight must lie in [0,1]");
  CostStrategy s;
  s.kind_ = Kind::Mixture;
  s.mix_weight_ = w;
  s.first_ = std::make_shared<const CostStrategy>(std::move(first));
  s.second_ = std::make_shared<const CostStrategy>(std::move(second));
  return s;
}

double CostStrategy::cost_seconds(double num_frames) const {
  if (num_frames < 1.0) throw DataError("num_frames must be >= 1");
  switch (kind_) {
    case Kind::Labels:
      return kLabelSeconds;
    case Kind::Points:
      return kLabelSeconds + num_frames / stride_ * kPointSeconds;
    case Kind::Boxes:
      return kLabelSeconds + num_frames / stride_ * kBoxSeconds;
    case Kind::Mixture:
      return mix_weight_ * first_->cost_seconds(num_frames) +
             (1.0 - mix_weight_) * second_->cost_seconds(num_frames);
  }
  return 0.0;
}

std::string CostStrategy::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Labels:
      os << "labels";
      break;
    case Kind::Points:
      os << "points(stride=" << stride_ << ")";
      break;
    case Kind::Boxes:
      os << "boxes(stride=" << stride_ << ")";
      break;
    case Kind::Mixture:
      os << "mixture(" << mix_weight_ << ": " << first_->describe() << ", " << second_->describe()
         << ")";
      break;
  }
  return os.str();
}

double annotation_cost(double num_frames, const CostStrategy& strategy) {
  return strategy.cost_seconds(num_frames);
}

}  // namespace stil

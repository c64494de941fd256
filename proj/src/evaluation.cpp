#include "stil/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace stil {

double st_iou(const BoxTrack& a, const BoxTrack& b) {
  if (a.rects.empty() || b.rects.empty()) throw DataError("st_iou on an empty track");
  const int lo = std::min(a.start_frame, b.start_frame);
  const int hi = std::max(a.end_frame(), b.end_frame());
  int union_frames = 0;
  double sum = 0.0;
  for (int f = lo; f <= hi; ++f) {
    const Rect* ra = a.rect_at(f);
    const Rect* rb = b.rect_at(f);
    if (!ra && !rb) continue;  // gap between disjoint spans
    ++union_frames;
    if (ra && rb) sum += spatial_iou(*ra, *rb);
  }
  return sum / union_frames;
}

GroundTruth GroundTruth::from_annotations(const std::vector<AnnotationRecord>& records) {
  GroundTruth gt;
  for (const auto& rec : records) {
    if (rec.entries.empty())
      throw DataError("ground-truth record for video '" + rec.video_id + "' has no entries");
    BoxTrack track;
    track.start_frame = rec.entries.front().frame;
    for (std::size_t k = 0; k < rec.entries.size(); ++k) {
      const Annotation& a = rec.entries[k];
      if (a.kind != Annotation::Kind::Box)
        throw DataError("ground-truth record for video '" + rec.video_id +
                        "' contains a non-box entry");
      if (a.frame != track.start_frame + static_cast<int>(k))
        throw DataError("ground-truth tube for video '" + rec.video_id +
                        "' is not temporally contiguous");
      track.rects.push_back(a.rect);
    }
    gt.by_action[rec.action][rec.video_id].push_back(std::move(track));
  }
  return gt;
}

int GroundTruth::num_instances(const std::string& action) const {
  const auto it = by_action.find(action);
  if (it == by_action.end()) return 0;
  int n = 0;
  for (const auto& [video, tracks] : it->second) n += static_cast<int>(tracks.size());
  return n;
}

bool GroundTruth::video_is_positive(const std::string& action, const std::string& video_id) const {
  const auto it = by_action.find(action);
  if (it == by_action.end()) return false;
  return it->second.count(video_id) > 0;
}

std::vector<bool> match_detections(const std::vector<const DetectionRecord*>& ranked,
                                   const GroundTruth& gt, const std::string& action, double tau) {
  std::vector<bool> flags(ranked.size(), false);
  const auto action_it = gt.by_action.find(action);
  if (action_it == gt.by_action.end()) return flags;  // all false positives

  // matched[video] aligns with the ground-truth instance list.
  std::map<std::string, std::vector<bool>> matched;
  for (const auto& [video, tracks] : action_it->second)
    matched[video].assign(tracks.size(), false);

  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const DetectionRecord& det = *ranked[r];
    const auto vt = action_it->second.find(det.video_id);
    if (vt == action_it->second.end()) continue;  // negative video
    const std::vector<BoxTrack>& tracks = vt->second;
    auto& used = matched[det.video_id];
    int best = -1;
    double best_overlap = 0.0;
    for (std::size_t g = 0; g < tracks.size(); ++g) {
      if (used[g]) continue;
      const double overlap = st_iou(det.track, tracks[g]);
      if (overlap >= tau && overlap > best_overlap) {
        best_overlap = overlap;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      flags[r] = true;
    }
  }
  return flags;
}

double average_precision(const std::vector<bool>& flags, int num_gt) {
  if (num_gt < 1) throw DataError("average_precision requires num_gt >= 1");
  double ap = 0.0;
  int tp = 0;
  for (std::size_t r = 0; r < flags.size(); ++r) {
    if (!flags[r]) continue;
    ++tp;
    ap += static_cast<double>(tp) / static_cast<double>(r + 1);
  }
  return ap / num_gt;
}

double auc_from_samples(std::vector<std::pair<double, bool>> samples) {
  int pos = 0, neg = 0;
  for (const auto& [score, correct] : samples) (correct ? pos : neg)++;
  if (pos == 0 || neg == 0)
    throw DataError("auc requires both correct and incorrect samples");

  std::sort(samples.begin(), samples.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  // Threshold sweep over distinct scores; trapezoids handle ties.
  double area = 0.0;
  double prev_tpr = 0.0, prev_fpr = 0.0;
  int tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < samples.size()) {
    const double threshold = samples[i].first;
    while (i < samples.size() && samples[i].first == threshold) {
      (samples[i].second ? tp : fp)++;
      ++i;
    }
    const double tpr = static_cast<double>(tp) / pos;
    const double fpr = static_cast<double>(fp) / neg;
    area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_tpr = tpr;
    prev_fpr = fpr;
  }
  return area;
}

double EvalReport::map_at(double tau) const {
  for (std::size_t i = 0; i < taus.size(); ++i)
    if (std::abs(taus[i] - tau) < 1e-9) return mean_ap[i];
  throw DataError("tau not present in report");
}

EvalReport evaluate(const std::vector<DetectionRecord>& dets, const GroundTruth& gt,
                    const std::vector<double>& taus, DiagLog* log) {
  EvalReport report;
  report.taus = taus;

  std::set<std::string> actions;
  for (const auto& [action, videos] : gt.by_action) actions.insert(action);
  for (const auto& d : dets) actions.insert(d.action);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> ap_sum(taus.size(), 0.0), auc_sum(taus.size(), 0.0);
  std::vector<int> ap_count(taus.size(), 0), auc_count(taus.size(), 0);

  for (const auto& action : actions) {
    EvalReport::ActionRow row;
    row.action = action;
    row.num_gt = gt.num_instances(action);

    // Rank this action's detections by descending score; stable on ties.
    std::vector<const DetectionRecord*> ranked;
    for (const auto& d : dets)
      if (d.action == action) ranked.push_back(&d);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const DetectionRecord* a, const DetectionRecord* b) {
                       return a->score > b->score;
                     });

    if (row.num_gt == 0)
      diag(log, "action '" + action + "' has no ground-truth instances; AP excluded");

    for (std::size_t t = 0; t < taus.size(); ++t) {
      const double tau = taus[t];

      if (row.num_gt > 0) {
        const std::vector<bool> flags = match_detections(ranked, gt, action, tau);
        const double ap = average_precision(flags, row.num_gt);
        row.ap.push_back(ap);
        ap_sum[t] += ap;
        ap_count[t] += 1;
      } else {
        row.ap.push_back(nan);
      }

      // One top detection per video.
      std::map<std::string, const DetectionRecord*> top;
      for (const auto* d : ranked)
        if (!top.count(d->video_id)) top[d->video_id] = d;
      std::vector<std::pair<double, bool>> samples;
      for (const auto& [video_id, d] : top) {
        bool correct = false;
        if (gt.video_is_positive(action, video_id))
          for (const auto& track : gt.by_action.at(action).at(video_id))
            if (st_iou(d->track, track) >= tau) {
              correct = true;
              break;
            }
        samples.emplace_back(d->score, correct);
      }
      int pos = 0, neg = 0;
      for (const auto& [s, c] : samples) (c ? pos : neg)++;
      if (pos > 0 && neg > 0) {
        const double auc = auc_from_samples(std::move(samples));
        row.auc.push_back(auc);
        auc_sum[t] += auc;
        auc_count[t] += 1;
      } else {
        row.auc.push_back(nan);
        diag(log, "action '" + action + "' at tau " + std::to_string(tau) +
                      ": AUC undefined (needs both correct and incorrect top detections)");
      }
    }
    report.rows.push_back(std::move(row));
  }

  for (std::size_t t = 0; t < taus.size(); ++t) {
    report.mean_ap.push_back(ap_count[t] > 0 ? ap_sum[t] / ap_count[t] : nan);
    report.mean_auc.push_back(auc_count[t] > 0 ? auc_sum[t] / auc_count[t] : nan);
  }
  return report;
}

std::string format_report(const EvalReport& report) {
  std::ostringstream os;
  os << "action\tnum_gt";
  for (double tau : report.taus) os << "\tAP@" << tau;
  for (double tau : report.taus) os << "\tAUC@" << tau;
  os << "\n";
  auto emit = [&os](double v) {
    os << "\t";
    if (std::isnan(v))
      os << "-";
    else
      os << v;
  };
  for (const auto& row : report.rows) {
    os << row.action << "\t" << row.num_gt;
    for (double v : row.ap) emit(v);
    for (double v : row.auc) emit(v);
    os << "\n";
  }
  os << "mean\t" << "-";
  for (double v : report.mean_ap) emit(v);
  for (double v : report.mean_auc) emit(v);
  os << "\n";
  return os.str();
}

}  // namespace stil

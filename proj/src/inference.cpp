#include "stil/inference.hpp"

#include <algorithm>

#include "stil/parallel.hpp"
#include "stil/solver.hpp"

namespace stil {

double tube_score(const LinearModel& m, const VideoDecomposition& video, const Tube& tube) {
  if (tube.box_indices.empty()) throw DataError("tube_score on an empty tube");
  double sum = 0.0;
  for (int k = 0; k < tube.length(); ++k) sum += score(m, video.tube_box(tube, k).feature);
  return sum / tube.length();
}

std::vector<Detection> detect(const VideoDecomposition& video,
                              const std::vector<LinearModel>& models, const LinkConfig& link_cfg,
                              DiagLog* log) {
  std::vector<Detection> dets;
  if (video.total_boxes() == 0) {
    diag(log, "video '" + video.video_id + "' has no box proposals; no detections");
    return dets;
  }
  LinkConfig cfg = link_cfg;
  cfg.stop_rule = StopRule::Inference;
  for (const auto& m : models) {
    const std::vector<Tube> tubes = compute_tubes(video, model_box_score(m), cfg, nullptr, log);
    for (const auto& tube : tubes) {
      Detection d;
      d.video_id = video.video_id;
      d.action_id = m.action_id;
      d.tube = tube;
      d.score = tube_score(m, video, tube);
      dets.push_back(std::move(d));
    }
  }
  return dets;
}

Detection rerank_context(const Detection& d, const LinearModel& video_model,
                         const std::optional<Eigen::VectorXd>& video_feature, DiagLog* log) {
  if (!video_feature) {
    diag(log, "video '" + d.video_id + "' has no video feature; context reranking skipped");
    return d;
  }
  Detection out = d;
  out.context_term = score(video_model, *video_feature);
  out.score += out.context_term;
  return out;
}

std::map<std::string, double> rerank_negative(const std::map<std::string, double>& per_action) {
  if (per_action.empty()) throw DataError("rerank_negative requires at least one action");
  double max_score = per_action.begin()->second;
  for (const auto& [action, s] : per_action) max_score = std::max(max_score, s);
  std::map<std::string, double> adjusted;
  for (const auto& [action, s] : per_action) adjusted[action] = s - (max_score - s);
  return adjusted;
}

std::vector<DetectionRecord> run_inference(const Dataset& ds,
                                           const std::vector<LinearModel>& models,
                                           const std::vector<LinearModel>& video_models,
                                           const RerankFlags& flags, const LinkConfig& link_cfg,
                                           int jobs, DiagLog* log) {
  if (models.empty()) throw DataError("run_inference requires at least one model");
  for (const auto& m : models)
    if (static_cast<int>(m.weights.size()) != ds.feature_dim)
      throw DataError("model '" + m.action_id + "' does not match the dataset feature dim");
  if (flags.context && video_models.size() != models.size())
    throw DataError("context reranking needs one video model per action model");

  std::vector<std::vector<Detection>> per_video(ds.videos.size());
  parallel_for(ds.videos.size(), jobs, [&](std::size_t v) {
    const auto& video = ds.videos[v];
    std::vector<Detection> dets = detect(video, models, link_cfg, log);

    if (flags.context) {
      for (auto& d : dets) {
        const auto it = std::find_if(video_models.begin(), video_models.end(),
                                     [&](const LinearModel& m) { return m.action_id == d.action_id; });
        if (it == video_models.end())
          throw DataError("no video model for action '" + d.action_id + "'");
        d = rerank_context(d, *it, video.video_feature, log);
      }
    }

    if (flags.negative) {
      // Per-video context offsets so every action's tube score is
      // compared on the same (context-adjusted) footing.
      std::map<std::string, double> context_offset;
      for (const auto& m : models) context_offset[m.action_id] = 0.0;
      if (flags.context && video.video_feature)
        for (const auto& vm : video_models)
          context_offset[vm.action_id] = score(vm, *video.video_feature);

      for (auto& d : dets) {
        std::map<std::string, double> per_action;
        for (const auto& m : models)
          per_action[m.action_id] = tube_score(m, video, d.tube) + context_offset[m.action_id];
        const auto adjusted = rerank_negative(per_action);
        d.negative_penalty = per_action[d.action_id] - adjusted.at(d.action_id);
        d.score = adjusted.at(d.action_id);
      }
    }
    per_video[v] = std::move(dets);
  });

  std::vector<DetectionRecord> records;
  for (std::size_t v = 0; v < ds.videos.size(); ++v) {
    for (const auto& d : per_video[v]) {
      DetectionRecord rec;
      rec.video_id = d.video_id;
      rec.action = d.action_id;
      rec.score = d.score;
      rec.track = to_track(ds.videos[v], d.tube);
      records.push_back(std::move(rec));
    }
  }
  return records;
}

}  // namespace stil

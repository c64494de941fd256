#include "stil/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "stil/io.hpp"
#include "stil/normalize.hpp"
#include "stil/random.hpp"

namespace stil {
namespace {

constexpr double kCanvasW = 320.0;
constexpr double kCanvasH = 240.0;
// Per-frame walk step as a fraction of the box size; 0.15 keeps the
// consecutive-frame IoU above 0.56, comfortably over the 0.1 link
// threshold and the 0.4 linkability floor.
constexpr double kWalkStep = 0.15;

void check_spec(const GenSpec& spec) {
  if (spec.num_videos < 1 || spec.num_actions < 1) throw DataError("need videos and actions");
  if (spec.feature_dim < spec.num_actions)
    throw DataError("feature_dim must be >= num_actions for orthogonal class signatures");
  if (spec.frames_min < 1 || spec.frames_max < spec.frames_min)
    throw DataError("bad frames range");
  if (spec.boxes_per_frame < 1 + spec.decoy_tracks)
    throw DataError("boxes_per_frame must cover the actor and decoy tracks");
  if (spec.noise_sigma < 0.0 || spec.actor_prior_jitter < 0.0 || spec.distractor_prior_max < 0.0)
    throw DataError("negative noise parameters");
}

Eigen::VectorXf noisy_signature(Rng& rng, int dim, int signature, double sigma) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = sigma * rng.normal();
  if (signature >= 0) v[signature] += 1.0;
  return l2_normalize(Eigen::VectorXf(v.cast<float>()));
}

Eigen::VectorXf noise_feature(Rng& rng, int dim) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  return l2_normalize(Eigen::VectorXf(v.cast<float>()));
}

struct Walk {
  double x = 0.0, y = 0.0, w = 0.0, h = 0.0;

  static Walk start(Rng& rng) {
    Walk wk;
    wk.w = rng.uniform(40.0, 70.0);
    wk.h = rng.uniform(50.0, 90.0);
    wk.x = rng.uniform(0.0, kCanvasW - wk.w);
    wk.y = rng.uniform(0.0, kCanvasH - wk.h);
    return wk;
  }

  void step(Rng& rng) {
    x = std::clamp(x + rng.uniform(-kWalkStep * w, kWalkStep * w), 0.0, kCanvasW - w);
    y = std::clamp(y + rng.uniform(-kWalkStep * h, kWalkStep * h), 0.0, kCanvasH - h);
  }

  Rect rect() const { return Rect{x, y, x + w, y + h}; }
};

}  // namespace

SyntheticData generate_dataset(const GenSpec& spec) {
  check_spec(spec);
  SyntheticData out;
  Dataset& ds = out.dataset;
  ds.feature_dim = spec.feature_dim;
  ds.video_feature_dim = spec.feature_dim;

  for (int a = 0; a < spec.num_actions; ++a)
    ds.actions.push_back("action_" + std::to_string(a));
  std::sort(ds.actions.begin(), ds.actions.end());

  bool any_prior = false;
  for (int v = 0; v < spec.num_videos; ++v) {
    Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(v)));
    const int action = v % spec.num_actions;
    const std::string action_id = "action_" + std::to_string(action);

    VideoDecomposition video;
    char name[16];
    std::snprintf(name, sizeof name, "v%04d", v);
    video.video_id = name;
    video.num_frames = rng.uniform_int(spec.frames_min, spec.frames_max);
    video.labels = {action_id};
    video.frames.resize(static_cast<std::size_t>(video.num_frames));

    // Action extent: whole video when trimmed, a random contiguous range
    // otherwise.
    int act_start = 0, act_end = video.num_frames - 1;
    if (!spec.trimmed) {
      const int min_len = std::max(2, video.num_frames / 4);
      const int max_len = std::max(min_len, 2 * video.num_frames / 3);
      const int len = rng.uniform_int(min_len, max_len);
      act_start = rng.uniform_int(0, video.num_frames - len);
      act_end = act_start + len - 1;
    }

    Walk actor = Walk::start(rng);
    std::vector<Walk> decoys;
    for (int d = 0; d < spec.decoy_tracks; ++d) decoys.push_back(Walk::start(rng));

    AnnotationRecord gt;
    gt.video_id = video.video_id;
    gt.action = action_id;

    for (int f = 0; f < video.num_frames; ++f) {
      if (f > 0) {
        actor.step(rng);
        for (auto& d : decoys) d.step(rng);
      }
      auto& frame = video.frames[static_cast<std::size_t>(f)];

      BoxProposal actor_box;
      actor_box.frame = f;
      actor_box.rect = actor.rect();
      actor_box.prior =
          spec.actor_prior + rng.uniform(-spec.actor_prior_jitter, spec.actor_prior_jitter);
      const bool in_action = f >= act_start && f <= act_end;
      actor_box.feature = in_action ? noisy_signature(rng, spec.feature_dim, action, spec.noise_sigma)
                                    : noise_feature(rng, spec.feature_dim);
      frame.push_back(std::move(actor_box));

      if (in_action) {
        Annotation a;
        a.kind = Annotation::Kind::Box;
        a.frame = f;
        a.rect = actor.rect();
        gt.entries.push_back(a);
      }

      for (const auto& d : decoys) {
        BoxProposal box;
        box.frame = f;
        box.rect = d.rect();
        box.prior = rng.uniform(0.0, spec.distractor_prior_max);
        box.feature = noise_feature(rng, spec.feature_dim);
        frame.push_back(std::move(box));
      }

      for (int b = 1 + spec.decoy_tracks; b < spec.boxes_per_frame; ++b) {
        BoxProposal box;
        box.frame = f;
        const double w = rng.uniform(30.0, 90.0);
        const double h = rng.uniform(30.0, 90.0);
        const double x = rng.uniform(0.0, kCanvasW - w);
        const double y = rng.uniform(0.0, kCanvasH - h);
        box.rect = Rect{x, y, x + w, y + h};
        box.prior = rng.uniform(0.0, spec.distractor_prior_max);
        box.feature = noise_feature(rng, spec.feature_dim);
        frame.push_back(std::move(box));
      }

      for (const auto& box : frame) {
        if (!any_prior) {
          ds.prior_min = ds.prior_max = box.prior;
          any_prior = true;
        } else {
          ds.prior_min = std::min(ds.prior_min, box.prior);
          ds.prior_max = std::max(ds.prior_max, box.prior);
        }
      }
    }

    Eigen::VectorXd vf(spec.feature_dim);
    for (int i = 0; i < spec.feature_dim; ++i) vf[i] = spec.noise_sigma * rng.normal();
    vf[action] += 1.0;
    video.video_feature = l2_normalize(vf);

    for (auto& frame : video.frames)
      std::stable_sort(frame.begin(), frame.end(),
                       [](const BoxProposal& a, const BoxProposal& b) { return a.prior > b.prior; });

    ds.videos.push_back(std::move(video));
    out.ground_truth.push_back(std::move(gt));
  }
  return out;
}

GenOutput generate(const GenSpec& spec, const std::filesystem::path& dir) {
  const SyntheticData data = generate_dataset(spec);
  save_dataset(data.dataset, dir);
  GenOutput out;
  out.manifest = dir / "manifest.jsonl";
  out.ground_truth = dir / "ground_truth.jsonl";
  save_annotations(data.ground_truth, out.ground_truth);
  return out;
}

}  // namespace stil

#include "stil/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "stil/parallel.hpp"
#include "stil/random.hpp"
#include "stil/solver.hpp"

namespace stil {
namespace {

void check_config(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw DataError("epochs must be >= 1");
  if (cfg.folds < 1) throw DataError("folds must be >= 1");
  if (!(cfg.C > 0.0)) throw DataError("C must be > 0");
  if (cfg.lambda < 0.0) throw DataError("lambda must be >= 0");
  if (cfg.background_negatives_per_video < 0)
    throw DataError("background_negatives_per_video must be >= 0");
}

struct BoxRef {
  int frame = 0;
  int idx = 0;
};

// Lowest-prior boxes outside every tube, the "background" negatives.
std::vector<BoxRef> background_boxes(const VideoDecomposition& video, int limit) {
  if (limit <= 0) return {};
  std::vector<std::vector<char>> in_tube(video.frames.size());
  for (std::size_t f = 0; f < video.frames.size(); ++f)
    in_tube[f].assign(video.frames[f].size(), 0);
  for (const auto& tube : video.tubes)
    for (int k = 0; k < tube.length(); ++k)
      in_tube[static_cast<std::size_t>(tube.start_frame + k)]
             [static_cast<std::size_t>(tube.box_indices[static_cast<std::size_t>(k)])] = 1;

  std::vector<BoxRef> candidates;
  for (int f = 0; f < video.num_frames; ++f)
    for (int i = 0; i < static_cast<int>(video.frames[static_cast<std::size_t>(f)].size()); ++i)
      if (!in_tube[static_cast<std::size_t>(f)][static_cast<std::size_t>(i)])
        candidates.push_back({f, i});

  std::stable_sort(candidates.begin(), candidates.end(), [&](const BoxRef& a, const BoxRef& b) {
    const double pa = video.box(a.frame, a.idx).prior;
    const double pb = video.box(b.frame, b.idx).prior;
    if (pa != pb) return pa < pb;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.idx < b.idx;
  });
  if (static_cast<int>(candidates.size()) > limit) candidates.resize(static_cast<std::size_t>(limit));
  return candidates;
}

void append_example(TrainingSet& ts, const BoxProposal& box, double y) {
  WeightedExample e;
  e.x = box.feature.cast<double>();
  e.y = y;
  e.weight = 1.0;
  ts.examples.push_back(std::move(e));
}

// Shared state of one binary training problem.
struct Problem {
  const Dataset* ds = nullptr;
  std::string action;
  TrainConfig cfg;
  std::vector<std::size_t> positives;  // indices into ds->videos, tubes present
  std::vector<std::size_t> negatives;
  std::vector<int> fold_of;                          // parallel to positives
  std::vector<std::vector<BoxRef>> background;       // per video index in ds
  int effective_folds = 1;
};

Problem make_problem(const Dataset& ds, const std::string& action, const TrainConfig& cfg,
                     DiagLog* log) {
  check_config(cfg);
  if (!ds.has_action(action)) throw DataError("unknown action identifier '" + action + "'");

  Problem p;
  p.ds = &ds;
  p.action = action;
  p.cfg = cfg;
  for (std::size_t v = 0; v < ds.videos.size(); ++v) {
    const auto& video = ds.videos[v];
    if (video.tubes.empty()) {
      diag(log, "video '" + video.video_id + "' has no tubes and is skipped for action '" +
                    action + "'");
      continue;
    }
    (video.has_label(action) ? p.positives : p.negatives).push_back(v);
  }
  if (p.positives.empty()) throw DataError("no positive videos for action '" + action + "'");
  if (p.negatives.empty()) throw DataError("no negative videos for action '" + action + "'");

  p.background.resize(ds.videos.size());
  for (std::size_t v = 0; v < ds.videos.size(); ++v)
    if (!ds.videos[v].tubes.empty())
      p.background[v] = background_boxes(ds.videos[v], cfg.background_negatives_per_video);

  // Seeded shuffle, then round-robin fold assignment.
  std::vector<std::size_t> shuffled = p.positives;
  Rng rng(mix_seed(cfg.seed, 0xF01D5));
  rng.shuffle(shuffled);
  p.effective_folds = std::min<int>(cfg.folds, static_cast<int>(p.positives.size()));
  p.fold_of.assign(p.positives.size(), 0);
  for (std::size_t i = 0; i < shuffled.size(); ++i) {
    const auto it = std::find(p.positives.begin(), p.positives.end(), shuffled[i]);
    p.fold_of[static_cast<std::size_t>(it - p.positives.begin())] =
        static_cast<int>(i % static_cast<std::size_t>(p.effective_folds));
  }
  return p;
}

std::uint64_t fit_seed(const TrainConfig& cfg, int epoch, int fold) {
  return mix_seed(cfg.seed, 0x5EED0000ULL + static_cast<std::uint64_t>(epoch) * 256 +
                                static_cast<std::uint64_t>(fold + 1));
}

}  // namespace

double subtube_score(const VideoDecomposition& video, int tube_idx, int start_frame, int stride,
                     const BoxScoreFn& box_score, double lambda) {
  if (tube_idx < 0 || tube_idx >= static_cast<int>(video.tubes.size()))
    throw DataError("subtube_score: tube index out of range");
  const Tube& tube = video.tubes[static_cast<std::size_t>(tube_idx)];
  if (stride < 0 || start_frame < tube.start_frame || start_frame + stride > tube.end_frame())
    throw DataError("subtube_score: subtube leaves the tube span");
  double sum = 0.0;
  for (int f = start_frame; f <= start_frame + stride; ++f)
    sum += box_score(video.tube_box(tube, f - tube.start_frame));
  return sum - lambda * stride;
}

LatentAssignment e_step(const VideoDecomposition& video, const BoxScoreFn& box_score,
                        double lambda) {
  if (video.tubes.empty())
    throw DataError("e_step requires at least one tube in video '" + video.video_id + "'");

  LatentAssignment best{};
  double best_score = 0.0;
  bool have_best = false;

  for (int j = 0; j < static_cast<int>(video.tubes.size()); ++j) {
    const Tube& tube = video.tubes[static_cast<std::size_t>(j)];
    const int len = tube.length();
    // prefix[i] = sum of the first i box scores of this tube
    std::vector<double> prefix(static_cast<std::size_t>(len) + 1, 0.0);
    for (int i = 0; i < len; ++i)
      prefix[static_cast<std::size_t>(i) + 1] =
          prefix[static_cast<std::size_t>(i)] + box_score(video.tube_box(tube, i));

    for (int k = 0; k < len; ++k) {
      for (int s = 0; k + s < len; ++s) {
        const double score =
            prefix[static_cast<std::size_t>(k + s + 1)] - prefix[static_cast<std::size_t>(k)] -
            lambda * s;
        const LatentAssignment cand{j, tube.start_frame + k, tube.start_frame + k + s};
        bool better = false;
        if (!have_best || score > best_score) {
          better = true;
        } else if (score == best_score) {
          if (cand.length() != best.length())
            better = cand.length() > best.length();
          else if (cand.tube_idx != best.tube_idx)
            better = cand.tube_idx < best.tube_idx;
          else
            better = cand.start < best.start;
        }
        if (better) {
          best = cand;
          best_score = score;
          have_best = true;
        }
      }
    }
  }
  validate_assignment(video, best);
  return best;
}

namespace {

// Latent-state abstraction shared by STIL and the MIL baselines: which
// boxes of a video currently enter the loss.
struct Selection {
  LatentAssignment assignment{};   // STIL
  std::vector<BoxRef> boxes;       // MIL
  double mean_score = 0.0;
};

class InstanceModel {
 public:
  virtual ~InstanceModel() = default;
  virtual Selection initial(const Problem& p, std::size_t video_idx, bool positive) const = 0;
  virtual Selection relocalize(const Problem& p, std::size_t video_idx, const LinearModel& m,
                               bool positive) const = 0;
  virtual void append_boxes(const VideoDecomposition& video, const Selection& sel,
                            TrainingSet& ts, double y) const = 0;
  virtual double selection_length(const Selection& sel) const = 0;
};

class StilInstances : public InstanceModel {
 public:
  Selection initial(const Problem& p, std::size_t video_idx, bool) const override {
    return from_estep(p, video_idx, prior_box_score());
  }
  Selection relocalize(const Problem& p, std::size_t video_idx, const LinearModel& m,
                       bool) const override {
    return from_estep(p, video_idx, model_box_score(m));
  }
  void append_boxes(const VideoDecomposition& video, const Selection& sel, TrainingSet& ts,
                    double y) const override {
    const Tube& tube = video.tubes[static_cast<std::size_t>(sel.assignment.tube_idx)];
    for (int f = sel.assignment.start; f <= sel.assignment.end; ++f)
      append_example(ts, video.tube_box(tube, f - tube.start_frame), y);
  }
  double selection_length(const Selection& sel) const override {
    return sel.assignment.length();
  }

 private:
  static Selection from_estep(const Problem& p, std::size_t video_idx, const BoxScoreFn& fn) {
    const auto& video = p.ds->videos[video_idx];
    Selection sel;
    sel.assignment = e_step(video, fn, p.cfg.lambda);
    validate_assignment(video, sel.assignment);
    const Tube& tube = video.tubes[static_cast<std::size_t>(sel.assignment.tube_idx)];
    double sum = 0.0;
    for (int f = sel.assignment.start; f <= sel.assignment.end; ++f)
      sum += fn(video.tube_box(tube, f - tube.start_frame));
    sel.mean_score = sum / sel.assignment.length();
    return sel;
  }
};

class MilInstances : public InstanceModel {
 public:
  MilInstances(int mu, DiagLog* log) : mu_(mu), log_(log) {}

  Selection initial(const Problem& p, std::size_t video_idx, bool positive) const override {
    const auto& video = p.ds->videos[video_idx];
    const int count = clamped_mu(video);
    Selection sel;
    if (positive) {
      // Random selection at initialization.
      std::vector<BoxRef> all = all_boxes(video);
      Rng rng(mix_seed(p.cfg.seed, 0xB0C5ULL + video_idx));
      rng.shuffle(all);
      all.resize(static_cast<std::size_t>(count));
      std::stable_sort(all.begin(), all.end(), by_position);
      sel.boxes = std::move(all);
      sel.mean_score = 0.0;
    } else {
      sel = top_by(video, count, prior_box_score());
    }
    return sel;
  }

  Selection relocalize(const Problem& p, std::size_t video_idx, const LinearModel& m,
                       bool) const override {
    const auto& video = p.ds->videos[video_idx];
    return top_by(video, clamped_mu(video), model_box_score(m));
  }

  void append_boxes(const VideoDecomposition& video, const Selection& sel, TrainingSet& ts,
                    double y) const override {
    for (const auto& ref : sel.boxes) append_example(ts, video.box(ref.frame, ref.idx), y);
  }

  double selection_length(const Selection& sel) const override {
    return static_cast<double>(sel.boxes.size());
  }

 private:
  static bool by_position(const BoxRef& a, const BoxRef& b) {
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.idx < b.idx;
  }

  static std::vector<BoxRef> all_boxes(const VideoDecomposition& video) {
    std::vector<BoxRef> refs;
    for (int f = 0; f < video.num_frames; ++f)
      for (int i = 0; i < static_cast<int>(video.frames[static_cast<std::size_t>(f)].size()); ++i)
        refs.push_back({f, i});
    return refs;
  }

  int clamped_mu(const VideoDecomposition& video) const {
    const int total = static_cast<int>(video.total_boxes());
    if (mu_ > total) {
      diag(log_, "mu=" + std::to_string(mu_) + " exceeds the " + std::to_string(total) +
                     " boxes of video '" + video.video_id + "'; using all boxes");
      return total;
    }
    return mu_;
  }

  Selection top_by(const VideoDecomposition& video, int count, const BoxScoreFn& fn) const {
    std::vector<BoxRef> refs = all_boxes(video);
    std::vector<double> scores(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i)
      scores[i] = fn(video.box(refs[i].frame, refs[i].idx));
    std::vector<std::size_t> order(refs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return by_position(refs[a], refs[b]);
    });
    Selection sel;
    double sum = 0.0;
    for (int i = 0; i < count; ++i) {
      sel.boxes.push_back(refs[order[static_cast<std::size_t>(i)]]);
      sum += scores[order[static_cast<std::size_t>(i)]];
    }
    std::stable_sort(sel.boxes.begin(), sel.boxes.end(), by_position);
    sel.mean_score = count > 0 ? sum / count : 0.0;
    return sel;
  }

  int mu_;
  DiagLog* log_;
};

LinearModel run_em(const Problem& p, const InstanceModel& inst, TrainTrace* trace) {
  const Dataset& ds = *p.ds;

  // Initialization from prior scores (random for MIL positives).
  std::vector<Selection> selection(ds.videos.size());
  parallel_for(p.positives.size(), p.cfg.jobs, [&](std::size_t i) {
    selection[p.positives[i]] = inst.initial(p, p.positives[i], true);
  });
  parallel_for(p.negatives.size(), p.cfg.jobs, [&](std::size_t i) {
    selection[p.negatives[i]] = inst.initial(p, p.negatives[i], false);
  });

  auto build_training_set = [&](int excluded_fold, const std::vector<Selection>& sel,
                                std::vector<std::string>* provenance) {
    TrainingSet ts;
    ts.C = p.cfg.C;
    for (std::size_t i = 0; i < p.positives.size(); ++i) {
      if (p.effective_folds > 1 && p.fold_of[i] == excluded_fold) continue;
      const auto& video = ds.videos[p.positives[i]];
      inst.append_boxes(video, sel[p.positives[i]], ts, +1.0);
      if (provenance) provenance->push_back(video.video_id);
    }
    for (std::size_t v : p.negatives)
      inst.append_boxes(ds.videos[v], sel[v], ts, -1.0);
    for (std::size_t v = 0; v < ds.videos.size(); ++v)
      for (const auto& ref : p.background[v])
        append_example(ts, ds.videos[v].box(ref.frame, ref.idx), -1.0);
    return ts;
  };

  auto log_row = [&](int epoch, int fold, const std::vector<std::size_t>& videos,
                     const std::vector<Selection>& sel, double objective) {
    if (!trace) return;
    EpochLogRow row;
    row.epoch = epoch;
    row.fold = fold;
    row.svm_objective = objective;
    double len = 0.0, score = 0.0;
    for (std::size_t v : videos) {
      len += inst.selection_length(sel[v]);
      score += sel[v].mean_score;
    }
    if (!videos.empty()) {
      row.mean_subtube_length = len / static_cast<double>(videos.size());
      row.mean_subtube_score = score / static_cast<double>(videos.size());
    }
    trace->rows.push_back(row);
  };

  LinearModel model;
  for (int epoch = 1; epoch <= p.cfg.epochs; ++epoch) {
    const std::vector<Selection> snapshot = selection;

    for (int fold = 0; fold < p.effective_folds; ++fold) {
      std::vector<std::string> provenance;
      TrainingSet ts = build_training_set(fold, snapshot, &provenance);
      SolverTrace strace;
      const LinearModel fold_model = fit(ts, fit_seed(p.cfg, epoch, fold), &strace);

      std::vector<std::size_t> fold_members;
      for (std::size_t i = 0; i < p.positives.size(); ++i)
        if (p.fold_of[i] == fold) fold_members.push_back(p.positives[i]);

      // Fold isolation: the relocalization model never saw this fold.
      if (p.effective_folds > 1)
        for (std::size_t v : fold_members)
          if (std::find(provenance.begin(), provenance.end(), ds.videos[v].video_id) !=
              provenance.end())
            throw std::logic_error("fold isolation violated");

      parallel_for(fold_members.size(), p.cfg.jobs, [&](std::size_t i) {
        selection[fold_members[i]] = inst.relocalize(p, fold_members[i], fold_model, true);
      });

      log_row(epoch, fold, fold_members, selection, strace.pass_objectives.back());
      if (trace) {
        FoldProvenance fp;
        fp.epoch = epoch;
        fp.fold = fold;
        fp.model_positive_videos = std::move(provenance);
        for (std::size_t v : fold_members)
          fp.relocalized_videos.push_back(ds.videos[v].video_id);
        trace->provenance.push_back(std::move(fp));
      }
    }

    // Refit on every fold's updated selection; this is the final model
    // after the last epoch and the negative-mining model before it.
    TrainingSet ts = build_training_set(-1, selection, nullptr);
    SolverTrace strace;
    model = fit(ts, fit_seed(p.cfg, epoch, p.effective_folds), &strace);
    log_row(epoch, -1, p.positives, selection, strace.pass_objectives.back());

    if (epoch < p.cfg.epochs) {
      parallel_for(p.negatives.size(), p.cfg.jobs, [&](std::size_t i) {
        selection[p.negatives[i]] = inst.relocalize(p, p.negatives[i], model, false);
      });
    }
  }

  model.action_id = p.action;
  return model;
}

}  // namespace

LinearModel train_stil(const Dataset& ds, const std::string& action, const TrainConfig& cfg,
                       TrainTrace* trace, DiagLog* log) {
  const Problem p = make_problem(ds, action, cfg, log);
  return run_em(p, StilInstances{}, trace);
}

LinearModel train_mil(const Dataset& ds, const std::string& action, const TrainConfig& cfg,
                      int mu, TrainTrace* trace, DiagLog* log) {
  if (mu < 1) throw DataError("mu must be >= 1");
  const Problem p = make_problem(ds, action, cfg, log);
  return run_em(p, MilInstances{mu, log}, trace);
}

LinearModel train_video_classifier(const Dataset& ds, const std::string& action,
                                   const TrainConfig& cfg, DiagLog* log) {
  check_config(cfg);
  if (!ds.has_action(action)) throw DataError("unknown action identifier '" + action + "'");
  TrainingSet ts;
  ts.C = cfg.C;
  for (const auto& video : ds.videos) {
    if (!video.video_feature) {
      diag(log, "video '" + video.video_id + "' has no video feature; skipped for context model");
      continue;
    }
    WeightedExample e;
    e.x = *video.video_feature;
    e.y = video.has_label(action) ? 1.0 : -1.0;
    ts.examples.push_back(std::move(e));
  }
  if (ts.examples.empty())
    throw DataError("no video features available for the context classifier");
  LinearModel m = fit(ts, mix_seed(cfg.seed, 0x71DE0));
  m.action_id = action;
  return m;
}

}  // namespace stil

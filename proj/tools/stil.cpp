#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "stil/evaluation.hpp"
#include "stil/inference.hpp"
#include "stil/io.hpp"
#include "stil/linking.hpp"
#include "stil/parallel.hpp"
#include "stil/random.hpp"
#include "stil/solver.hpp"
#include "stil/supervision.hpp"
#include "stil/synthetic.hpp"
#include "stil/trainer.hpp"
#include "stil/types.hpp"

namespace fs = std::filesystem;

namespace {

void flush_diags(const stil::DiagLog& log) {
  for (const auto& line : log.lines()) std::cerr << "note: " << line << "\n";
}

int default_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

void add_gen_options(CLI::App* cmd, stil::GenSpec& spec) {
  cmd->add_option("--num-videos", spec.num_videos, "Videos to generate");
  cmd->add_option("--num-actions", spec.num_actions, "Distinct actions");
  cmd->add_option("--frames-min", spec.frames_min, "Minimum frames per video");
  cmd->add_option("--frames-max", spec.frames_max, "Maximum frames per video");
  cmd->add_option("--boxes-per-frame", spec.boxes_per_frame, "Box proposals per frame");
  cmd->add_option("--feature-dim", spec.feature_dim, "Box feature dimensionality");
  cmd->add_option("--actor-prior", spec.actor_prior, "Mean prior score of actor boxes");
  cmd->add_option("--actor-prior-jitter", spec.actor_prior_jitter,
                  "Uniform +/- jitter on actor priors");
  cmd->add_option("--distractor-prior-max", spec.distractor_prior_max,
                  "Upper bound of distractor priors");
  cmd->add_option("--noise-sigma", spec.noise_sigma, "Gaussian feature noise");
  cmd->add_option("--decoy-tracks", spec.decoy_tracks, "Coherent non-actor walks per video");
  cmd->add_flag("--trimmed,!--untrimmed", spec.trimmed,
                "Action spans the whole video (otherwise a random range)");
}

stil::LinkConfig link_config_from(int max_tubes, double suppression_iou) {
  stil::LinkConfig cfg;
  cfg.max_tubes = max_tubes;
  cfg.suppression_iou = suppression_iou;
  return cfg;
}

std::vector<stil::AnnotationRecord> level_annotations(
    const std::vector<stil::AnnotationRecord>& gt, const std::string& level) {
  using stil::Annotation;
  if (level == "labels") return {};
  if (level == "points1") return stil::derive_annotations(gt, Annotation::Kind::Point, 1);
  if (level == "points10") return stil::derive_annotations(gt, Annotation::Kind::Point, 10);
  if (level == "boxes1") return stil::derive_annotations(gt, Annotation::Kind::Box, 1);
  if (level == "boxes10") return stil::derive_annotations(gt, Annotation::Kind::Box, 10);
  if (level == "mixture") {
    // 50/50 video split between labels-only and boxes every 10th frame.
    std::vector<stil::AnnotationRecord> half;
    for (std::size_t i = 0; i < gt.size(); ++i)
      if (i % 2 == 1) half.push_back(gt[i]);
    return stil::derive_annotations(half, Annotation::Kind::Box, 10);
  }
  throw stil::DataError("unknown supervision level '" + level + "'");
}

stil::CostStrategy level_cost(const std::string& level) {
  using stil::CostStrategy;
  if (level == "labels") return CostStrategy::labels();
  if (level == "points1") return CostStrategy::points(1);
  if (level == "points10") return CostStrategy::points(10);
  if (level == "boxes1") return CostStrategy::boxes(1);
  if (level == "boxes10") return CostStrategy::boxes(10);
  if (level == "mixture")
    return CostStrategy::mixture(0.5, CostStrategy::labels(), CostStrategy::boxes(10));
  throw stil::DataError("unknown supervision level '" + level + "'");
}

std::vector<stil::LinearModel> train_all_actions(const stil::Dataset& ds,
                                                 const std::string& method, int mu,
                                                 const stil::TrainConfig& cfg,
                                                 std::vector<stil::TrainTrace>* traces,
                                                 stil::DiagLog* log) {
  std::vector<stil::LinearModel> models(ds.actions.size());
  if (traces) traces->resize(ds.actions.size());
  stil::parallel_for(ds.actions.size(), cfg.jobs, [&](std::size_t a) {
    stil::TrainConfig sub = cfg;
    sub.seed = stil::mix_seed(cfg.seed, 0xAC710000ULL + a);
    sub.jobs = 1;  // parallelism lives at the action level here
    stil::TrainTrace* trace = traces ? &(*traces)[a] : nullptr;
    if (method == "stil")
      models[a] = stil::train_stil(ds, ds.actions[a], sub, trace, log);
    else if (method == "mil")
      models[a] = stil::train_mil(ds, ds.actions[a], sub, 1, trace, log);
    else if (method == "genmil")
      models[a] = stil::train_mil(ds, ds.actions[a], sub, mu, trace, log);
    else
      throw stil::DataError("unknown method '" + method + "'");
  });
  return models;
}

std::vector<stil::LinearModel> train_video_models(const stil::Dataset& ds,
                                                  const stil::TrainConfig& cfg,
                                                  stil::DiagLog* log) {
  std::vector<stil::LinearModel> models(ds.actions.size());
  stil::parallel_for(ds.actions.size(), cfg.jobs, [&](std::size_t a) {
    stil::TrainConfig sub = cfg;
    sub.seed = stil::mix_seed(cfg.seed, 0x71DE0000ULL + a);
    models[a] = stil::train_video_classifier(ds, ds.actions[a], sub, log);
  });
  return models;
}

void write_train_log(const fs::path& path, const std::vector<std::string>& actions,
                     const std::vector<stil::TrainTrace>& traces) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw stil::DataError("cannot write '" + path.string() + "'");
  out << "action\tepoch\tfold\tmean_subtube_length\tmean_subtube_score\tsvm_objective\n";
  for (std::size_t a = 0; a < traces.size(); ++a)
    for (const auto& row : traces[a].rows)
      out << actions[a] << "\t" << row.epoch << "\t" << row.fold << "\t"
          << row.mean_subtube_length << "\t" << row.mean_subtube_score << "\t"
          << row.svm_objective << "\n";
}

std::string format_seconds(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Everything the paper's workflow needs for one (method, level) cell.
struct BenchCell {
  std::string method;
  std::string level;
  double cost = 0.0;
  std::vector<double> map;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly-supervised spatio-temporal action localization toolkit"};
  app.require_subcommand(1);

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "Generate a synthetic proposal dataset");
  stil::GenSpec gen_spec;
  std::string gen_out = "data";
  std::uint64_t gen_seed = 1;
  add_gen_options(gen, gen_spec);
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->set_config("--config", "", "Read options from a config file");

  // ---- link ----
  auto* link = app.add_subcommand("link", "Link box proposals into tubes from prior scores");
  std::string link_data, link_out = "tubes.jsonl", link_supervision;
  int link_max_tubes = 5;
  double link_suppression = 0.5;
  int link_jobs = default_jobs();
  link->add_option("--data", link_data, "Dataset manifest")->required();
  link->add_option("--out", link_out, "Tube dump path");
  link->add_option("--supervision", link_supervision,
                   "Annotation file whose scores strengthen the priors");
  link->add_option("--max-tubes", link_max_tubes, "Tubes per video");
  link->add_option("--suppression-iou", link_suppression, "Per-frame suppression threshold");
  link->add_option("--jobs", link_jobs, "Worker threads");
  link->set_config("--config");

  // ---- train ----
  auto* train = app.add_subcommand("train", "Train per-action box classifiers");
  std::string train_data, train_method = "stil", train_supervision;
  std::string train_models_out = "models.jsonl", train_video_models_out, train_log_path;
  stil::TrainConfig train_cfg;
  int train_mu = 10;
  int train_max_tubes = 5;
  train_cfg.jobs = default_jobs();
  train->add_option("--data", train_data, "Dataset manifest")->required();
  train->add_option("--method", train_method, "stil | mil | genmil")
      ->check(CLI::IsMember({"stil", "mil", "genmil"}));
  train->add_option("--mu", train_mu, "Boxes per video for genmil");
  train->add_option("--C", train_cfg.C, "Regularization parameter");
  train->add_option("--epochs", train_cfg.epochs, "EM epochs");
  train->add_option("--folds", train_cfg.folds, "Relocalization folds");
  train->add_option("--lambda", train_cfg.lambda, "Subtube length regularizer");
  train->add_option("--background-negatives", train_cfg.background_negatives_per_video,
                    "Low-prior background boxes per video");
  train->add_option("--max-tubes", train_max_tubes, "Tubes per video for linking");
  train->add_option("--supervision", train_supervision, "Annotation file added to priors");
  train->add_option("--models-out", train_models_out, "Model file path");
  train->add_option("--video-models-out", train_video_models_out,
                    "Context classifier file path (requires video features)");
  train->add_option("--log", train_log_path, "Training log path (TSV)");
  train->add_option("--seed", train_cfg.seed, "Training seed");
  train->add_option("--jobs", train_cfg.jobs, "Worker threads");
  train->set_config("--config");

  // ---- infer ----
  auto* infer = app.add_subcommand("infer", "Detect tubes in test videos with trained models");
  std::string infer_data, infer_models, infer_video_models, infer_out = "detections.jsonl";
  std::vector<std::string> infer_rerank;
  int infer_max_tubes = 5;
  int infer_jobs = default_jobs();
  infer->add_option("--data", infer_data, "Dataset manifest")->required();
  infer->add_option("--models", infer_models, "Model file")->required();
  infer->add_option("--video-models", infer_video_models, "Context classifier file");
  infer->add_option("--rerank", infer_rerank,
                    "Rerankers to apply: context, negative (comma separated)")
      ->delimiter(',');
  infer->add_option("--max-tubes", infer_max_tubes, "Tubes per video per action");
  infer->add_option("--out", infer_out, "Detection dump path");
  infer->add_option("--jobs", infer_jobs, "Worker threads");
  infer->set_config("--config");

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "Score detections against ground truth");
  std::string eval_dets, eval_gt, eval_out;
  std::vector<double> eval_taus = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  eval->add_option("--detections", eval_dets, "Detection dump")->required();
  eval->add_option("--gt", eval_gt, "Ground-truth annotation file")->required();
  eval->add_option("--taus", eval_taus, "Overlap thresholds")->delimiter(',');
  eval->add_option("--out", eval_out, "Report path (stdout when omitted)");
  eval->set_config("--config");

  // ---- cost ----
  auto* cost = app.add_subcommand("cost", "Annotation cost per supervision level");
  std::vector<double> cost_frames = {65.0, 34.0, 150.0};
  std::string cost_out;
  cost->add_option("--frames", cost_frames, "Mean frames per video, one column each")
      ->delimiter(',');
  cost->add_option("--out", cost_out, "Table path (stdout when omitted)");

  // ---- bench ----
  auto* bench = app.add_subcommand(
      "bench", "End-to-end synthetic benchmark: method x supervision level");
  stil::GenSpec bench_spec;
  std::string bench_out_dir = "bench";
  std::vector<std::string> bench_methods = {"mil", "genmil", "stil"};
  std::vector<std::string> bench_levels = {"labels", "points10", "boxes10"};
  std::vector<std::string> bench_rerank;
  std::vector<double> bench_taus = {0.2, 0.5};
  stil::TrainConfig bench_cfg;
  int bench_mu = 10;
  int bench_max_tubes = 5;
  std::uint64_t bench_seed = 1;
  bench_cfg.jobs = default_jobs();
  add_gen_options(bench, bench_spec);
  bench->add_option("--out-dir", bench_out_dir, "Working directory for artifacts");
  bench->add_option("--methods", bench_methods, "Methods to run")->delimiter(',');
  bench->add_option("--levels", bench_levels, "Supervision levels")->delimiter(',');
  bench->add_option("--rerank", bench_rerank, "Rerankers for inference")->delimiter(',');
  bench->add_option("--taus", bench_taus, "Overlap thresholds")->delimiter(',');
  bench->add_option("--mu", bench_mu, "Boxes per video for genmil");
  bench->add_option("--C", bench_cfg.C, "Regularization parameter");
  bench->add_option("--epochs", bench_cfg.epochs, "EM epochs");
  bench->add_option("--folds", bench_cfg.folds, "Relocalization folds");
  bench->add_option("--lambda", bench_cfg.lambda, "Subtube length regularizer");
  bench->add_option("--max-tubes", bench_max_tubes, "Tubes per video");
  bench->add_option("--seed", bench_seed, "Seed for generation and training");
  bench->add_option("--jobs", bench_cfg.jobs, "Worker threads");
  bench->set_config("--config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  stil::DiagLog diag;
  try {
    if (gen->parsed()) {
      gen_spec.seed = gen_seed;
      const stil::GenOutput out = stil::generate(gen_spec, gen_out);
      std::cout << "manifest: " << out.manifest.string() << "\n"
                << "ground_truth: " << out.ground_truth.string() << "\n";
    }

    if (link->parsed()) {
      stil::Dataset ds = stil::load_dataset(link_data, &diag);
      if (!link_supervision.empty()) {
        const auto anns = stil::load_annotations(link_supervision, &ds);
        stil::apply_supervision(ds, anns, &diag);
      }
      stil::link_dataset(ds, link_config_from(link_max_tubes, link_suppression), link_jobs,
                         &diag);
      stil::save_tube_dump(ds, link_out);
      std::size_t tubes = 0;
      for (const auto& v : ds.videos) tubes += v.tubes.size();
      std::cout << "linked " << tubes << " tubes over " << ds.videos.size() << " videos\n";
    }

    if (train->parsed()) {
      stil::Dataset ds = stil::load_dataset(train_data, &diag);
      if (!train_supervision.empty()) {
        const auto anns = stil::load_annotations(train_supervision, &ds);
        stil::apply_supervision(ds, anns, &diag);
      }
      stil::link_dataset(ds, link_config_from(train_max_tubes, 0.5), train_cfg.jobs, &diag);
      std::vector<stil::TrainTrace> traces;
      const auto models =
          train_all_actions(ds, train_method, train_mu, train_cfg, &traces, &diag);
      stil::save_models(models, train_models_out);
      std::cout << "wrote " << models.size() << " models to " << train_models_out << "\n";
      if (!train_video_models_out.empty()) {
        const auto video_models = train_video_models(ds, train_cfg, &diag);
        stil::save_models(video_models, train_video_models_out);
        std::cout << "wrote " << video_models.size() << " video models to "
                  << train_video_models_out << "\n";
      }
      if (!train_log_path.empty()) write_train_log(train_log_path, ds.actions, traces);
    }

    if (infer->parsed()) {
      const stil::Dataset ds = stil::load_dataset(infer_data, &diag);
      const auto models = stil::load_models(infer_models);
      stil::RerankFlags flags;
      for (const auto& r : infer_rerank) {
        if (r == "context")
          flags.context = true;
        else if (r == "negative")
          flags.negative = true;
        else
          throw stil::DataError("unknown reranker '" + r + "'");
      }
      std::vector<stil::LinearModel> video_models;
      if (!infer_video_models.empty()) video_models = stil::load_models(infer_video_models);
      if (flags.context && video_models.empty())
        throw stil::DataError("--rerank context requires --video-models");
      stil::LinkConfig cfg = link_config_from(infer_max_tubes, 0.5);
      const auto dets =
          stil::run_inference(ds, models, video_models, flags, cfg, infer_jobs, &diag);
      stil::save_detections(dets, infer_out);
      std::cout << "wrote " << dets.size() << " detections to " << infer_out << "\n";
    }

    if (eval->parsed()) {
      const auto dets = stil::load_detections(eval_dets);
      const auto gt = stil::GroundTruth::from_annotations(stil::load_annotations(eval_gt));
      const stil::EvalReport report = stil::evaluate(dets, gt, eval_taus, &diag);
      const std::string text = stil::format_report(report);
      if (eval_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(eval_out, std::ios::trunc);
        if (!out) throw stil::DataError("cannot write '" + eval_out + "'");
        out << text;
      }
    }

    if (cost->parsed()) {
      const std::vector<std::pair<std::string, stil::CostStrategy>> rows = {
          {"labels", stil::CostStrategy::labels()},
          {"points(stride=10)", stil::CostStrategy::points(10)},
          {"mixture(50:50)", stil::CostStrategy::mixture(0.5, stil::CostStrategy::labels(),
                                                         stil::CostStrategy::boxes(10))},
          {"points(stride=1)", stil::CostStrategy::points(1)},
          {"boxes(stride=10)", stil::CostStrategy::boxes(10)},
          {"boxes(stride=1)", stil::CostStrategy::boxes(1)},
      };
      std::ostringstream os;
      os << "supervision_level";
      for (double f : cost_frames) os << "\tF=" << f;
      os << "\n";
      for (const auto& [name, strategy] : rows) {
        os << name;
        for (double f : cost_frames) os << "\t" << format_seconds(stil::annotation_cost(f, strategy));
        os << "\n";
      }
      if (cost_out.empty()) {
        std::cout << os.str();
      } else {
        std::ofstream out(cost_out, std::ios::trunc);
        if (!out) throw stil::DataError("cannot write '" + cost_out + "'");
        out << os.str();
      }
    }

    if (bench->parsed()) {
      bench_spec.seed = bench_seed;
      stil::GenSpec test_spec = bench_spec;
      test_spec.seed = stil::mix_seed(bench_seed, 0x7E57);
      const fs::path root = bench_out_dir;
      const auto train_files = stil::generate(bench_spec, root / "train_data");
      const auto test_files = stil::generate(test_spec, root / "test_data");
      const auto train_gt = stil::load_annotations(train_files.ground_truth);
      const stil::Dataset test_ds = stil::load_dataset(test_files.manifest, &diag);
      const auto gt =
          stil::GroundTruth::from_annotations(stil::load_annotations(test_files.ground_truth));

      stil::RerankFlags flags;
      for (const auto& r : bench_rerank) {
        if (r == "context")
          flags.context = true;
        else if (r == "negative")
          flags.negative = true;
        else
          throw stil::DataError("unknown reranker '" + r + "'");
      }

      double mean_frames = 0.0;
      {
        const stil::Dataset train_ds = stil::load_dataset(train_files.manifest);
        for (const auto& v : train_ds.videos) mean_frames += v.num_frames;
        mean_frames /= static_cast<double>(train_ds.videos.size());
      }

      std::vector<BenchCell> cells;
      for (const auto& level : bench_levels) {
        stil::Dataset train_ds = stil::load_dataset(train_files.manifest, &diag);
        const auto anns = level_annotations(train_gt, level);
        if (!anns.empty()) stil::apply_supervision(train_ds, anns, &diag);
        stil::link_dataset(train_ds, link_config_from(bench_max_tubes, 0.5), bench_cfg.jobs,
                           &diag);

        for (const auto& method : bench_methods) {
          stil::TrainConfig cfg = bench_cfg;
          cfg.seed = stil::mix_seed(bench_seed, std::hash<std::string>{}(method + "/" + level));
          const auto models = train_all_actions(train_ds, method, bench_mu, cfg, nullptr, &diag);
          std::vector<stil::LinearModel> video_models;
          if (flags.context) video_models = train_video_models(train_ds, cfg, &diag);

          const auto dets = stil::run_inference(test_ds, models, video_models, flags,
                                                link_config_from(bench_max_tubes, 0.5),
                                                bench_cfg.jobs, &diag);
          const fs::path det_path =
              root / ("detections_" + method + "_" + level + ".jsonl");
          stil::save_detections(dets, det_path);
          const stil::EvalReport report = stil::evaluate(dets, gt, bench_taus, &diag);

          BenchCell cell;
          cell.method = method;
          cell.level = level;
          cell.cost = stil::annotation_cost(mean_frames, level_cost(level));
          cell.map = report.mean_ap;
          cells.push_back(std::move(cell));
        }
      }

      std::ostringstream os;
      os << "method\tsupervision\tcost_s_per_video";
      for (double tau : bench_taus) os << "\tmAP@" << tau;
      os << "\n";
      for (const auto& cell : cells) {
        os << cell.method << "\t" << cell.level << "\t" << format_seconds(cell.cost);
        for (double v : cell.map) os << "\t" << v;
        os << "\n";
      }
      const fs::path report_path = root / "bench_report.tsv";
      std::ofstream out(report_path, std::ios::trunc);
      if (!out) throw stil::DataError("cannot write '" + report_path.string() + "'");
      out << os.str();
      std::cout << os.str();
    }

    flush_diags(diag);
  } catch (const stil::DataError& e) {
    flush_diags(diag);
    std::cerr << "error: data: " << e.what() << "\n";
    return 2;
  } catch (const stil::NumericError& e) {
    flush_diags(diag);
    std::cerr << "error: numeric: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    flush_diags(diag);
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

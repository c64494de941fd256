#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stil/io.hpp"
#include "stil/normalize.hpp"
#include "stil/random.hpp"
#include "stil/synthetic.hpp"
#include "stil/types.hpp"

using namespace stil;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("stil_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Feature blob: "STILFT01" magic, u32 dim, float32 values, all little endian.
void write_blob(const fs::path& path, std::uint32_t dim, const std::vector<float>& values) {
  std::ofstream out(path, std::ios::binary);
  out.write("STILFT01", 8);
  char b[4];
  auto put32 = [&](std::uint32_t v) {
    b[0] = static_cast<char>(v & 0xff);
    b[1] = static_cast<char>((v >> 8) & 0xff);
    b[2] = static_cast<char>((v >> 16) & 0xff);
    b[3] = static_cast<char>((v >> 24) & 0xff);
    out.write(b, 4);
  };
  put32(dim);
  for (float f : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put32(bits);
  }
}

}  // namespace

TEST_CASE("load_dataset echoes a minimal manifest") {
  const fs::path dir = temp_dir("load_min");
  write_blob(dir / "v.feat", 2, {3.0f, 4.0f, 0.0f, 0.0f});
  std::ofstream(dir / "manifest.jsonl")
      << R"({"video_id":"v","num_frames":2,"labels":["jump"],"feature_file":"v.feat","boxes":[)"
      << R"({"frame":0,"x1":0,"y1":0,"x2":10,"y2":10,"prior":0.5,"feat_offset":0},)"
      << R"({"frame":1,"x1":1,"y1":0,"x2":11,"y2":10,"prior":0.7,"feat_offset":1}]})"
      << "\n";

  DiagLog log;
  const Dataset ds = load_dataset(dir / "manifest.jsonl", &log);
  REQUIRE(ds.videos.size() == 1);
  const auto& v = ds.videos[0];
  CHECK(v.num_frames == 2);
  CHECK(v.total_boxes() == 2);
  CHECK(ds.feature_dim == 2);
  CHECK(ds.actions == std::vector<std::string>{"jump"});
  CHECK(ds.prior_min == doctest::Approx(0.5));
  CHECK(ds.prior_max == doctest::Approx(0.7));
  CHECK_FALSE(log.empty());  // prior range note

  // raw (3,4) is stored l2-normalized
  CHECK(v.box(0, 0).feature[0] == doctest::Approx(0.6f));
  CHECK(v.box(0, 0).feature[1] == doctest::Approx(0.8f));
  // zero raw feature stays zero
  CHECK(v.box(1, 0).feature.norm() == 0.0f);
}

TEST_CASE("load_dataset rejects a degenerate box with location info") {
  const fs::path dir = temp_dir("load_degen");
  write_blob(dir / "v.feat", 2, {1.0f, 0.0f});
  std::ofstream(dir / "manifest.jsonl")
      << R"({"video_id":"vbad","num_frames":1,"labels":["a"],"feature_file":"v.feat","boxes":[)"
      << R"({"frame":0,"x1":5,"y1":0,"x2":5,"y2":10,"prior":0.5,"feat_offset":0}]})"
      << "\n";
  try {
    load_dataset(dir / "manifest.jsonl");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string what = e.what();
    CHECK(what.find("degenerate box") != std::string::npos);
    CHECK(what.find("vbad") != std::string::npos);
    CHECK(what.find(":1") != std::string::npos);  // line number
  }
}

TEST_CASE("load_dataset reports malformed records and bad offsets") {
  const fs::path dir = temp_dir("load_malformed");
  write_blob(dir / "v.feat", 2, {1.0f, 0.0f});
  SUBCASE("not json") {
    std::ofstream(dir / "manifest.jsonl") << "not json\n";
    CHECK_THROWS_AS(load_dataset(dir / "manifest.jsonl"), DataError);
  }
  SUBCASE("missing field") {
    std::ofstream(dir / "manifest.jsonl") << R"({"video_id":"v"})" << "\n";
    CHECK_THROWS_AS(load_dataset(dir / "manifest.jsonl"), DataError);
  }
  SUBCASE("offset out of range") {
    std::ofstream(dir / "manifest.jsonl")
        << R"({"video_id":"v","num_frames":1,"labels":["a"],"feature_file":"v.feat","boxes":[)"
        << R"({"frame":0,"x1":0,"y1":0,"x2":1,"y2":1,"prior":0,"feat_offset":7}]})"
        << "\n";
    CHECK_THROWS_AS(load_dataset(dir / "manifest.jsonl"), DataError);
  }
}

TEST_CASE("boxes are sorted by descending prior within a frame") {
  const fs::path dir = temp_dir("load_sort");
  write_blob(dir / "v.feat", 1, {1.0f, 1.0f, 1.0f});
  std::ofstream(dir / "manifest.jsonl")
      << R"({"video_id":"v","num_frames":1,"labels":["a"],"feature_file":"v.feat","boxes":[)"
      << R"({"frame":0,"x1":0,"y1":0,"x2":1,"y2":1,"prior":0.2,"feat_offset":0},)"
      << R"({"frame":0,"x1":1,"y1":0,"x2":2,"y2":1,"prior":0.9,"feat_offset":1},)"
      << R"({"frame":0,"x1":2,"y1":0,"x2":3,"y2":1,"prior":0.4,"feat_offset":2}]})"
      << "\n";
  const Dataset ds = load_dataset(dir / "manifest.jsonl");
  const auto& boxes = ds.videos[0].frames[0];
  CHECK(boxes[0].prior == doctest::Approx(0.9));
  CHECK(boxes[1].prior == doctest::Approx(0.4));
  CHECK(boxes[2].prior == doctest::Approx(0.2));
}

TEST_CASE("spatial_iou basics") {
  const Rect a{0, 0, 2, 2};
  CHECK(spatial_iou(a, a) == 1.0);
  CHECK(spatial_iou(a, Rect{5, 5, 7, 7}) == 0.0);

  // (0,0,2,2) vs (1,0,3,2): verify by unit-cell enumeration
  const Rect b{1, 0, 3, 2};
  int inter_cells = 0, union_cells = 0;
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 2; ++y) {
      const bool in_a = x >= 0 && x < 2 && y >= 0 && y < 2;
      const bool in_b = x >= 1 && x < 3 && y >= 0 && y < 2;
      inter_cells += in_a && in_b;
      union_cells += in_a || in_b;
    }
  CHECK(inter_cells == 2);
  CHECK(union_cells == 6);
  CHECK(spatial_iou(a, b) ==
        doctest::Approx(static_cast<double>(inter_cells) / union_cells).epsilon(1e-12));
}

TEST_CASE("spatial_iou properties on random rects") {
  Rng rng(42);
  for (int i = 0; i < 500; ++i) {
    auto rand_rect = [&] {
      const double x = rng.uniform(0.0, 50.0), y = rng.uniform(0.0, 50.0);
      return Rect{x, y, x + rng.uniform(0.5, 40.0), y + rng.uniform(0.5, 40.0)};
    };
    const Rect a = rand_rect(), b = rand_rect();
    const double ab = spatial_iou(a, b);
    CHECK(ab == spatial_iou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(spatial_iou(a, a) == 1.0);
  }
}

TEST_CASE("normalization is exactly idempotent") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXf x(8);
    for (int k = 0; k < 8; ++k)
      x[k] = static_cast<float>(rng.normal() * std::pow(10.0, rng.uniform(-2.0, 2.0)));
    const Eigen::VectorXf once = l2_normalize(x);
    const Eigen::VectorXf twice = l2_normalize(once);
    CHECK(std::memcmp(once.data(), twice.data(), sizeof(float) * 8) == 0);
  }
  const Eigen::VectorXf zero = Eigen::VectorXf::Zero(4);
  CHECK(l2_normalize(zero) == zero);
}

TEST_CASE("dataset save/load round trip is field-exact") {
  GenSpec spec;
  spec.num_videos = 6;
  spec.num_actions = 2;
  spec.frames_min = 3;
  spec.frames_max = 8;
  spec.boxes_per_frame = 3;
  spec.feature_dim = 5;
  spec.seed = 99;
  const SyntheticData data = generate_dataset(spec);

  const fs::path dir = temp_dir("roundtrip");
  save_dataset(data.dataset, dir);
  const Dataset loaded = load_dataset(dir / "manifest.jsonl");

  REQUIRE(loaded.videos.size() == data.dataset.videos.size());
  CHECK(loaded.feature_dim == data.dataset.feature_dim);
  for (std::size_t v = 0; v < loaded.videos.size(); ++v) {
    const auto& a = data.dataset.videos[v];
    const auto& b = loaded.videos[v];
    CHECK(a.video_id == b.video_id);
    CHECK(a.num_frames == b.num_frames);
    CHECK(a.labels == b.labels);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t f = 0; f < a.frames.size(); ++f) {
      REQUIRE(a.frames[f].size() == b.frames[f].size());
      for (std::size_t i = 0; i < a.frames[f].size(); ++i) {
        CHECK(a.frames[f][i].rect == b.frames[f][i].rect);
        CHECK(a.frames[f][i].prior == b.frames[f][i].prior);
        CHECK(a.frames[f][i].frame == b.frames[f][i].frame);
        CHECK(a.frames[f][i].feature == b.frames[f][i].feature);
      }
    }
    REQUIRE(a.video_feature.has_value() == b.video_feature.has_value());
    if (a.video_feature) CHECK(*a.video_feature == *b.video_feature);
  }
}

TEST_CASE("model file round trip") {
  std::vector<LinearModel> models(2);
  models[0].action_id = "run";
  models[0].weights = Eigen::Vector3d(0.25, -1.5, 3.0);
  models[0].bias = -0.125;
  models[1].action_id = "jump";
  models[1].weights = Eigen::Vector3d(1e-17, 2.0, -0.3333333333333333);
  models[1].bias = 42.0;

  const fs::path dir = temp_dir("models");
  save_models(models, dir / "m.jsonl");
  int dim = 0;
  const auto loaded = load_models(dir / "m.jsonl", &dim);
  CHECK(dim == 3);
  REQUIRE(loaded.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(loaded[i].action_id == models[i].action_id);
    CHECK(loaded[i].bias == models[i].bias);
    CHECK(loaded[i].weights == models[i].weights);
  }
}

TEST_CASE("annotation validation catches unknown actions and videos") {
  GenSpec spec;
  spec.num_videos = 2;
  spec.num_actions = 1;
  spec.seed = 5;
  const SyntheticData data = generate_dataset(spec);

  const fs::path dir = temp_dir("ann_check");
  save_annotations(data.ground_truth, dir / "gt.jsonl");
  CHECK_NOTHROW(load_annotations(dir / "gt.jsonl", &data.dataset));

  std::ofstream(dir / "bad_action.jsonl")
      << R"({"video_id":"v0000","action":"nope","entries":[{"kind":"none","frame":0}]})" << "\n";
  CHECK_THROWS_AS(load_annotations(dir / "bad_action.jsonl", &data.dataset), DataError);

  std::ofstream(dir / "bad_video.jsonl")
      << R"({"video_id":"ghost","action":"action_0","entries":[{"kind":"none","frame":0}]})"
      << "\n";
  CHECK_THROWS_AS(load_annotations(dir / "bad_video.jsonl", &data.dataset), DataError);
}

TEST_CASE("tube validator enforces the overlap invariant") {
  VideoDecomposition video;
  video.video_id = "t";
  video.num_frames = 2;
  video.frames.resize(2);
  BoxProposal b0;
  b0.frame = 0;
  b0.rect = Rect{0, 0, 10, 10};
  b0.feature = Eigen::VectorXf::Zero(1);
  BoxProposal b1 = b0;
  b1.frame = 1;
  b1.rect = Rect{100, 100, 110, 110};  // disjoint from b0
  video.frames[0].push_back(b0);
  video.frames[1].push_back(b1);

  Tube bad;
  bad.start_frame = 0;
  bad.box_indices = {0, 0};
  CHECK_THROWS_AS(validate_tube(video, bad), DataError);

  Tube single;
  single.start_frame = 1;
  single.box_indices = {0};
  CHECK_NOTHROW(validate_tube(video, single));
}

#include <doctest.h>

#include <map>
#include <vector>

#include "oracles.hpp"
#include "stil/linking.hpp"
#include "stil/random.hpp"
#include "stil/types.hpp"

using namespace stil;

namespace {

BoxProposal make_box(int frame, Rect rect) {
  BoxProposal b;
  b.frame = frame;
  b.rect = rect;
  b.feature = Eigen::VectorXf::Zero(1);
  return b;
}

// One overlapping box per frame, scores given per frame.
VideoDecomposition chain_video(const std::vector<double>& scores_per_frame) {
  VideoDecomposition v;
  v.video_id = "chain";
  v.num_frames = static_cast<int>(scores_per_frame.size());
  v.frames.resize(scores_per_frame.size());
  for (int f = 0; f < v.num_frames; ++f) {
    BoxProposal b = make_box(f, Rect{0, 0, 10, 10});
    b.prior = scores_per_frame[static_cast<std::size_t>(f)];
    v.frames[static_cast<std::size_t>(f)].push_back(b);
  }
  return v;
}

bool tubes_equal(const Tube& a, const Tube& b) {
  return a.start_frame == b.start_frame && a.box_indices == b.box_indices;
}

}  // namespace

TEST_CASE("edge_weight follows the consecutive-frame overlap rule") {
  auto score_map = [](const BoxProposal& b) { return b.prior; };

  BoxProposal a = make_box(3, Rect{0, 0, 10, 10});
  a.prior = 0.6;
  BoxProposal b = make_box(4, Rect{0, 0, 10, 15});  // iou 10*10/(10*15) = 2/3
  b.prior = 0.7;
  CHECK(edge_weight(a, b, score_map) == doctest::Approx(1.3));
  CHECK(edge_weight(b, a, score_map) == doctest::Approx(1.3));

  BoxProposal far = make_box(5, Rect{0, 0, 10, 10});
  far.prior = 1.0;
  CHECK(edge_weight(a, far, score_map) == 0.0);  // non-consecutive

  BoxProposal barely = make_box(4, Rect{9, 9, 19, 19});  // iou 1/199 < 0.1
  barely.prior = 1.0;
  CHECK(edge_weight(a, barely, score_map) == 0.0);
}

TEST_CASE("grow_tube spans the video when a single positive chain exists") {
  const VideoDecomposition v = chain_video({0.5, 0.9, 0.2, 0.4, 0.3});
  const Tube t = grow_tube(v, 1, 0, prior_box_score(), StopRule::Training);
  CHECK(t.start_frame == 0);
  CHECK(t.length() == 5);
  validate_tube(v, t);
}

TEST_CASE("inference stop rule yields a single-box tube when neighbours score <= 0") {
  VideoDecomposition v = chain_video({-0.2, 0.8, -0.1});
  const Tube t = grow_tube(v, 1, 0, prior_box_score(), StopRule::Inference);
  CHECK(t.start_frame == 1);
  CHECK(t.length() == 1);

  // training rule keeps growing: edges stay positive (0.8 - 0.2 > 0)
  const Tube t2 = grow_tube(v, 1, 0, prior_box_score(), StopRule::Training);
  CHECK(t2.length() == 3);
}

TEST_CASE("grow_tube matches the naive reference on hand-set 3x2 videos") {
  // 3 frames x 2 boxes with controlled overlaps and scores.
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    VideoDecomposition v;
    v.video_id = "hand";
    v.num_frames = 3;
    v.frames.resize(3);
    for (int f = 0; f < 3; ++f)
      for (int i = 0; i < 2; ++i) {
        const double x = rng.uniform(0.0, 30.0);
        const double y = rng.uniform(0.0, 30.0);
        BoxProposal b = make_box(f, Rect{x, y, x + 25.0, y + 25.0});
        b.prior = rng.uniform(-0.5, 1.0);
        v.frames[static_cast<std::size_t>(f)].push_back(b);
      }
    for (const StopRule rule : {StopRule::Training, StopRule::Inference}) {
      const Tube ours = grow_tube(v, 1, 0, prior_box_score(), rule);
      const Tube ref = oracle::naive_grow_tube(v, 1, 0, prior_box_score(), rule);
      CHECK(tubes_equal(ours, ref));
    }
  }
}

TEST_CASE("link_video seeds at the global maximum and respects max_tubes") {
  VideoDecomposition v = chain_video({0.1, 0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.95, 0.1, 0.1});
  LinkConfig cfg;
  cfg.max_tubes = 1;
  const auto tubes = link_video(v, prior_box_score(), cfg);
  REQUIRE(tubes.size() == 1);
  CHECK(tubes[0].covers(7));
  CHECK(v.tubes.size() == 1);  // stored into the video
}

TEST_CASE("two disjoint actors produce one tube each") {
  VideoDecomposition v;
  v.video_id = "two_actors";
  v.num_frames = 6;
  v.frames.resize(6);
  for (int f = 0; f < 6; ++f) {
    BoxProposal left = make_box(f, Rect{0, 0, 20, 20});
    left.prior = 0.9;
    BoxProposal right = make_box(f, Rect{200, 200, 220, 220});
    right.prior = 0.8;
    v.frames[static_cast<std::size_t>(f)].push_back(left);
    v.frames[static_cast<std::size_t>(f)].push_back(right);
  }
  LinkConfig cfg;
  cfg.max_tubes = 2;
  const auto tubes = link_video(v, prior_box_score(), cfg);
  REQUIRE(tubes.size() == 2);
  for (int k = 0; k < tubes[0].length(); ++k)
    CHECK(v.tube_box(tubes[0], k).rect.x1 == 0.0);  // first tube = left actor
  for (int k = 0; k < tubes[1].length(); ++k)
    CHECK(v.tube_box(tubes[1], k).rect.x1 == 200.0);
  CHECK(tubes[0].length() == 6);
  CHECK(tubes[1].length() == 6);
}

TEST_CASE("zero-box video links to nothing with a diagnostic") {
  VideoDecomposition v;
  v.video_id = "empty";
  v.num_frames = 4;
  v.frames.resize(4);
  DiagLog log;
  LinkConfig cfg;
  const auto tubes = link_video(v, prior_box_score(), cfg, nullptr, &log);
  CHECK(tubes.empty());
  CHECK_FALSE(log.empty());
}

TEST_CASE("link_video equals the naive full-rescan reference on random videos") {
  Rng rng(2024);
  int nontrivial = 0;
  for (int trial = 0; trial < 40; ++trial) {
    oracle::RandomVideoOpts opts;
    opts.max_frames = 15;
    opts.max_boxes_per_frame = 5;
    const VideoDecomposition v = oracle::random_video(rng, opts);
    LinkConfig cfg;
    cfg.max_tubes = 4;
    const auto ours = compute_tubes(v, prior_box_score(), cfg);
    const auto ref = oracle::naive_link_video(v, prior_box_score(), cfg);
    REQUIRE(ours.size() == ref.size());
    for (std::size_t i = 0; i < ours.size(); ++i) {
      CHECK(tubes_equal(ours[i], ref[i]));
      validate_tube(v, ours[i]);
    }
    if (!ours.empty() && ours[0].length() > 1) ++nontrivial;
  }
  CHECK(nontrivial > 10);  // the generator actually produced linkable chains
}

TEST_CASE("determinism: identical input gives identical tubes") {
  Rng rng(77);
  oracle::RandomVideoOpts opts;
  const VideoDecomposition v = oracle::random_video(rng, opts);
  LinkConfig cfg;
  const auto a = compute_tubes(v, prior_box_score(), cfg);
  const auto b = compute_tubes(v, prior_box_score(), cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(tubes_equal(a[i], b[i]));
}

TEST_CASE("edge evaluation work bound for a video-length tube") {
  Rng rng(31337);
  for (int trial = 0; trial < 20; ++trial) {
    const int frames = rng.uniform_int(2, 30);
    const int lanes = rng.uniform_int(1, 8);
    const VideoDecomposition v = oracle::laned_video(rng, frames, lanes);

    // seed at the overall highest-prior box
    int sf = 0, si = 0;
    double best = -1.0;
    for (int f = 0; f < v.num_frames; ++f)
      for (int i = 0; i < static_cast<int>(v.frames[static_cast<std::size_t>(f)].size()); ++i)
        if (v.box(f, i).prior > best) {
          best = v.box(f, i).prior;
          sf = f;
          si = i;
        }

    LinkStats stats;
    const Tube t = grow_tube(v, sf, si, prior_box_score(), StopRule::Training, nullptr, &stats);
    REQUIRE(t.length() == frames);  // video-length by construction
    CHECK(stats.edge_evaluations <=
          static_cast<std::size_t>((1 + lanes) * frames));
  }
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stil/types.hpp"

namespace stil {

// Synthetic proposal dataset with a planted actor trajectory per video.
// Actor boxes carry the video's class signature (a canonical basis
// direction) plus Gaussian noise, renormalized; distractor boxes carry
// pure noise. In untrimmed mode the signature is restricted to a random
// contiguous frame range and the ground-truth tube covers only that
// range. Fully deterministic in `seed`.
struct GenSpec {
  int num_videos = 40;
  int num_actions = 4;
  int frames_min = 20;
  int frames_max = 30;
  int boxes_per_frame = 6;
  int feature_dim = 32;
  double actor_prior = 0.9;
  double actor_prior_jitter = 0.05;  // uniform +/- jitter on actor priors
  double distractor_prior_max = 0.5;
  double noise_sigma = 0.05;
  bool trimmed = true;
  // Coherent non-actor random walks competing with the actor; their
  // boxes draw priors from the same distractor range.
  int decoy_tracks = 0;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  Dataset dataset;
  std::vector<AnnotationRecord> ground_truth;
};

SyntheticData generate_dataset(const GenSpec& spec);

struct GenOutput {
  std::filesystem::path manifest;
  std::filesystem::path ground_truth;
};

// Writes manifest + feature files + ground-truth annotations to dir.
GenOutput generate(const GenSpec& spec, const std::filesystem::path& dir);

}  // namespace stil

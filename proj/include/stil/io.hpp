#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stil/types.hpp"

namespace stil {

// On-disk layout
// --------------
// Manifest: one JSON record per line:
//   {"video_id", "num_frames", "labels": [..], "feature_file": "rel/path",
//    "video_feature": [..] (optional),
//    "boxes": [{"frame","x1","y1","x2","y2","prior","feat_offset"}, ..]}
// Box features live in a binary side file: header = magic "STILFT01" +
// feature dim D as little-endian u32, then float32 little-endian values,
// D per record; feat_offset is the 0-based record index.
//
// Annotations / ground truth: one JSON record per line:
//   {"video_id", "action", "entries": [{"kind": "box"|"point"|"none",
//    "frame", box: "x1".."y2" | point: "px","py"}, ..]}
// Ground-truth tubes use kind "box" with one entry per covered frame.
//
// Models: header line {"feature_dim", "format_version"} followed by one
// {"action_id", "bias", "weights": [..]} record per line.
//
// Tube dump / detections: one JSON record per line with "frames" and
// "rects" arrays; detections add "action" and "score".

Dataset load_dataset(const std::filesystem::path& manifest, DiagLog* log = nullptr);

// Writes manifest plus one feature file per video ("<video_id>.feat")
// into `dir`. Tubes are not part of the manifest; use save_tube_dump.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir,
                  const std::string& manifest_name = "manifest.jsonl");

// When `validate_against` is given, every record's video_id and action
// must exist in the dataset.
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path,
                                               const Dataset* validate_against = nullptr);
void save_annotations(const std::vector<AnnotationRecord>& records,
                      const std::filesystem::path& path);

std::vector<LinearModel> load_models(const std::filesystem::path& path,
                                     int* feature_dim = nullptr);
void save_models(const std::vector<LinearModel>& models, const std::filesystem::path& path);

void save_tube_dump(const Dataset& ds, const std::filesystem::path& path);

struct DetectionRecord {
  std::string video_id;
  std::string action;
  double score = 0.0;
  BoxTrack track;
};

void save_detections(const std::vector<DetectionRecord>& dets,
                     const std::filesystem::path& path);
std::vector<DetectionRecord> load_detections(const std::filesystem::path& path);

}  // namespace stil

#include "stil/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stil/normalize.hpp"

namespace stil {
namespace {

using nlohmann::json;

constexpr char kFeatureMagic[8] = {'S', 'T', 'I', 'L', 'F', 'T', '0', '1'};

[[noreturn]] void fail(const std::filesystem::path& path, int line, const std::string& video_id,
                       const std::string& what) {
  std::ostringstream os;
  os << path.string() << ":" << line;
  if (!video_id.empty()) os << " (video '" << video_id << "')";
  os << ": " << what;
  throw DataError(os.str());
}

json parse_line(const std::filesystem::path& path, int line, const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(path, line, "", "malformed record");
  return j;
}

const json& field(const std::filesystem::path& path, int line, const std::string& video_id,
                  const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) fail(path, line, video_id, std::string("missing field '") + name + "'");
  return *it;
}

void write_u32_le(std::ostream& os, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(bytes, 4);
}

std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float f32_from_bits(std::uint32_t bits) {
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

std::uint32_t bits_from_f32(float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  return bits;
}

// Whole-file read of a feature blob; returns D and the raw values.
void read_feature_file(const std::filesystem::path& path, int& dim, std::vector<float>& values) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kFeatureMagic, 8) != 0)
    throw DataError("feature file '" + path.string() + "' has a bad header");
  dim = static_cast<int>(read_u32_le(bytes.data() + 8));
  if (dim <= 0) throw DataError("feature file '" + path.string() + "' has non-positive dim");
  const std::size_t payload = bytes.size() - 12;
  if (payload % 4 != 0)
    throw DataError("feature file '" + path.string() + "' has a truncated payload");
  const std::size_t count = payload / 4;
  if (count % static_cast<std::size_t>(dim) != 0)
    throw DataError("feature file '" + path.string() + "' payload is not a multiple of dim");
  values.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    values[i] = f32_from_bits(read_u32_le(bytes.data() + 12 + 4 * i));
}

void write_feature_file(const std::filesystem::path& path, int dim,
                        const std::vector<float>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write feature file '" + path.string() + "'");
  out.write(kFeatureMagic, 8);
  write_u32_le(out, static_cast<std::uint32_t>(dim));
  for (float v : values) write_u32_le(out, bits_from_f32(v));
  if (!out) throw DataError("failed writing feature file '" + path.string() + "'");
}

json rect_to_json(const Rect& r) { return json::array({r.x1, r.y1, r.x2, r.y2}); }

Rect rect_from_json(const std::filesystem::path& path, int line, const std::string& vid,
                    const json& j) {
  if (!j.is_array() || j.size() != 4) fail(path, line, vid, "rect must be [x1,y1,x2,y2]");
  Rect r{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  return r;
}

template <typename F>
void for_each_line(const std::filesystem::path& path, F&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    fn(line, text);
  }
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest, DiagLog* log) {
  Dataset ds;
  const std::filesystem::path base = manifest.parent_path();
  std::set<std::string> actions;
  bool any_prior = false;

  for_each_line(manifest, [&](int line, const std::string& text) {
    json j = parse_line(manifest, line, text);
    VideoDecomposition video;
    video.video_id = field(manifest, line, "", j, "video_id").get<std::string>();
    const std::string& vid = video.video_id;
    video.num_frames = field(manifest, line, vid, j, "num_frames").get<int>();
    if (video.num_frames < 1) fail(manifest, line, vid, "num_frames must be >= 1");
    video.frames.resize(static_cast<std::size_t>(video.num_frames));

    for (const auto& l : field(manifest, line, vid, j, "labels")) {
      const std::string a = l.get<std::string>();
      video.labels.push_back(a);
      actions.insert(a);
    }
    std::sort(video.labels.begin(), video.labels.end());
    video.labels.erase(std::unique(video.labels.begin(), video.labels.end()),
                       video.labels.end());

    if (auto it = j.find("video_feature"); it != j.end() && !it->is_null()) {
      Eigen::VectorXd vf(it->size());
      for (Eigen::Index i = 0; i < vf.size(); ++i) {
        vf[i] = (*it)[static_cast<std::size_t>(i)].get<double>();
        if (!std::isfinite(vf[i])) fail(manifest, line, vid, "non-finite video feature");
      }
      vf = l2_normalize(vf);
      if (ds.video_feature_dim < 0)
        ds.video_feature_dim = static_cast<int>(vf.size());
      else if (ds.video_feature_dim != static_cast<int>(vf.size()))
        fail(manifest, line, vid, "video feature dimensionality mismatch");
      video.video_feature = std::move(vf);
    }

    const std::string feature_file =
        field(manifest, line, vid, j, "feature_file").get<std::string>();
    int dim = 0;
    std::vector<float> values;
    read_feature_file(base / feature_file, dim, values);
    if (ds.feature_dim == 0)
      ds.feature_dim = dim;
    else if (ds.feature_dim != dim)
      fail(manifest, line, vid, "feature dimensionality mismatch across videos");
    const std::size_t num_records = values.size() / static_cast<std::size_t>(dim);

    for (const auto& bj : field(manifest, line, vid, j, "boxes")) {
      BoxProposal box;
      box.frame = field(manifest, line, vid, bj, "frame").get<int>();
      if (box.frame < 0 || box.frame >= video.num_frames)
        fail(manifest, line, vid, "box frame index out of range");
      box.rect = Rect{field(manifest, line, vid, bj, "x1").get<double>(),
                      field(manifest, line, vid, bj, "y1").get<double>(),
                      field(manifest, line, vid, bj, "x2").get<double>(),
                      field(manifest, line, vid, bj, "y2").get<double>()};
      if (!std::isfinite(box.rect.x1) || !std::isfinite(box.rect.y1) ||
          !std::isfinite(box.rect.x2) || !std::isfinite(box.rect.y2))
        fail(manifest, line, vid, "non-finite box coordinates");
      if (!rect_valid(box.rect)) fail(manifest, line, vid, "degenerate box");
      box.prior = field(manifest, line, vid, bj, "prior").get<double>();
      if (!std::isfinite(box.prior)) fail(manifest, line, vid, "non-finite prior score");
      const std::int64_t off = field(manifest, line, vid, bj, "feat_offset").get<std::int64_t>();
      if (off < 0 || static_cast<std::size_t>(off) >= num_records)
        fail(manifest, line, vid, "feat_offset out of range");
      Eigen::VectorXf feat(dim);
      std::memcpy(feat.data(), values.data() + static_cast<std::size_t>(off) * dim,
                  static_cast<std::size_t>(dim) * sizeof(float));
      for (Eigen::Index i = 0; i < feat.size(); ++i)
        if (!std::isfinite(feat[i])) fail(manifest, line, vid, "non-finite feature value");
      box.feature = l2_normalize(feat);

      if (!any_prior) {
        ds.prior_min = ds.prior_max = box.prior;
        any_prior = true;
      } else {
        ds.prior_min = std::min(ds.prior_min, box.prior);
        ds.prior_max = std::max(ds.prior_max, box.prior);
      }
      video.frames[static_cast<std::size_t>(box.frame)].push_back(std::move(box));
    }

    for (auto& frame : video.frames)
      std::stable_sort(frame.begin(), frame.end(),
                       [](const BoxProposal& a, const BoxProposal& b) { return a.prior > b.prior; });

    ds.videos.push_back(std::move(video));
  });

  ds.actions.assign(actions.begin(), actions.end());
  if (any_prior) {
    std::ostringstream os;
    os << "prior score range [" << ds.prior_min << ", " << ds.prior_max << "] over "
       << ds.videos.size() << " videos";
    diag(log, os.str());
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir,
                  const std::string& manifest_name) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / manifest_name, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest in '" + dir.string() + "'");

  for (const auto& video : ds.videos) {
    const std::string feature_file = video.video_id + ".feat";
    std::vector<float> values;
    json boxes = json::array();
    std::int64_t offset = 0;
    for (const auto& frame : video.frames) {
      for (const auto& box : frame) {
        json bj;
        bj["frame"] = box.frame;
        bj["x1"] = box.rect.x1;
        bj["y1"] = box.rect.y1;
        bj["x2"] = box.rect.x2;
        bj["y2"] = box.rect.y2;
        bj["prior"] = box.prior;
        bj["feat_offset"] = offset++;
        boxes.push_back(std::move(bj));
        values.insert(values.end(), box.feature.data(), box.feature.data() + box.feature.size());
      }
    }
    write_feature_file(dir / feature_file, ds.feature_dim, values);

    json j;
    j["video_id"] = video.video_id;
    j["num_frames"] = video.num_frames;
    j["labels"] = video.labels;
    j["feature_file"] = feature_file;
    if (video.video_feature) {
      json vf = json::array();
      for (Eigen::Index i = 0; i < video.video_feature->size(); ++i)
        vf.push_back((*video.video_feature)[i]);
      j["video_feature"] = std::move(vf);
    }
    j["boxes"] = std::move(boxes);
    out << j.dump() << "\n";
  }
  if (!out) throw DataError("failed writing manifest in '" + dir.string() + "'");
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path,
                                               const Dataset* validate_against) {
  std::vector<AnnotationRecord> records;
  for_each_line(path, [&](int line, const std::string& text) {
    json j = parse_line(path, line, text);
    AnnotationRecord rec;
    rec.video_id = field(path, line, "", j, "video_id").get<std::string>();
    rec.action = field(path, line, rec.video_id, j, "action").get<std::string>();
    if (validate_against) {
      if (!validate_against->find_video(rec.video_id))
        fail(path, line, rec.video_id, "video not present in dataset");
      if (!validate_against->has_action(rec.action))
        fail(path, line, rec.video_id, "unknown action identifier '" + rec.action + "'");
    }
    for (const auto& ej : field(path, line, rec.video_id, j, "entries")) {
      Annotation a;
      a.frame = field(path, line, rec.video_id, ej, "frame").get<int>();
      const std::string kind = field(path, line, rec.video_id, ej, "kind").get<std::string>();
      if (kind == "box") {
        a.kind = Annotation::Kind::Box;
        a.rect = Rect{field(path, line, rec.video_id, ej, "x1").get<double>(),
                      field(path, line, rec.video_id, ej, "y1").get<double>(),
                      field(path, line, rec.video_id, ej, "x2").get<double>(),
                      field(path, line, rec.video_id, ej, "y2").get<double>()};
        if (!rect_valid(a.rect)) fail(path, line, rec.video_id, "degenerate annotation box");
      } else if (kind == "point") {
        a.kind = Annotation::Kind::Point;
        a.px = field(path, line, rec.video_id, ej, "px").get<double>();
        a.py = field(path, line, rec.video_id, ej, "py").get<double>();
      } else if (kind == "none") {
        a.kind = Annotation::Kind::None;
      } else {
        fail(path, line, rec.video_id, "unknown annotation kind '" + kind + "'");
      }
      rec.entries.push_back(a);
    }
    records.push_back(std::move(rec));
  });
  return records;
}

void save_annotations(const std::vector<AnnotationRecord>& records,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const auto& rec : records) {
    json entries = json::array();
    for (const auto& a : rec.entries) {
      json ej;
      ej["frame"] = a.frame;
      switch (a.kind) {
        case Annotation::Kind::Box:
          ej["kind"] = "box";
          ej["x1"] = a.rect.x1;
          ej["y1"] = a.rect.y1;
          ej["x2"] = a.rect.x2;
          ej["y2"] = a.rect.y2;
          break;
        case Annotation::Kind::Point:
          ej["kind"] = "point";
          ej["px"] = a.px;
          ej["py"] = a.py;
          break;
        case Annotation::Kind::None:
          ej["kind"] = "none";
          break;
      }
      entries.push_back(std::move(ej));
    }
    json j;
    j["video_id"] = rec.video_id;
    j["action"] = rec.action;
    j["entries"] = std::move(entries);
    out << j.dump() << "\n";
  }
}

std::vector<LinearModel> load_models(const std::filesystem::path& path, int* feature_dim) {
  std::vector<LinearModel> models;
  int dim = -1;
  bool header_seen = false;
  for_each_line(path, [&](int line, const std::string& text) {
    json j = parse_line(path, line, text);
    if (!header_seen) {
      dim = field(path, line, "", j, "feature_dim").get<int>();
      const int version = field(path, line, "", j, "format_version").get<int>();
      if (version != 1) fail(path, line, "", "unsupported model format version");
      if (dim <= 0) fail(path, line, "", "feature_dim must be positive");
      header_seen = true;
      return;
    }
    LinearModel m;
    m.action_id = field(path, line, "", j, "action_id").get<std::string>();
    m.bias = field(path, line, "", j, "bias").get<double>();
    const auto& wj = field(path, line, "", j, "weights");
    if (static_cast<int>(wj.size()) != dim)
      fail(path, line, "", "weights length does not match feature_dim");
    m.weights.resize(dim);
    for (int i = 0; i < dim; ++i) m.weights[i] = wj[static_cast<std::size_t>(i)].get<double>();
    models.push_back(std::move(m));
  });
  if (!header_seen) throw DataError("model file '" + path.string() + "' has no header");
  if (feature_dim) *feature_dim = dim;
  return models;
}

void save_models(const std::vector<LinearModel>& models, const std::filesystem::path& path) {
  if (models.empty()) throw DataError("refusing to write empty model file");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  json header;
  header["feature_dim"] = static_cast<int>(models.front().weights.size());
  header["format_version"] = 1;
  out << header.dump() << "\n";
  for (const auto& m : models) {
    if (m.weights.size() != models.front().weights.size())
      throw DataError("models have inconsistent weight dimensionality");
    json j;
    j["action_id"] = m.action_id;
    j["bias"] = m.bias;
    json w = json::array();
    for (Eigen::Index i = 0; i < m.weights.size(); ++i) w.push_back(m.weights[i]);
    j["weights"] = std::move(w);
    out << j.dump() << "\n";
  }
}

void save_tube_dump(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const auto& video : ds.videos) {
    for (std::size_t t = 0; t < video.tubes.size(); ++t) {
      const Tube& tube = video.tubes[t];
      json frames = json::array();
      json rects = json::array();
      for (int k = 0; k < tube.length(); ++k) {
        frames.push_back(tube.start_frame + k);
        rects.push_back(rect_to_json(video.tube_box(tube, k).rect));
      }
      json j;
      j["video_id"] = video.video_id;
      j["tube_idx"] = static_cast<int>(t);
      j["frames"] = std::move(frames);
      j["rects"] = std::move(rects);
      out << j.dump() << "\n";
    }
  }
}

void save_detections(const std::vector<DetectionRecord>& dets,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const auto& d : dets) {
    json frames = json::array();
    json rects = json::array();
    for (int k = 0; k < d.track.length(); ++k) {
      frames.push_back(d.track.start_frame + k);
      rects.push_back(rect_to_json(d.track.rects[static_cast<std::size_t>(k)]));
    }
    json j;
    j["video_id"] = d.video_id;
    j["action"] = d.action;
    j["score"] = d.score;
    j["frames"] = std::move(frames);
    j["rects"] = std::move(rects);
    out << j.dump() << "\n";
  }
}

std::vector<DetectionRecord> load_detections(const std::filesystem::path& path) {
  std::vector<DetectionRecord> dets;
  for_each_line(path, [&](int line, const std::string& text) {
    json j = parse_line(path, line, text);
    DetectionRecord d;
    d.video_id = field(path, line, "", j, "video_id").get<std::string>();
    d.action = field(path, line, d.video_id, j, "action").get<std::string>();
    d.score = field(path, line, d.video_id, j, "score").get<double>();
    const auto& frames = field(path, line, d.video_id, j, "frames");
    const auto& rects = field(path, line, d.video_id, j, "rects");
    if (frames.empty() || frames.size() != rects.size())
      fail(path, line, d.video_id, "frames/rects length mismatch");
    d.track.start_frame = frames[0].get<int>();
    for (std::size_t k = 0; k < frames.size(); ++k) {
      if (frames[k].get<int>() != d.track.start_frame + static_cast<int>(k))
        fail(path, line, d.video_id, "frames are not contiguous");
      d.track.rects.push_back(rect_from_json(path, line, d.video_id, rects[k]));
    }
    dets.push_back(std::move(d));
  });
  return dets;
}

}  // namespace stil

#include "mgn/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "mgn/errors.hpp"

namespace mgn {

using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  throw InvariantError("unknown split: " + s);
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::BadHeader,
                      "manifest parse error: " + std::string(e.what()));
  }

  Manifest m;
  try {
    m.dataset_name = j.at("dataset_name").get<std::string>();
    for (const auto& je : j.at("entries")) {
      ManifestEntry e;
      e.video_id = je.at("video_id").get<std::string>();
      e.split = split_from_string(je.at("split").get<std::string>());
      for (const auto& [name, jt] : je.at("tracks").items()) {
        ManifestEntry::TrackRef ref;
        ref.path = jt.at("path").get<std::string>();
        ref.dim = jt.at("dim").get<int>();
        ref.rate.num = jt.at("rate").at(0).get<uint32_t>();
        ref.rate.den = jt.at("rate").at(1).get<uint32_t>();
        e.tracks[name] = ref;
      }
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::BadHeader,
                      "manifest field error: " + std::string(e.what()));
  }

  std::set<std::string> ids;
  const auto dir = path.parent_path();
  for (const auto& e : m.entries) {
    if (!ids.insert(e.video_id).second)
      throw InvariantError("duplicate video_id in manifest: " + e.video_id);
    for (const auto& [name, ref] : e.tracks)
      if (!std::filesystem::exists(dir / ref.path))
        throw IoError("manifest references missing file: " +
                      (dir / ref.path).string());
  }
  return m;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  json j;
  j["dataset_name"] = m.dataset_name;
  j["entries"] = json::array();
  for (const auto& e : m.entries) {
    json je;
    je["video_id"] = e.video_id;
    je["split"] = to_string(e.split);
    je["tracks"] = json::object();
    for (const auto& [name, ref] : e.tracks)
      je["tracks"][name] = {{"path", ref.path},
                            {"dim", ref.dim},
                            {"rate", {ref.rate.num, ref.rate.den}}};
    j["entries"].push_back(std::move(je));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << j.dump(2) << "\n";
}

const FeatureTrack& VideoRecord::track(const std::string& modality) const {
  auto it = tracks.find(modality);
  if (it == tracks.end())
    throw InvariantError("video " + video_id + ": missing modality '" +
                         modality + "'");
  return it->second;
}

std::vector<const VideoRecord*> Dataset::split_videos(Split s) const {
  std::vector<const VideoRecord*> out;
  for (const auto& v : videos)
    if (v.split == s) out.push_back(&v);
  return out;
}

const VideoRecord* Dataset::find(const std::string& video_id) const {
  for (const auto& v : videos)
    if (v.video_id == video_id) return &v;
  return nullptr;
}

Dataset load_dataset(const std::filesystem::path& manifest_path,
                     const std::vector<std::string>& modalities) {
  Dataset ds;
  ds.root = manifest_path.parent_path();
  ds.manifest = load_manifest(manifest_path);

  const bool load_all = modalities.empty();
  for (const auto& e : ds.manifest.entries) {
    VideoRecord rec;
    rec.video_id = e.video_id;
    rec.split = e.split;
    for (const auto& [name, ref] : e.tracks) {
      if (!load_all && name != "labels" &&
          std::find(modalities.begin(), modalities.end(), name) ==
              modalities.end())
        continue;
      FeatureTrack t = read_track(ds.root / ref.path);
      if (t.modality != name)
        throw InvariantError("video " + e.video_id + ": file declares '" +
                             t.modality + "' where manifest expects '" + name +
                             "'");
      if (t.dim() != ref.dim)
        throw InvariantError("video " + e.video_id + " '" + name +
                             "': dim mismatch with manifest");
      if (!(t.rate == ref.rate))
        throw InvariantError("video " + e.video_id + " '" + name +
                             "': rate mismatch with manifest");
      rec.tracks.emplace(name, std::move(t));
    }
    if (!rec.tracks.count("labels"))
      throw InvariantError("video " + e.video_id + ": no labels track");

    const int frames = rec.labels().frames();
    for (const auto& [name, t] : rec.tracks)
      if (t.rate == frame_rate() && t.frames() != 1 && t.frames() != frames)
        throw InvariantError("video " + e.video_id + " '" + name +
                             "': frame-aligned track T differs from labels");
    ds.videos.push_back(std::move(rec));
  }
  return ds;
}

int map_frame_index(const FeatureTrack& track, int frame_index) {
  if (track.frames() == 1) return 0;
  if (track.rate == frame_rate()) return std::min(frame_index, track.frames() - 1);
  // Nearest row to time frame_index / 6: round(frame * num / (6 * den)),
  // halves rounding down; exact in 64-bit integers.
  uint64_t p = static_cast<uint64_t>(frame_index) * track.rate.num;
  uint64_t q = static_cast<uint64_t>(kFrameRateHz) * track.rate.den;
  uint64_t r = (2 * p + q - 1) / (2 * q);
  return static_cast<int>(
      std::min<uint64_t>(r, static_cast<uint64_t>(track.frames() - 1)));
}

AlignedSample align_sample(const VideoRecord& record, int frame_index,
                           const std::vector<std::string>& modalities) {
  const int frames = record.frames();
  if (frame_index < 0 || frame_index >= frames)
    throw InvariantError("video " + record.video_id + ": frame index " +
                         std::to_string(frame_index) + " out of range [0, " +
                         std::to_string(frames) + ")");
  AlignedSample s;
  s.features.reserve(modalities.size());
  for (const auto& name : modalities) {
    const FeatureTrack& t = record.track(name);
    s.features.push_back(t.values.row(map_frame_index(t, frame_index)));
  }
  s.label = record.labels().values.row(frame_index);
  return s;
}

FeatureTrack uniform_subsample(const FeatureTrack& track, int n) {
  if (n < 1) throw InvariantError("uniform_subsample: n must be >= 1");
  const int t = track.frames();
  FeatureTrack out;
  out.modality = track.modality;
  out.rate = track.rate;
  out.values = nn::Mat<float>(n, track.dim());
  for (int i = 0; i < n; ++i) {
    double pos = (n == 1) ? (t - 1) / 2.0
                          : static_cast<double>(i) * (t - 1) / (n - 1);
    int src = static_cast<int>(std::floor(pos + 0.5));
    src = std::clamp(src, 0, t - 1);
    auto from = track.values.row(src);
    std::copy(from.begin(), from.end(), out.values.row(i).begin());
  }
  return out;
}

}  // namespace mgn

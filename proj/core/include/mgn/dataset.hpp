#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgn/track.hpp"

namespace mgn {

enum class Split { Train, Validation, Test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// One manifest row: where a video's tracks live and what shape they claim.
struct ManifestEntry {
  std::string video_id;
  Split split = Split::Train;
  struct TrackRef {
    std::string path;  // relative to the manifest file
    int dim = 0;
    Rate rate;
  };
  std::map<std::string, TrackRef> tracks;  // modality -> ref, includes labels
};

struct Manifest {
  std::string dataset_name;
  std::vector<ManifestEntry> entries;
};

/// Parses a UTF-8 JSON manifest. Validates unique ids and that every
/// referenced file exists.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& m, const std::filesystem::path& path);

/// A fully loaded video: every requested track in memory. Immutable once
/// loaded; safe to share across threads.
struct VideoRecord {
  std::string video_id;
  Split split = Split::Train;
  std::map<std::string, FeatureTrack> tracks;

  const FeatureTrack& track(const std::string& modality) const;
  const FeatureTrack& labels() const { return track("labels"); }
  /// Frame count of the 6 Hz timeline (taken from the labels track).
  int frames() const { return labels().frames(); }
};

struct Dataset {
  std::filesystem::path root;
  Manifest manifest;
  std::vector<VideoRecord> videos;

  std::vector<const VideoRecord*> split_videos(Split s) const;
  const VideoRecord* find(const std::string& video_id) const;
};

/// Loads every video in the manifest. `modalities`, when given, restricts
/// loading to those tracks plus labels. Validates declared dim/rate against
/// the file headers and that frame-aligned (6 Hz) tracks share the labels' T.
Dataset load_dataset(const std::filesystem::path& manifest_path,
                     const std::vector<std::string>& modalities = {});

/// Row of `track` nearest in time to 6 Hz frame `frame_index`; ties round
/// down, result clamped to [0, T-1]. Identity for 6 Hz tracks; a T=1 track
/// maps every frame to its single row.
int map_frame_index(const FeatureTrack& track, int frame_index);

/// Concatenation-ready view of one frame: the modal vectors in request
/// order plus the 15-dim label row. Spans point into the record.
struct AlignedSample {
  std::vector<std::span<const float>> features;
  std::span<const float> label;
};

AlignedSample align_sample(const VideoRecord& record, int frame_index,
                           const std::vector<std::string>& modalities);

/// n rows at indices round(i*(T-1)/(n-1)); n == 1 takes the middle row.
/// Rows repeat when T < n. Always includes rows 0 and T-1 for n >= 2.
FeatureTrack uniform_subsample(const FeatureTrack& track, int n);

}  // namespace mgn

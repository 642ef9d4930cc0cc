#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mgn/nn/mat.hpp"

namespace mgn {

/// Known modality names. Arbitrary names are accepted by the container
/// (checkpoints and prediction tracks reuse it); label semantics only
/// attach to the name "labels".
inline constexpr const char* kModalityNames[] = {
    "image", "audio", "action", "subtitle", "title", "video_theme", "labels"};

inline constexpr int kNumExpressions = 15;
inline constexpr int kFrameRateHz = 6;

/// Frames-per-second as an exact rational, so off-rate alignment stays in
/// integer arithmetic.
struct Rate {
  uint32_t num = kFrameRateHz;
  uint32_t den = 1;

  double hz() const { return static_cast<double>(num) / den; }
  bool operator==(const Rate&) const = default;
};

inline Rate frame_rate() { return Rate{kFrameRateHz, 1}; }

/// One modality's dense T x dim float track for one video.
struct FeatureTrack {
  std::string modality;
  Rate rate = frame_rate();
  nn::Mat<float> values;  // row t = frame t

  int frames() const { return values.rows; }
  int dim() const { return values.cols; }
};

/// Throws InvariantError if the track violates its invariants
/// (T >= 1, dim >= 1, finite values, rate positive; labels: dim == 15,
/// values in [0, 1]).
void validate_track(const FeatureTrack& track);

// Binary container, "MGF1", all integers little-endian u32:
//   magic "MGF1" | name_len | name bytes (UTF-8) | T | dim
//   | rate_num | rate_den | T*dim float32, row-major
void write_track(const FeatureTrack& track, const std::filesystem::path& path);

/// Reads and validates a track. Malformed files raise FormatError with a
/// distinct kind per failure; missing files raise IoError.
FeatureTrack read_track(const std::filesystem::path& path);

}  // namespace mgn

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "mgn/dataset.hpp"

namespace mgn {

/// Specification for a generated dataset. Each modality plants an
/// independent signal component into the labels; `strength` is the fraction
/// of (pre-squash) label variance that component explains, so a modality's
/// usefulness to a model is controlled per modality.
struct SynthSpec {
  struct Modality {
    int dim = 1;
    double strength = 0.0;
  };

  std::string name = "synth";
  int n_videos = 40;
  int frames_per_video = 120;
  uint64_t seed = 1;
  double noise_floor = 0.15;       // label noise amplitude
  double track_noise = 0.1;        // measurement noise on feature tracks
  // Per (video, temporal modality), with this probability the track is
  // "corrupted": measurement noise is multiplied by corrupt_boost and the
  // whole track shifts by a fixed artifact direction. Labels are untouched,
  // so a corrupted track is a nearly useless input whose corruption is
  // detectable from the feature itself.
  double corrupt_probability = 0.35;
  double corrupt_boost = 6.0;
  double validation_fraction = 0.25;
  double test_fraction = 0.0;
  std::map<std::string, Modality> modalities;

  /// Desk-scale preset: 40 videos x 120 frames, narrow tracks, signal split
  /// across all five granularity sources. Runs in well under a second.
  static SynthSpec small(uint64_t seed);
  /// Canonical track widths (1536/128/512/768/768/1024) at a reduced video
  /// count; exercises realistic shapes without EEV-scale volume.
  static SynthSpec paper(uint64_t seed);

  /// Throws InvariantError when strengths sum above 1, a dim is < 1, or the
  /// counts are non-positive.
  void validate() const;

  std::string to_json() const;
  static SynthSpec from_json(const std::string& text);
};

/// Label structure planted by the generator, per video:
///   - a constant per-video theme offset   (title, video_theme tracks)
///   - a slow clip-context component, moving-average smoothed over +/-16
///     frames                              (action, subtitle tracks)
///   - a fast per-frame component          (image, audio tracks)
/// plus Gaussian noise, squashed into [0,1] by an affine tanh. Each track
/// embeds its component into a random subset of its dimensions through a
/// rotation; the remaining dimensions carry unit-variance distractor noise.
///
/// The per-video theme additionally selects, per class, which of two fixed
/// mixers maps the temporal components into the labels. A constant offset is
/// invisible to per-video correlation, so this gate is what makes the
/// video-level modality matter to the challenge metric: models without the
/// video_theme track are capped at the cos^2(0.7) share of the temporal
/// variance.
///
/// Generation is a pure function of (spec); per-video streams derive from
/// (seed, video index), so videos can be produced independently or in
/// parallel without changing a single byte of output.
Manifest generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

/// The tracks of one video, exactly as generate() would emit them.
std::map<std::string, FeatureTrack> generate_video_tracks(
    const SynthSpec& spec, int video_index);

std::string synth_video_id(int video_index);

}  // namespace mgn

#pragma once

#include <map>
#include <string>
#include <vector>

#include "mgn/dataset.hpp"
#include "mgn/model/video_model.hpp"
#include "mgn/nn/checkpoint.hpp"
#include "mgn/trainer.hpp"

namespace mgn {

struct VideoTrainConfig {
  uint64_t seed = 1;
  double learning_rate = 1e-4;
  int epochs = 30;
  int batch_size = 1536;  // clamped to the train video count
  int frames = 80;        // uniform subsample fed to NetVLAD
  int clusters = 8;
  int pooled_dim = 1024;
  int fused_dim = 1024;
  int hidden_dim = 1024;  // exported embedding width
  double modal_dropout_p = 0.0;
  bool use_attention = true;

  std::string to_json() const;
  static VideoTrainConfig from_json(const std::string& text);
};

/// Per-class mean of a T x 15 label track: the video-level target.
nn::Mat<float> video_target(const nn::Mat<float>& labels);

struct VideoTrainResult {
  model::VideoModel<float> model;
  TrainReport report;  // val_correlation = per-class r across videos
  nn::AdamSnapshot<float> adam;
};

/// Trains the video-level expression network (image + audio NetVLAD pooling
/// fused with the title embedding) against per-video averaged labels.
VideoTrainResult train_video_level(const Dataset& dataset,
                                   const VideoTrainConfig& config);

/// Eval-mode hidden activations for every video, as T=1 video_theme tracks.
std::map<std::string, FeatureTrack> export_video_feature(
    model::VideoModel<float>& model, const Dataset& dataset, int frames);

/// Writes the exported tracks next to the dataset and returns a manifest
/// whose video_theme entries point at them (other entries untouched).
Manifest export_video_feature_to(model::VideoModel<float>& model,
                                 const Dataset& dataset, int frames,
                                 const std::filesystem::path& out_dir);

void save_video_checkpoint(const std::filesystem::path& dir,
                           model::VideoModel<float>& model,
                           const VideoTrainConfig& config,
                           const nn::AdamSnapshot<float>* adam);

struct LoadedVideoModel {
  model::VideoModel<float> model;
  VideoTrainConfig config;
};
LoadedVideoModel load_video_checkpoint(const std::filesystem::path& dir);

}  // namespace mgn

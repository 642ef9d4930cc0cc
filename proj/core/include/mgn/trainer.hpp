#pragma once

#include <string>
#include <vector>

#include "mgn/dataset.hpp"
#include "mgn/eval.hpp"
#include "mgn/model/frame_model.hpp"
#include "mgn/nn/checkpoint.hpp"

namespace mgn {

struct TrainConfig {
  uint64_t seed = 1;
  double learning_rate = 1e-4;
  int batch_size = 1536;
  int epochs = 30;
  int classes = kNumExpressions;
  std::vector<std::string> modalities = {"image", "audio", "action",
                                         "subtitle", "video_theme"};
  int fused_dim = 1024;
  double modal_dropout_p = 0.25;
  bool use_attention = true;
  int n_experts = 3;
  int expert_hidden = 1024;

  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

struct TrainReport {
  std::vector<double> train_loss;       // mean loss per epoch
  std::vector<double> val_correlation;  // challenge metric per epoch
  int best_epoch = -1;                  // earliest epoch attaining the max
  double best_correlation = 0.0;

  std::string to_json() const;
};

struct FrameTrainResult {
  model::FrameModel<float> model;  // restored to the best-validation snapshot
  TrainReport report;
  nn::AdamSnapshot<float> adam;    // optimizer state at the snapshot
};

/// Trains the frame-level model: frames from all training videos pooled and
/// reshuffled each epoch, fusion+MOE forward, BCE loss, Adam; the validation
/// challenge metric is computed after every epoch and the best snapshot is
/// kept. Aborts with NumericalError on a non-finite loss. A trailing batch
/// of size 1 is dropped (batch norm needs 2).
FrameTrainResult train_frame_model(const Dataset& dataset,
                                   const TrainConfig& config);

/// Eval-mode per-frame predictions for every video in the split.
PredictionSet predict_frame_model(model::FrameModel<float>& model,
                                  const Dataset& dataset, Split split,
                                  const std::vector<std::string>& modalities);

/// Builds an untrained model sized for the dataset/config (dims taken from
/// the manifest-declared tracks).
model::FrameModelConfig frame_model_config(const Dataset& dataset,
                                           const TrainConfig& config);

void save_frame_checkpoint(const std::filesystem::path& dir,
                           model::FrameModel<float>& model,
                           const TrainConfig& config,
                           const nn::AdamSnapshot<float>* adam);

struct LoadedFrameModel {
  model::FrameModel<float> model;
  TrainConfig config;
};
LoadedFrameModel load_frame_checkpoint(const std::filesystem::path& dir);

}  // namespace mgn

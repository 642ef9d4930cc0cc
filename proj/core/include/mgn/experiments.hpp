#pragma once

#include <string>
#include <vector>

#include "mgn/dataset.hpp"
#include "mgn/nn/gradcheck.hpp"
#include "mgn/trainer.hpp"
#include "mgn/video_level.hpp"

namespace mgn {

/// Modality ladder: image; +audio; +action; +subtitle; +video_theme.
std::vector<std::vector<std::string>> ablation_rungs();

/// Training configuration sized for the small synthetic preset. The paper
/// protocol (batch 1536, lr 1e-4) assumes millions of frames; at 40 x 120
/// frames it yields too few optimizer steps to learn, so the desk-scale
/// harness narrows the network and raises the learning rate while keeping
/// the 30-epoch schedule and snapshot selection.
TrainConfig small_preset_train_config();

/// Video-level companion config for the small preset.
VideoTrainConfig small_preset_video_config();

struct LadderResult {
  std::vector<std::string> rung_names;
  std::vector<uint64_t> seeds;
  std::vector<std::vector<double>> correlation;  // [rung][seed]
  std::vector<double> rung_mean;
  int monotone_seeds = 0;  // seeds whose ladder is nondecreasing throughout

  std::string to_json() const;
  std::string to_table() const;  // aligned text, one row per rung
};

/// Trains the full model once per (rung, seed) and evaluates on validation.
LadderResult run_ablation_ladder(const Dataset& dataset,
                                 const TrainConfig& base,
                                 const std::vector<uint64_t>& seeds);

struct MethodComparison {
  std::vector<uint64_t> seeds;
  std::vector<double> mlp;       // concat fusion, 1 expert, no modal dropout
  std::vector<double> moe;       // concat fusion, n experts, no modal dropout
  std::vector<double> maf_moe;   // attention fusion + modal dropout + experts

  struct EnsembleTrial {
    std::vector<double> singles;
    double mean_single = 0.0;
    double ensemble = 0.0;
  };
  std::vector<EnsembleTrial> trials;  // one per resampled seed group

  double mean(const std::vector<double>& v) const;
  int ensemble_wins() const;  // trials where ensemble >= mean of singles

  std::string to_json() const;
  std::string to_table() const;
};

/// The model-variant comparison: MLP vs MOE vs MAF+MOE per seed, plus
/// `n_trials` independent 5-seed ensembles of the full model (trial 0 reuses
/// the MAF+MOE models; later trials shift the seed base).
MethodComparison run_method_comparison(const Dataset& dataset,
                                       const TrainConfig& base,
                                       const std::vector<uint64_t>& seeds,
                                       int n_trials);

struct GradCaseResult {
  std::string name;
  nn::GradCheckReport report;
};

/// Finite-difference gradient checks for every differentiable module on toy
/// shapes, in double precision: dense(+sigmoid+BCE), softmax, ReLU, batch
/// norm (train and eval), dropout-off fusion, NetVLAD, MOE head, the full
/// frame-level model and the video-level model. Checks parameter and input
/// gradients.
std::vector<GradCaseResult> run_gradcheck_suite();

}  // namespace mgn

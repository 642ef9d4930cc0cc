#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mgn/dataset.hpp"

namespace mgn {

/// Pearson correlation r = sum((x-mx)(y-my)) / sqrt(sum(x-mx)^2 sum(y-my)^2),
/// accumulated in double. A zero-variance side makes the pair degenerate:
/// r is reported as 0 and *degenerate is set when provided.
double pearson(std::span<const double> x, std::span<const double> y,
               bool* degenerate = nullptr);
double pearson(std::span<const float> x, std::span<const float> y,
               bool* degenerate = nullptr);

/// T x 15 per-frame probabilities for one video.
using PredictionTrack = nn::Mat<float>;
using PredictionSet = std::map<std::string, PredictionTrack>;

struct EvalReport {
  struct VideoResult {
    std::string video_id;
    std::vector<double> r;  // one per expression
    double mean = 0.0;
    int degenerate = 0;  // expressions with zero variance on either side
  };
  std::vector<VideoResult> videos;
  double overall = 0.0;  // mean over videos of mean over expressions
  int degenerate_total = 0;

  std::string to_json() const;
  std::string to_csv() const;
};

/// The challenge metric: r per (video, expression), averaged over the 15
/// expressions per video, then over videos. Every prediction must match its
/// video's label track shape.
EvalReport evaluate(const PredictionSet& predictions, const Dataset& dataset,
                    Split split);

/// Elementwise mean of K prediction sets with identical video/frame coverage.
PredictionSet ensemble(const std::vector<PredictionSet>& sets);

/// Prediction tracks on disk: one "prediction" MGF1 track per video, named
/// <video_id>.mgf in a directory.
void save_predictions(const PredictionSet& preds,
                      const std::filesystem::path& dir);
PredictionSet load_predictions(const std::filesystem::path& dir);

}  // namespace mgn

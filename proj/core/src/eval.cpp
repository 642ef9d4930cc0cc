#include "mgn/eval.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mgn/errors.hpp"

namespace mgn {

using nlohmann::json;

namespace {

template <typename T>
double pearson_impl(std::span<const T> x, std::span<const T> y,
                    bool* degenerate) {
  if (x.size() != y.size()) throw ShapeError("pearson: length mismatch");
  const size_t n = x.size();
  if (n < 2) throw InvariantError("pearson: need at least two samples");
  if (degenerate) *degenerate = false;

  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y,
               bool* degenerate) {
  return pearson_impl(x, y, degenerate);
}

double pearson(std::span<const float> x, std::span<const float> y,
               bool* degenerate) {
  return pearson_impl(x, y, degenerate);
}

EvalReport evaluate(const PredictionSet& predictions, const Dataset& dataset,
                    Split split) {
  EvalReport report;
  for (const VideoRecord* video : dataset.split_videos(split)) {
    auto it = predictions.find(video->video_id);
    if (it == predictions.end())
      throw InvariantError("evaluate: no prediction for video " +
                           video->video_id);
    const PredictionTrack& pred = it->second;
    const nn::Mat<float>& labels = video->labels().values;
    if (pred.rows != labels.rows || pred.cols != labels.cols)
      throw ShapeError("evaluate: prediction shape mismatch for video " +
                       video->video_id);

    EvalReport::VideoResult vr;
    vr.video_id = video->video_id;
    const int t = pred.rows;
    std::vector<double> px(t), py(t);
    double sum = 0.0;
    for (int j = 0; j < pred.cols; ++j) {
      for (int i = 0; i < t; ++i) {
        px[i] = pred(i, j);
        py[i] = labels(i, j);
      }
      bool degenerate = false;
      double r = pearson(std::span<const double>(px),
                         std::span<const double>(py), &degenerate);
      if (degenerate) ++vr.degenerate;
      vr.r.push_back(r);
      sum += r;
    }
    vr.mean = sum / pred.cols;
    report.degenerate_total += vr.degenerate;
    report.videos.push_back(std::move(vr));
  }

  if (report.videos.empty())
    throw InvariantError("evaluate: no videos in split " + to_string(split));
  double total = 0.0;
  for (const auto& vr : report.videos) total += vr.mean;
  report.overall = total / static_cast<double>(report.videos.size());
  return report;
}

PredictionSet ensemble(const std::vector<PredictionSet>& sets) {
  if (sets.empty()) throw InvariantError("ensemble: no prediction sets");
  const PredictionSet& first = sets.front();
  for (const auto& s : sets)
    if (s.size() != first.size())
      throw InvariantError("ensemble: video coverage differs between sets");

  PredictionSet out;
  for (const auto& [id, base] : first) {
    nn::Mat<float> acc = base;
    for (size_t k = 1; k < sets.size(); ++k) {
      auto it = sets[k].find(id);
      if (it == sets[k].end())
        throw InvariantError("ensemble: video " + id + " missing from set " +
                             std::to_string(k));
      if (it->second.rows != base.rows || it->second.cols != base.cols)
        throw ShapeError("ensemble: frame coverage differs for video " + id);
      for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += it->second.v[i];
    }
    const float inv = 1.0f / static_cast<float>(sets.size());
    for (auto& x : acc.v) x *= inv;
    out.emplace(id, std::move(acc));
  }
  return out;
}

void save_predictions(const PredictionSet& preds,
                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [id, track] : preds) {
    FeatureTrack t;
    t.modality = "prediction";
    t.rate = frame_rate();
    t.values = track;
    write_track(t, dir / (id + ".mgf"));
  }
}

PredictionSet load_predictions(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw IoError("prediction directory not found: " + dir.string());
  PredictionSet out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".mgf") continue;
    FeatureTrack t = read_track(entry.path());
    if (t.modality != "prediction")
      throw InvariantError("not a prediction track: " + entry.path().string());
    out.emplace(entry.path().stem().string(), std::move(t.values));
  }
  if (out.empty())
    throw IoError("no prediction tracks in " + dir.string());
  return out;
}

std::string EvalReport::to_json() const {
  json j;
  j["overall"] = overall;
  j["degenerate_total"] = degenerate_total;
  j["videos"] = json::array();
  for (const auto& vr : videos)
    j["videos"].push_back({{"video_id", vr.video_id},
                           {"mean", vr.mean},
                           {"degenerate", vr.degenerate},
                           {"r", vr.r}});
  return j.dump(2);
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "video_id";
  const size_t classes = videos.empty() ? 0 : videos.front().r.size();
  for (size_t j = 0; j < classes; ++j) out << ",expression_" << j;
  out << ",mean\n";
  out.precision(10);
  for (const auto& vr : videos) {
    out << vr.video_id;
    for (double r : vr.r) out << "," << r;
    out << "," << vr.mean << "\n";
  }
  out << "overall";
  for (size_t j = 0; j < classes; ++j) {
    double s = 0.0;
    for (const auto& vr : videos) s += vr.r[j];
    out << "," << s / static_cast<double>(videos.size());
  }
  out << "," << overall << "\n";
  return out.str();
}

}  // namespace mgn

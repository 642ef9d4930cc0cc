#include "mgn/video_level.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "mgn/errors.hpp"
#include "mgn/eval.hpp"
#include "mgn/nn/loss.hpp"
#include "mgn/rng.hpp"

namespace mgn {

using nlohmann::json;

namespace {

json vconfig_to_json(const VideoTrainConfig& c) {
  return json{{"seed", c.seed},
              {"learning_rate", c.learning_rate},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"frames", c.frames},
              {"clusters", c.clusters},
              {"pooled_dim", c.pooled_dim},
              {"fused_dim", c.fused_dim},
              {"hidden_dim", c.hidden_dim},
              {"modal_dropout_p", c.modal_dropout_p},
              {"use_attention", c.use_attention}};
}

VideoTrainConfig vconfig_from_json(const json& j) {
  VideoTrainConfig c;
  c.seed = j.value("seed", c.seed);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.frames = j.value("frames", c.frames);
  c.clusters = j.value("clusters", c.clusters);
  c.pooled_dim = j.value("pooled_dim", c.pooled_dim);
  c.fused_dim = j.value("fused_dim", c.fused_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.modal_dropout_p = j.value("modal_dropout_p", c.modal_dropout_p);
  c.use_attention = j.value("use_attention", c.use_attention);
  return c;
}

// Precomputed per-video inputs for the video-level network.
struct VideoInputs {
  const VideoRecord* record = nullptr;
  nn::Mat<float> image;  // frames x image_dim, uniformly subsampled
  nn::Mat<float> audio;
  std::vector<float> title;
  nn::Mat<float> target;  // 1 x 15
};

VideoInputs prepare_inputs(const VideoRecord& video, int frames) {
  VideoInputs in;
  in.record = &video;
  in.image = uniform_subsample(video.track("image"), frames).values;
  in.audio = uniform_subsample(video.track("audio"), frames).values;
  const FeatureTrack& title = video.track("title");
  auto trow = title.values.row(0);
  in.title.assign(trow.begin(), trow.end());
  in.target = video_target(video.labels().values);
  return in;
}

// Forward a set of videos in eval mode; returns n x 15 predictions and
// leaves the hidden activations in the model.
nn::Mat<float> forward_videos(model::VideoModel<float>& model,
                              const std::vector<const VideoInputs*>& batch,
                              nn::Mode mode, Rng* rng) {
  std::vector<const nn::Mat<float>*> img, aud;
  nn::Mat<float> title(static_cast<int>(batch.size()),
                       static_cast<int>(batch.front()->title.size()));
  for (size_t i = 0; i < batch.size(); ++i) {
    img.push_back(&batch[i]->image);
    aud.push_back(&batch[i]->audio);
    std::copy(batch[i]->title.begin(), batch[i]->title.end(),
              title.row(static_cast<int>(i)).begin());
  }
  return model.forward(img, aud, title, mode, rng);
}

// Validation metric: per-class Pearson across videos between predicted and
// target means, averaged over classes (degenerate classes score 0).
double across_video_correlation(const nn::Mat<float>& pred,
                                const nn::Mat<float>& target) {
  if (pred.rows < 2) return 0.0;
  double sum = 0.0;
  std::vector<double> x(pred.rows), y(pred.rows);
  for (int j = 0; j < pred.cols; ++j) {
    for (int i = 0; i < pred.rows; ++i) {
      x[i] = pred(i, j);
      y[i] = target(i, j);
    }
    sum += pearson(std::span<const double>(x), std::span<const double>(y));
  }
  return sum / pred.cols;
}

}  // namespace

std::string VideoTrainConfig::to_json() const {
  return vconfig_to_json(*this).dump(2);
}

VideoTrainConfig VideoTrainConfig::from_json(const std::string& text) {
  try {
    return vconfig_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw InvariantError("video config parse error: " + std::string(e.what()));
  }
}

nn::Mat<float> video_target(const nn::Mat<float>& labels) {
  if (labels.rows < 1) throw InvariantError("video_target: empty labels");
  nn::Mat<float> out(1, labels.cols);
  for (int j = 0; j < labels.cols; ++j) {
    double acc = 0.0;
    for (int i = 0; i < labels.rows; ++i) acc += labels(i, j);
    out.v[j] = static_cast<float>(acc / labels.rows);
  }
  return out;
}

VideoTrainResult train_video_level(const Dataset& dataset,
                                   const VideoTrainConfig& config) {
  const auto train_videos = dataset.split_videos(Split::Train);
  const auto val_videos = dataset.split_videos(Split::Validation);
  if (train_videos.size() < 2)
    throw InvariantError("video trainer: need >= 2 training videos");
  if (val_videos.empty())
    throw InvariantError("video trainer: no validation split");

  std::vector<VideoInputs> train_in, val_in;
  for (const VideoRecord* v : train_videos)
    train_in.push_back(prepare_inputs(*v, config.frames));
  for (const VideoRecord* v : val_videos)
    val_in.push_back(prepare_inputs(*v, config.frames));

  model::VideoModelConfig mc;
  mc.image_dim = train_in.front().image.cols;
  mc.audio_dim = train_in.front().audio.cols;
  mc.title_dim = static_cast<int>(train_in.front().title.size());
  mc.frames = config.frames;
  mc.clusters = config.clusters;
  mc.pooled_dim = config.pooled_dim;
  mc.fused_dim = config.fused_dim;
  mc.hidden_dim = config.hidden_dim;
  mc.modal_dropout_p = config.modal_dropout_p;
  mc.use_attention = config.use_attention;

  VideoTrainResult result{model::VideoModel<float>(mc, config.seed), {}, {}};
  model::VideoModel<float>& model = result.model;

  nn::AdamConfig<float> ac;
  ac.learning_rate = static_cast<float>(config.learning_rate);
  nn::Adam<float> adam(model.params(), ac);

  Rng shuffle_rng = Rng(config.seed).derive(20);
  Rng dropout_rng = Rng(config.seed).derive(21);
  const int batch = std::max(
      2, std::min<int>(config.batch_size, static_cast<int>(train_in.size())));

  std::vector<int> order(train_in.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  std::vector<nn::Mat<float>> snapshot_values, snapshot_buffers;
  nn::AdamSnapshot<float> snapshot_adam;

  std::vector<const VideoInputs*> val_ptrs;
  for (const auto& v : val_in) val_ptrs.push_back(&v);
  nn::Mat<float> val_target(static_cast<int>(val_in.size()), kNumExpressions);
  for (size_t i = 0; i < val_in.size(); ++i)
    std::copy(val_in[i].target.v.begin(), val_in[i].target.v.end(),
              val_target.row(static_cast<int>(i)).begin());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, shuffle_rng);

    double loss_sum = 0.0;
    size_t loss_count = 0;
    for (size_t begin = 0; begin < order.size();
         begin += static_cast<size_t>(batch)) {
      const size_t end =
          std::min(order.size(), begin + static_cast<size_t>(batch));
      if (end - begin < 2) break;
      std::vector<const VideoInputs*> b;
      nn::Mat<float> target(static_cast<int>(end - begin), kNumExpressions);
      for (size_t i = begin; i < end; ++i) {
        b.push_back(&train_in[order[i]]);
        std::copy(train_in[order[i]].target.v.begin(),
                  train_in[order[i]].target.v.end(),
                  target.row(static_cast<int>(i - begin)).begin());
      }
      nn::Mat<float> p = forward_videos(model, b, nn::Mode::Train,
                                        &dropout_rng);
      auto bce = nn::bce_loss(p, target);
      if (!std::isfinite(bce.loss))
        throw NumericalError("video trainer: non-finite loss at epoch " +
                             std::to_string(epoch));
      model.backward(bce.dp);
      adam.step();
      loss_sum += static_cast<double>(bce.loss) * static_cast<double>(end - begin);
      loss_count += end - begin;
    }
    result.report.train_loss.push_back(loss_sum /
                                       static_cast<double>(loss_count));

    nn::Mat<float> val_pred =
        forward_videos(model, val_ptrs, nn::Mode::Eval, nullptr);
    const double corr = across_video_correlation(val_pred, val_target);
    result.report.val_correlation.push_back(corr);

    if (result.report.best_epoch < 0 || corr > result.report.best_correlation) {
      result.report.best_epoch = epoch;
      result.report.best_correlation = corr;
      snapshot_values.clear();
      for (nn::Param<float>* p : model.params())
        snapshot_values.push_back(p->value);
      snapshot_buffers.clear();
      for (nn::Mat<float>* b : model.buffers()) snapshot_buffers.push_back(*b);
      snapshot_adam = nn::snapshot_adam(adam);
    }
  }

  auto params = model.params();
  for (size_t i = 0; i < params.size(); ++i)
    params[i]->value = snapshot_values[i];
  auto buffers = model.buffers();
  for (size_t i = 0; i < buffers.size(); ++i) *buffers[i] = snapshot_buffers[i];
  result.adam = std::move(snapshot_adam);
  return result;
}

std::map<std::string, FeatureTrack> export_video_feature(
    model::VideoModel<float>& model, const Dataset& dataset, int frames) {
  std::map<std::string, FeatureTrack> out;
  for (const VideoRecord& video : dataset.videos) {
    VideoInputs in = prepare_inputs(video, frames);
    std::vector<const VideoInputs*> batch{&in};
    forward_videos(model, batch, nn::Mode::Eval, nullptr);
    const nn::Mat<float>& hidden = model.hidden_activations();

    FeatureTrack track;
    track.modality = "video_theme";
    track.rate = frame_rate();
    track.values = nn::Mat<float>(1, hidden.cols);
    auto row = hidden.row(0);
    std::copy(row.begin(), row.end(), track.values.row(0).begin());
    validate_track(track);
    out.emplace(video.video_id, std::move(track));
  }
  return out;
}

Manifest export_video_feature_to(model::VideoModel<float>& model,
                                 const Dataset& dataset, int frames,
                                 const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto tracks = export_video_feature(model, dataset, frames);

  Manifest manifest = dataset.manifest;
  for (auto& entry : manifest.entries) {
    const FeatureTrack& track = tracks.at(entry.video_id);
    const std::string file = entry.video_id + "_video_theme.mgf";
    write_track(track, out_dir / file);
    // Manifest paths are relative to the manifest file, which the caller
    // writes into out_dir's parent or out_dir itself; store relative to
    // out_dir and let the caller place the manifest there.
    entry.tracks["video_theme"] =
        ManifestEntry::TrackRef{file, track.dim(), track.rate};
  }
  return manifest;
}

void save_video_checkpoint(const std::filesystem::path& dir,
                           model::VideoModel<float>& model,
                           const VideoTrainConfig& config,
                           const nn::AdamSnapshot<float>* adam) {
  json mcfg;
  mcfg["type"] = "video";
  mcfg["train_config"] = vconfig_to_json(config);
  mcfg["image_dim"] = model.config().image_dim;
  mcfg["audio_dim"] = model.config().audio_dim;
  mcfg["title_dim"] = model.config().title_dim;
  nn::save_checkpoint(dir, model.params(), model.buffers(), adam, mcfg.dump());
}

LoadedVideoModel load_video_checkpoint(const std::filesystem::path& dir) {
  json mcfg;
  try {
    mcfg = json::parse(nn::checkpoint_model_config(dir));
  } catch (const json::exception& e) {
    throw InvariantError("checkpoint model config parse error: " +
                         std::string(e.what()));
  }
  if (mcfg.value("type", "") != "video")
    throw InvariantError("checkpoint is not a video model: " + dir.string());

  LoadedVideoModel out{model::VideoModel<float>(),
                       vconfig_from_json(mcfg.at("train_config"))};
  model::VideoModelConfig mc;
  mc.image_dim = mcfg.at("image_dim").get<int>();
  mc.audio_dim = mcfg.at("audio_dim").get<int>();
  mc.title_dim = mcfg.at("title_dim").get<int>();
  mc.frames = out.config.frames;
  mc.clusters = out.config.clusters;
  mc.pooled_dim = out.config.pooled_dim;
  mc.fused_dim = out.config.fused_dim;
  mc.hidden_dim = out.config.hidden_dim;
  mc.modal_dropout_p = out.config.modal_dropout_p;
  mc.use_attention = out.config.use_attention;
  out.model = model::VideoModel<float>(mc, out.config.seed);

  auto params = out.model.params();
  auto buffers = out.model.buffers();
  nn::load_checkpoint(dir, params, buffers);
  return out;
}

}  // namespace mgn

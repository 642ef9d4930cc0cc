#include "mgn/trainer.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "mgn/errors.hpp"
#include "mgn/nn/loss.hpp"
#include "mgn/rng.hpp"

namespace mgn {

using nlohmann::json;

namespace {

constexpr int kPredictChunk = 4096;

struct SampleRef {
  int video;  // index into the train video list
  int frame;
};

// Gathers one batch: per-modality B x dim matrices plus the B x 15 labels.
void gather_batch(const std::vector<const VideoRecord*>& videos,
                  const std::vector<std::string>& modalities,
                  const std::vector<SampleRef>& samples, size_t begin,
                  size_t end, std::vector<nn::Mat<float>>& feats,
                  nn::Mat<float>& labels) {
  const int b = static_cast<int>(end - begin);
  feats.clear();
  for (const auto& name : modalities) {
    const int dim = videos[samples[begin].video]->track(name).dim();
    feats.emplace_back(b, dim);
  }
  labels = nn::Mat<float>(b, kNumExpressions);

  for (size_t s = begin; s < end; ++s) {
    const int r = static_cast<int>(s - begin);
    const VideoRecord& video = *videos[samples[s].video];
    for (size_t m = 0; m < modalities.size(); ++m) {
      const FeatureTrack& t = video.track(modalities[m]);
      auto src = t.values.row(map_frame_index(t, samples[s].frame));
      std::copy(src.begin(), src.end(), feats[m].row(r).begin());
    }
    auto lab = video.labels().values.row(samples[s].frame);
    std::copy(lab.begin(), lab.end(), labels.row(r).begin());
  }
}

json config_to_json(const TrainConfig& c) {
  return json{{"seed", c.seed},
              {"learning_rate", c.learning_rate},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"classes", c.classes},
              {"modalities", c.modalities},
              {"fused_dim", c.fused_dim},
              {"modal_dropout_p", c.modal_dropout_p},
              {"use_attention", c.use_attention},
              {"n_experts", c.n_experts},
              {"expert_hidden", c.expert_hidden}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.seed = j.value("seed", c.seed);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.classes = j.value("classes", c.classes);
  c.modalities = j.value("modalities", c.modalities);
  c.fused_dim = j.value("fused_dim", c.fused_dim);
  c.modal_dropout_p = j.value("modal_dropout_p", c.modal_dropout_p);
  c.use_attention = j.value("use_attention", c.use_attention);
  c.n_experts = j.value("n_experts", c.n_experts);
  c.expert_hidden = j.value("expert_hidden", c.expert_hidden);
  return c;
}

}  // namespace

std::string TrainConfig::to_json() const { return config_to_json(*this).dump(2); }

TrainConfig TrainConfig::from_json(const std::string& text) {
  try {
    return config_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw InvariantError("train config parse error: " + std::string(e.what()));
  }
}

std::string TrainReport::to_json() const {
  return json{{"train_loss", train_loss},
              {"val_correlation", val_correlation},
              {"best_epoch", best_epoch},
              {"best_correlation", best_correlation}}
      .dump(2);
}

model::FrameModelConfig frame_model_config(const Dataset& dataset,
                                           const TrainConfig& config) {
  if (dataset.videos.empty()) throw InvariantError("trainer: empty dataset");
  if (config.batch_size < 2)
    throw InvariantError("trainer: batch size must be >= 2");
  if (config.epochs < 1) throw InvariantError("trainer: epochs must be >= 1");

  model::FrameModelConfig mc;
  mc.fusion.modalities = config.modalities;
  for (const auto& name : config.modalities)
    mc.fusion.dims.push_back(dataset.videos.front().track(name).dim());
  mc.fusion.fused_dim = config.fused_dim;
  mc.fusion.modal_dropout_p = config.modal_dropout_p;
  mc.fusion.use_attention = config.use_attention;
  mc.n_experts = config.n_experts;
  mc.expert_hidden = config.expert_hidden;
  mc.classes = config.classes;
  return mc;
}

PredictionSet predict_frame_model(model::FrameModel<float>& model,
                                  const Dataset& dataset, Split split,
                                  const std::vector<std::string>& modalities) {
  PredictionSet out;
  for (const VideoRecord* video : dataset.split_videos(split)) {
    const int frames = video->frames();
    nn::Mat<float> track(frames, kNumExpressions);
    std::vector<nn::Mat<float>> feats;
    for (int start = 0; start < frames; start += kPredictChunk) {
      const int b = std::min(kPredictChunk, frames - start);
      feats.clear();
      for (const auto& name : modalities) {
        const FeatureTrack& t = video->track(name);
        nn::Mat<float> f(b, t.dim());
        for (int i = 0; i < b; ++i) {
          auto src = t.values.row(map_frame_index(t, start + i));
          std::copy(src.begin(), src.end(), f.row(i).begin());
        }
        feats.push_back(std::move(f));
      }
      nn::Mat<float> p = model.forward(feats, nn::Mode::Eval, nullptr);
      for (int i = 0; i < b; ++i) {
        auto src = p.row(i);
        std::copy(src.begin(), src.end(), track.row(start + i).begin());
      }
    }
    out.emplace(video->video_id, std::move(track));
  }
  return out;
}

FrameTrainResult train_frame_model(const Dataset& dataset,
                                   const TrainConfig& config) {
  const auto train_videos = dataset.split_videos(Split::Train);
  const auto val_videos = dataset.split_videos(Split::Validation);
  if (train_videos.empty()) throw InvariantError("trainer: no train split");
  if (val_videos.empty()) throw InvariantError("trainer: no validation split");

  model::FrameModelConfig mc = frame_model_config(dataset, config);
  FrameTrainResult result{model::FrameModel<float>(mc, config.seed), {}, {}};
  model::FrameModel<float>& model = result.model;

  nn::AdamConfig<float> ac;
  ac.learning_rate = static_cast<float>(config.learning_rate);
  nn::Adam<float> adam(model.params(), ac);

  Rng shuffle_rng = Rng(config.seed).derive(10);
  Rng dropout_rng = Rng(config.seed).derive(11);

  std::vector<SampleRef> samples;
  for (size_t v = 0; v < train_videos.size(); ++v)
    for (int f = 0; f < train_videos[v]->frames(); ++f)
      samples.push_back({static_cast<int>(v), f});
  if (samples.size() < 2)
    throw InvariantError("trainer: fewer than two training frames");

  std::vector<nn::Mat<float>> snapshot_values;
  std::vector<nn::Mat<float>> snapshot_buffers;
  nn::AdamSnapshot<float> snapshot_adam;

  std::vector<nn::Mat<float>> feats;
  nn::Mat<float> labels;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(samples, shuffle_rng);

    double loss_sum = 0.0;
    size_t loss_count = 0;
    for (size_t begin = 0; begin < samples.size();
         begin += static_cast<size_t>(config.batch_size)) {
      const size_t end =
          std::min(samples.size(), begin + static_cast<size_t>(config.batch_size));
      if (end - begin < 2) break;  // batch norm cannot run on one sample
      gather_batch(train_videos, config.modalities, samples, begin, end, feats,
                   labels);
      nn::Mat<float> p = model.forward(feats, nn::Mode::Train, &dropout_rng);
      auto bce = nn::bce_loss(p, labels);
      if (!std::isfinite(bce.loss))
        throw NumericalError("trainer: non-finite loss at epoch " +
                             std::to_string(epoch));
      model.backward(bce.dp);
      adam.step();
      loss_sum += static_cast<double>(bce.loss) * static_cast<double>(end - begin);
      loss_count += end - begin;
    }
    result.report.train_loss.push_back(loss_sum /
                                       static_cast<double>(loss_count));

    PredictionSet preds =
        predict_frame_model(model, dataset, Split::Validation,
                            config.modalities);
    const double corr =
        evaluate(preds, dataset, Split::Validation).overall;
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

  // Hand back the best-validation snapshot, not the last epoch.
  auto params = model.params();
  for (size_t i = 0; i < params.size(); ++i)
    params[i]->value = snapshot_values[i];
  auto buffers = model.buffers();
  for (size_t i = 0; i < buffers.size(); ++i) *buffers[i] = snapshot_buffers[i];
  result.adam = std::move(snapshot_adam);
  return result;
}

void save_frame_checkpoint(const std::filesystem::path& dir,
                           model::FrameModel<float>& model,
                           const TrainConfig& config,
                           const nn::AdamSnapshot<float>* adam) {
  json mcfg;
  mcfg["type"] = "frame";
  mcfg["train_config"] = config_to_json(config);
  mcfg["dims"] = model.config().fusion.dims;
  nn::save_checkpoint(dir, model.params(), model.buffers(), adam, mcfg.dump());
}

LoadedFrameModel load_frame_checkpoint(const std::filesystem::path& dir) {
  json mcfg;
  try {
    mcfg = json::parse(nn::checkpoint_model_config(dir));
  } catch (const json::exception& e) {
    throw InvariantError("checkpoint model config parse error: " +
                         std::string(e.what()));
  }
  if (mcfg.value("type", "") != "frame")
    throw InvariantError("checkpoint is not a frame model: " + dir.string());

  LoadedFrameModel out{model::FrameModel<float>(), config_from_json(
                                                       mcfg.at("train_config"))};
  model::FrameModelConfig mc;
  mc.fusion.modalities = out.config.modalities;
  mc.fusion.dims = mcfg.at("dims").get<std::vector<int>>();
  mc.fusion.fused_dim = out.config.fused_dim;
  mc.fusion.modal_dropout_p = out.config.modal_dropout_p;
  mc.fusion.use_attention = out.config.use_attention;
  mc.n_experts = out.config.n_experts;
  mc.expert_hidden = out.config.expert_hidden;
  mc.classes = out.config.classes;
  out.model = model::FrameModel<float>(mc, out.config.seed);

  auto params = out.model.params();
  auto buffers = out.model.buffers();
  nn::load_checkpoint(dir, params, buffers);
  return out;
}

}  // namespace mgn

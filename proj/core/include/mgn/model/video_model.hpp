#pragma once

#include <vector>

#include "mgn/model/fusion.hpp"
#include "mgn/model/netvlad.hpp"

namespace mgn::model {

struct VideoModelConfig {
  int image_dim = 0;
  int audio_dim = 0;
  int title_dim = 0;
  int frames = 80;      // uniformly subsampled frames fed to the pooling
  int clusters = 8;     // NetVLAD K
  int pooled_dim = 1024;
  int fused_dim = 1024;
  int hidden_dim = 1024;  // width of the exported embedding
  double modal_dropout_p = 0.0;  // video-level fusion runs without dropout
  bool use_attention = true;
  int classes = kNumExpressions;
};

/// Video-level expression network: NetVLAD pools the subsampled image and
/// audio frames, modal attention fusion merges the two pooled vectors with
/// the title embedding, and a head (batch norm -> ReLU -> hidden dense ->
/// output dense -> sigmoid) predicts the per-video averaged labels. The
/// hidden dense activations are the exported video_theme embedding.
template <typename T>
class VideoModel {
 public:
  VideoModel() = default;

  VideoModel(const VideoModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
    Rng rng = Rng(seed).derive(kInitStream);
    vlad_image_ = NetVlad<T>(
        "video.vlad_image",
        NetVladConfig{cfg.image_dim, cfg.clusters, cfg.pooled_dim}, rng);
    vlad_audio_ = NetVlad<T>(
        "video.vlad_audio",
        NetVladConfig{cfg.audio_dim, cfg.clusters, cfg.pooled_dim}, rng);
    FusionConfig fc;
    fc.modalities = {"pooled_image", "pooled_audio", "title"};
    fc.dims = {cfg.pooled_dim, cfg.pooled_dim, cfg.title_dim};
    fc.fused_dim = cfg.fused_dim;
    fc.modal_dropout_p = cfg.modal_dropout_p;
    fc.use_attention = cfg.use_attention;
    fusion_ = ModalFusion<T>(fc, rng);
    bn_ = nn::BatchNorm<T>("video.bn", cfg.fused_dim);
    hidden_ = nn::Dense<T>("video.hidden", cfg.fused_dim, cfg.hidden_dim, rng);
    out_ = nn::Dense<T>("video.out", cfg.hidden_dim, cfg.classes, rng);
  }

  const VideoModelConfig& config() const { return cfg_; }

  /// image_frames/audio_frames hold one frames x dim matrix per video in the
  /// batch; title is n x title_dim. Returns n x classes probabilities.
  Mat<T> forward(const std::vector<const Mat<T>*>& image_frames,
                 const std::vector<const Mat<T>*>& audio_frames,
                 const Mat<T>& title, Mode mode, Rng* rng) {
    const int n = static_cast<int>(image_frames.size());
    if (static_cast<int>(audio_frames.size()) != n || title.rows != n)
      throw ShapeError("video model: ragged batch");

    image_caches_.assign(n, {});
    audio_caches_.assign(n, {});
    Mat<T> pooled_image(n, cfg_.pooled_dim);
    Mat<T> pooled_audio(n, cfg_.pooled_dim);
    for (int v = 0; v < n; ++v) {
      Mat<T> pi = vlad_image_.forward(*image_frames[v], image_caches_[v]);
      Mat<T> pa = vlad_audio_.forward(*audio_frames[v], audio_caches_[v]);
      std::copy(pi.v.begin(), pi.v.end(), pooled_image.row(v).begin());
      std::copy(pa.v.begin(), pa.v.end(), pooled_audio.row(v).begin());
    }

    Mat<T> fused =
        fusion_.forward({pooled_image, pooled_audio, title}, mode, rng);
    Mat<T> h = relu_.forward(bn_.forward(fused, mode));
    hidden_act_ = hidden_.forward(h);
    probs_ = sigmoid(out_.forward(hidden_act_));
    return probs_;
  }

  /// Returns gradients w.r.t. the per-video frame inputs (image, audio) and
  /// the title batch. Parameter gradients accumulate.
  struct InputGrads {
    std::vector<Mat<T>> image;
    std::vector<Mat<T>> audio;
    Mat<T> title;
  };

  InputGrads backward(const Mat<T>& d_probs) {
    const int n = probs_.rows;
    Mat<T> d_logits(n, cfg_.classes);
    for (size_t i = 0; i < probs_.v.size(); ++i)
      d_logits.v[i] = d_probs.v[i] * probs_.v[i] * (T(1) - probs_.v[i]);

    Mat<T> d_hidden = out_.backward(d_logits);
    Mat<T> d_h = hidden_.backward(d_hidden);
    Mat<T> d_fused = bn_.backward(relu_.backward(d_h));
    std::vector<Mat<T>> d_feats = fusion_.backward(d_fused);

    InputGrads grads;
    grads.title = std::move(d_feats[2]);
    for (int v = 0; v < n; ++v) {
      Mat<T> d_pi(1, cfg_.pooled_dim);
      Mat<T> d_pa(1, cfg_.pooled_dim);
      auto pirow = d_feats[0].row(v);
      auto parow = d_feats[1].row(v);
      std::copy(pirow.begin(), pirow.end(), d_pi.v.begin());
      std::copy(parow.begin(), parow.end(), d_pa.v.begin());
      grads.image.push_back(vlad_image_.backward(image_caches_[v], d_pi));
      grads.audio.push_back(vlad_audio_.backward(audio_caches_[v], d_pa));
    }
    return grads;
  }

  /// Hidden activations of the last forward pass (n x hidden_dim); row v is
  /// the exported embedding of video v.
  const Mat<T>& hidden_activations() const { return hidden_act_; }

  NetVlad<T>& vlad_image() { return vlad_image_; }
  NetVlad<T>& vlad_audio() { return vlad_audio_; }
  ModalFusion<T>& fusion() { return fusion_; }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    vlad_image_.collect(out);
    vlad_audio_.collect(out);
    fusion_.collect(out);
    bn_.collect(out);
    hidden_.collect(out);
    out_.collect(out);
    return out;
  }

  std::vector<Mat<T>*> buffers() {
    return {&bn_.running_mean(), &bn_.running_var()};
  }

  static constexpr uint64_t kInitStream = 1;

 private:
  VideoModelConfig cfg_;
  NetVlad<T> vlad_image_, vlad_audio_;
  std::vector<typename NetVlad<T>::Cache> image_caches_, audio_caches_;
  ModalFusion<T> fusion_;
  nn::BatchNorm<T> bn_;
  nn::Relu<T> relu_;
  nn::Dense<T> hidden_;
  nn::Dense<T> out_;
  Mat<T> hidden_act_, probs_;
};

}  // namespace mgn::model

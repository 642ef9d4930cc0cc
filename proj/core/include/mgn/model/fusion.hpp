#pragma once

#include <string>
#include <vector>

#include "mgn/nn/layers.hpp"

namespace mgn::model {

using nn::Mat;
using nn::Mode;
using nn::Param;

struct FusionConfig {
  std::vector<std::string> modalities;  // fixed order, matches input batches
  std::vector<int> dims;                // per-modality feature width
  int fused_dim = 1024;
  double modal_dropout_p = 0.25;
  // When false the module degrades to plain concatenation + projection
  // (the ablation baseline); attention vectors are kept out of the
  // parameter list so the optimizer never sees them.
  bool use_attention = true;

  int concat_dim() const {
    int s = 0;
    for (int d : dims) s += d;
    return s;
  }
};

/// Modal attention fusion. Each modality's vector is scored by a learnable
/// per-modality vector (s_i = w_i . v_i), the scores softmax-normalize
/// across modalities, each vector is scaled by its weight, and the weighted
/// concatenation is projected to fused_dim. Train mode may zero whole
/// modalities at random first (modal dropout); attention then sees the
/// zeroed vector, so a dropped modality scores 0 and is never renormalized
/// away.
template <typename T>
class ModalFusion {
 public:
  ModalFusion() = default;

  ModalFusion(const FusionConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.modalities.size() != cfg.dims.size() || cfg.dims.empty())
      throw InvariantError("fusion: modality/dim lists inconsistent");
    for (size_t i = 0; i < cfg.dims.size(); ++i) {
      attn_.emplace_back("fusion.attn." + cfg.modalities[i], 1, cfg.dims[i]);
      glorot_init(attn_.back().value, cfg.dims[i], 1, rng);
    }
    proj_ = nn::Dense<T>("fusion.proj", cfg.concat_dim(), cfg.fused_dim, rng);
  }

  const FusionConfig& config() const { return cfg_; }
  int n_modalities() const { return static_cast<int>(cfg_.dims.size()); }

  /// feats[i] is B x dims[i]; returns the fused B x fused_dim batch.
  /// `rng` is only consulted in train mode with modal_dropout_p > 0.
  Mat<T> forward(const std::vector<Mat<T>>& feats, Mode mode, Rng* rng) {
    const int n = n_modalities();
    if (static_cast<int>(feats.size()) != n)
      throw ShapeError("fusion: expected " + std::to_string(n) +
                       " modalities, got " + std::to_string(feats.size()));
    const int b = feats[0].rows;
    for (int i = 0; i < n; ++i) {
      if (feats[i].cols != cfg_.dims[i])
        throw ShapeError("fusion: modality '" + cfg_.modalities[i] +
                         "' dim mismatch");
      if (feats[i].rows != b)
        throw ShapeError("fusion: ragged batch");
    }

    const bool drop = mode == Mode::Train && cfg_.modal_dropout_p > 0.0;
    keep_ = Mat<T>(b, n, T(1));
    if (drop) {
      if (!rng) throw InvariantError("fusion: modal dropout needs an rng");
      for (auto& x : keep_.v)
        x = rng->bernoulli(cfg_.modal_dropout_p) ? T(0) : T(1);
    }

    masked_ = feats;
    if (drop)
      for (int i = 0; i < n; ++i)
        for (int r = 0; r < b; ++r) {
          if (keep_(r, i) != T(0)) continue;
          auto row = masked_[i].row(r);
          std::fill(row.begin(), row.end(), T(0));
        }

    if (cfg_.use_attention) {
      Mat<T> scores(b, n);
      for (int i = 0; i < n; ++i) {
        auto w = attn_[i].value.row(0);
        for (int r = 0; r < b; ++r)
          scores(r, i) = nn::dot<T>(w, masked_[i].row(r));
      }
      alpha_ = softmax_rows(scores);
    } else {
      alpha_ = Mat<T>(b, n, T(1));
    }

    Mat<T> concat(b, cfg_.concat_dim());
    int off = 0;
    for (int i = 0; i < n; ++i) {
      for (int r = 0; r < b; ++r) {
        const T a = alpha_(r, i);
        auto src = masked_[i].row(r);
        T* dst = concat.v.data() + static_cast<size_t>(r) * concat.cols + off;
        for (int j = 0; j < cfg_.dims[i]; ++j) dst[j] = a * src[j];
      }
      off += cfg_.dims[i];
    }
    return proj_.forward(concat);
  }

  /// Gradients w.r.t. the (pre-dropout) inputs, one matrix per modality.
  /// Parameter gradients accumulate into the attention vectors and the
  /// projection layer.
  std::vector<Mat<T>> backward(const Mat<T>& d_fused) {
    const int n = n_modalities();
    const int b = keep_.rows;
    Mat<T> d_concat = proj_.backward(d_fused);

    std::vector<Mat<T>> d_masked;
    Mat<T> d_alpha(b, n);
    int off = 0;
    for (int i = 0; i < n; ++i) {
      Mat<T> dm(b, cfg_.dims[i]);
      for (int r = 0; r < b; ++r) {
        const T* seg =
            d_concat.v.data() + static_cast<size_t>(r) * d_concat.cols + off;
        auto mrow = masked_[i].row(r);
        T da = T(0);
        const T a = alpha_(r, i);
        for (int j = 0; j < cfg_.dims[i]; ++j) {
          da += seg[j] * mrow[j];
          dm(r, j) = a * seg[j];
        }
        d_alpha(r, i) = da;
      }
      off += cfg_.dims[i];
      d_masked.push_back(std::move(dm));
    }

    if (cfg_.use_attention) {
      Mat<T> d_scores = softmax_backward_rows(alpha_, d_alpha);
      for (int i = 0; i < n; ++i) {
        auto w = attn_[i].value.row(0);
        auto dw = attn_[i].grad.row(0);
        for (int r = 0; r < b; ++r) {
          const T ds = d_scores(r, i);
          auto mrow = masked_[i].row(r);
          auto drow = d_masked[i].row(r);
          for (int j = 0; j < cfg_.dims[i]; ++j) {
            dw[j] += ds * mrow[j];
            drow[j] += ds * w[j];
          }
        }
      }
    }

    // Through the dropout mask to the original inputs.
    for (int i = 0; i < n; ++i)
      for (int r = 0; r < b; ++r) {
        if (keep_(r, i) != T(0)) continue;
        auto drow = d_masked[i].row(r);
        std::fill(drow.begin(), drow.end(), T(0));
      }
    return d_masked;
  }

  /// Attention weights of the last forward batch, B x N, rows sum to 1.
  const Mat<T>& alpha() const { return alpha_; }
  /// Keep mask of the last forward batch (1 kept, 0 dropped).
  const Mat<T>& keep_mask() const { return keep_; }

  void collect(std::vector<Param<T>*>& out) {
    if (cfg_.use_attention)
      for (auto& p : attn_) out.push_back(&p);
    proj_.collect(out);
  }

  nn::Dense<T>& projection() { return proj_; }
  Param<T>& attention(int i) { return attn_[i]; }

 private:
  FusionConfig cfg_;
  std::vector<Param<T>> attn_;
  nn::Dense<T> proj_;
  std::vector<Mat<T>> masked_;
  Mat<T> alpha_, keep_;
};

}  // namespace mgn::model

#pragma once

#include <vector>

#include "mgn/model/fusion.hpp"
#include "mgn/model/moe.hpp"

namespace mgn::model {

struct FrameModelConfig {
  FusionConfig fusion;
  int n_experts = 3;
  int expert_hidden = 1024;
  int classes = kNumExpressions;
};

/// The frame-level predictor: modal attention fusion into the MOE head.
template <typename T>
class FrameModel {
 public:
  FrameModel() = default;

  FrameModel(const FrameModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
    Rng rng = Rng(seed).derive(kInitStream);
    fusion_ = ModalFusion<T>(cfg.fusion, rng);
    moe_ = MoeHead<T>(
        MoeConfig{cfg.fusion.fused_dim, cfg.n_experts, cfg.expert_hidden,
                  cfg.classes},
        rng);
  }

  const FrameModelConfig& config() const { return cfg_; }

  Mat<T> forward(const std::vector<Mat<T>>& feats, Mode mode, Rng* rng) {
    return moe_.forward(fusion_.forward(feats, mode, rng), mode);
  }

  std::vector<Mat<T>> backward(const Mat<T>& d_probs) {
    return fusion_.backward(moe_.backward(d_probs));
  }

  ModalFusion<T>& fusion() { return fusion_; }
  MoeHead<T>& moe() { return moe_; }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    fusion_.collect(out);
    moe_.collect(out);
    return out;
  }

  /// Non-learnable state that must be checkpointed (batch-norm running
  /// statistics).
  std::vector<Mat<T>*> buffers() {
    std::vector<Mat<T>*> out;
    moe_.collect_norm_state(out);
    return out;
  }

  static constexpr uint64_t kInitStream = 0;

 private:
  FrameModelConfig cfg_;
  ModalFusion<T> fusion_;
  MoeHead<T> moe_;
};

}  // namespace mgn::model

#pragma once

#include <string>
#include <vector>

#include "mgn/nn/layers.hpp"
#include "mgn/track.hpp"

namespace mgn::model {

using nn::Mat;
using nn::Mode;
using nn::Param;

struct MoeConfig {
  int input_dim = 1024;
  int n_experts = 3;
  int hidden_dim = 1024;
  int classes = kNumExpressions;
};

/// Mixture-of-experts classification head. A softmax gate weights the
/// experts' logits per sample; the combined logit goes through one sigmoid.
/// Each expert is dense -> batch norm -> ReLU -> dense. n_experts == 1
/// reduces exactly to a plain MLP head (the gate is constant 1).
template <typename T>
class MoeHead {
 public:
  MoeHead() = default;

  MoeHead(const MoeConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.n_experts < 1) throw InvariantError("moe: need >= 1 expert");
    gate_ = nn::Dense<T>("moe.gate", cfg.input_dim, cfg.n_experts, rng);
    for (int e = 0; e < cfg.n_experts; ++e) {
      const std::string base = "moe.expert" + std::to_string(e);
      experts_.push_back(Expert{
          nn::Dense<T>(base + ".l1", cfg.input_dim, cfg.hidden_dim, rng),
          nn::BatchNorm<T>(base + ".bn", cfg.hidden_dim),
          nn::Relu<T>{},
          nn::Dense<T>(base + ".l2", cfg.hidden_dim, cfg.classes, rng)});
    }
  }

  const MoeConfig& config() const { return cfg_; }

  /// Returns per-class probabilities, B x classes, strictly in (0, 1).
  Mat<T> forward(const Mat<T>& v, Mode mode) {
    if (v.cols != cfg_.input_dim) throw ShapeError("moe: input dim mismatch");
    const int b = v.rows;

    gate_out_ = softmax_rows(gate_.forward(v));
    expert_logits_.clear();
    for (auto& ex : experts_) {
      Mat<T> h = ex.l1.forward(v);
      h = ex.bn.forward(h, mode);
      h = ex.relu.forward(h);
      expert_logits_.push_back(ex.l2.forward(h));
    }

    logits_ = Mat<T>(b, cfg_.classes);
    for (int e = 0; e < cfg_.n_experts; ++e)
      for (int r = 0; r < b; ++r) {
        const T g = gate_out_(r, e);
        auto orow = expert_logits_[e].row(r);
        auto out = logits_.row(r);
        for (int j = 0; j < cfg_.classes; ++j) out[j] += g * orow[j];
      }
    probs_ = sigmoid(logits_);
    return probs_;
  }

  /// dL/dP in, dL/dV out (parameter gradients accumulate).
  Mat<T> backward(const Mat<T>& d_probs) {
    const int b = probs_.rows;
    Mat<T> d_logits(b, cfg_.classes);
    for (size_t i = 0; i < probs_.v.size(); ++i)
      d_logits.v[i] = d_probs.v[i] * probs_.v[i] * (T(1) - probs_.v[i]);

    Mat<T> d_gate_out(b, cfg_.n_experts);
    Mat<T> dv;
    for (int e = 0; e < cfg_.n_experts; ++e) {
      Mat<T> d_expert(b, cfg_.classes);
      for (int r = 0; r < b; ++r) {
        const T g = gate_out_(r, e);
        auto dlrow = d_logits.row(r);
        auto orow = expert_logits_[e].row(r);
        auto derow = d_expert.row(r);
        T dg = T(0);
        for (int j = 0; j < cfg_.classes; ++j) {
          dg += dlrow[j] * orow[j];
          derow[j] = g * dlrow[j];
        }
        d_gate_out(r, e) = dg;
      }
      auto& ex = experts_[e];
      Mat<T> dh = ex.l2.backward(d_expert);
      dh = ex.relu.backward(dh);
      dh = ex.bn.backward(dh);
      Mat<T> dve = ex.l1.backward(dh);
      if (dv.empty())
        dv = std::move(dve);
      else
        for (size_t i = 0; i < dv.v.size(); ++i) dv.v[i] += dve.v[i];
    }

    Mat<T> d_gate_logits = softmax_backward_rows(gate_out_, d_gate_out);
    Mat<T> dvg = gate_.backward(d_gate_logits);
    for (size_t i = 0; i < dv.v.size(); ++i) dv.v[i] += dvg.v[i];
    return dv;
  }

  const Mat<T>& gate_weights() const { return gate_out_; }
  const Mat<T>& combined_logits() const { return logits_; }

  void collect(std::vector<Param<T>*>& out) {
    gate_.collect(out);
    for (auto& ex : experts_) {
      ex.l1.collect(out);
      ex.bn.collect(out);
      ex.l2.collect(out);
    }
  }

  void collect_norm_state(std::vector<Mat<T>*>& out) {
    for (auto& ex : experts_) {
      out.push_back(&ex.bn.running_mean());
      out.push_back(&ex.bn.running_var());
    }
  }

 private:
  struct Expert {
    nn::Dense<T> l1;
    nn::BatchNorm<T> bn;
    nn::Relu<T> relu;
    nn::Dense<T> l2;
  };

  MoeConfig cfg_;
  nn::Dense<T> gate_;
  std::vector<Expert> experts_;
  Mat<T> gate_out_, logits_, probs_;
  std::vector<Mat<T>> expert_logits_;
};

}  // namespace mgn::model

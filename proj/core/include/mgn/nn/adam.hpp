#pragma once

#include <cmath>
#include <vector>

#include "mgn/nn/layers.hpp"

namespace mgn::nn {

template <typename T>
struct AdamConfig {
  T learning_rate = T(1e-4);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
};

/// Bias-corrected Adam over a fixed parameter list. step() consumes the
/// accumulated gradients and zeroes them.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Param<T>*> params, AdamConfig<T> cfg)
      : params_(std::move(params)), cfg_(cfg) {
    for (const Param<T>* p : params_) {
      m_.emplace_back(p->value.rows, p->value.cols);
      v_.emplace_back(p->value.rows, p->value.cols);
    }
  }

  void step() {
    ++t_;
    const T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(t_));
    for (size_t k = 0; k < params_.size(); ++k) {
      Param<T>& p = *params_[k];
      for (size_t i = 0; i < p.value.v.size(); ++i) {
        T g = p.grad.v[i];
        m_[k].v[i] = cfg_.beta1 * m_[k].v[i] + (T(1) - cfg_.beta1) * g;
        v_[k].v[i] = cfg_.beta2 * v_[k].v[i] + (T(1) - cfg_.beta2) * g * g;
        T mhat = m_[k].v[i] / bc1;
        T vhat = v_[k].v[i] / bc2;
        p.value.v[i] -=
            cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        p.grad.v[i] = T(0);
      }
    }
  }

  int64_t step_count() const { return t_; }
  const AdamConfig<T>& config() const { return cfg_; }
  std::vector<Mat<T>>& first_moments() { return m_; }
  std::vector<Mat<T>>& second_moments() { return v_; }
  void set_step_count(int64_t t) { t_ = t; }

 private:
  std::vector<Param<T>*> params_;
  AdamConfig<T> cfg_;
  std::vector<Mat<T>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace mgn::nn

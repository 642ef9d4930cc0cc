#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mgn/nn/adam.hpp"
#include "mgn/nn/layers.hpp"

namespace mgn::nn {

/// A detached copy of optimizer state, safe to keep after the Adam instance
/// (and the model it points into) are gone.
template <typename T>
struct AdamSnapshot {
  AdamConfig<T> config;
  int64_t step = 0;
  std::vector<Mat<T>> m, v;

  bool empty() const { return m.empty() && step == 0; }
};

template <typename T>
AdamSnapshot<T> snapshot_adam(const Adam<T>& adam) {
  Adam<T>& a = const_cast<Adam<T>&>(adam);
  return AdamSnapshot<T>{a.config(), a.step_count(), a.first_moments(),
                         a.second_moments()};
}

template <typename T>
void restore_adam(Adam<T>& adam, const AdamSnapshot<T>& snap) {
  adam.first_moments() = snap.m;
  adam.second_moments() = snap.v;
  adam.set_step_count(snap.step);
}

// Checkpoint directory layout: every tensor is one MGF1 container file
// (name field = tensor name, rate 1/1) plus index.json listing parameters,
// buffers (batch-norm running stats), optional Adam state, and an opaque
// model-config JSON blob the owning trainer uses to rebuild the model.

void save_checkpoint(const std::filesystem::path& dir,
                     const std::vector<Param<float>*>& params,
                     const std::vector<Mat<float>*>& buffers,
                     const AdamSnapshot<float>* adam,
                     const std::string& model_config_json);

/// Loads tensors into an already-constructed model (params/buffers must
/// match the saved names and shapes). Returns the stored Adam state, if any.
std::optional<AdamSnapshot<float>> load_checkpoint(
    const std::filesystem::path& dir,
    const std::vector<Param<float>*>& params,
    const std::vector<Mat<float>*>& buffers);

/// Reads only the model-config blob (to construct the model before loading).
std::string checkpoint_model_config(const std::filesystem::path& dir);

}  // namespace mgn::nn

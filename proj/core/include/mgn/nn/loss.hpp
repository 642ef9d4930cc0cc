#pragma once

#include <cmath>

#include "mgn/nn/mat.hpp"

namespace mgn::nn {

inline constexpr double kProbClamp = 1e-7;

template <typename T>
struct BceResult {
  T loss;
  Mat<T> dp;  // dL/dP, same shape as P
};

/// Mean binary cross-entropy over all B*C cells,
///   L = -1/(B*C) sum y log p + (1-y) log(1-p),
/// with p clamped to [1e-7, 1-1e-7] before the logs. The returned gradient
/// is with respect to the clamped probability (zero slope outside the clamp
/// would be wrong for training, so the clamp boundary value is used).
template <typename T>
BceResult<T> bce_loss(const Mat<T>& p, const Mat<T>& y) {
  check_shape(p.same_shape(y), "bce_loss: shape mismatch");
  const T lo = static_cast<T>(kProbClamp);
  const T hi = T(1) - static_cast<T>(kProbClamp);
  const double scale = 1.0 / (static_cast<double>(p.rows) * p.cols);

  double acc = 0.0;
  Mat<T> dp(p.rows, p.cols);
  for (size_t i = 0; i < p.v.size(); ++i) {
    T pc = std::min(hi, std::max(lo, p.v[i]));
    T yi = y.v[i];
    acc -= yi * std::log(static_cast<double>(pc)) +
           (T(1) - yi) * std::log(static_cast<double>(T(1) - pc));
    dp.v[i] = static_cast<T>((-yi / pc + (T(1) - yi) / (T(1) - pc)) * scale);
  }
  return {static_cast<T>(acc * scale), std::move(dp)};
}

}  // namespace mgn::nn

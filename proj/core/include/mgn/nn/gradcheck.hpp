#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mgn/nn/layers.hpp"

namespace mgn::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int worst_index = -1;
  int checked = 0;

  bool passes(double tolerance) const { return max_rel_error < tolerance; }
};

/// Central finite differences against analytic gradients.
///
/// `backward_fn` must zero the parameter gradients, run a forward pass and
/// backpropagate the loss into them. `loss_fn` must evaluate the same loss
/// without side effects on parameter values. Both must be deterministic
/// (fix any dropout masks before calling).
///
/// Relative error per element: |a - fd| / max(|a|, |fd|), switching to the
/// absolute difference when both magnitudes are below 1e-8.
inline GradCheckReport grad_check(const std::vector<Param<double>*>& params,
                                  const std::function<double()>& loss_fn,
                                  const std::function<void()>& backward_fn,
                                  double h = 1e-5) {
  backward_fn();
  std::vector<Mat<double>> analytic;
  analytic.reserve(params.size());
  for (const Param<double>* p : params) analytic.push_back(p->grad);

  GradCheckReport report;
  for (size_t k = 0; k < params.size(); ++k) {
    Param<double>& p = *params[k];
    for (size_t i = 0; i < p.value.v.size(); ++i) {
      const double keep = p.value.v[i];
      p.value.v[i] = keep + h;
      const double up = loss_fn();
      p.value.v[i] = keep - h;
      const double down = loss_fn();
      p.value.v[i] = keep;

      const double fd = (up - down) / (2.0 * h);
      const double a = analytic[k].v[i];
      const double mag = std::max(std::abs(a), std::abs(fd));
      const double err = mag < 1e-8 ? std::abs(a - fd) : std::abs(a - fd) / mag;
      ++report.checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = p.name;
        report.worst_index = static_cast<int>(i);
      }
    }
  }
  return report;
}

}  // namespace mgn::nn

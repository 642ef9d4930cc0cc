#pragma once

#include <string>
#include <vector>

#include "mgn/nn/layers.hpp"

namespace mgn::model {

using nn::Mat;
using nn::Param;

struct NetVladConfig {
  int input_dim = 0;
  int clusters = 8;
  int pooled_dim = 1024;
};

/// NetVLAD temporal pooling: soft-assign every frame to K learnable cluster
/// centers, aggregate assignment-weighted residuals per cluster, L2-normalize
/// per cluster and then globally, and project the flattened descriptor to
/// pooled_dim. Order-free by construction (sums over frames).
///
/// forward() is const and writes everything backward() needs into a Cache,
/// so one instance can pool many videos per step and replay the backwards
/// in any order.
template <typename T>
class NetVlad {
 public:
  struct Cache {
    Mat<T> x;            // n x dim input
    Mat<T> assign;       // n x K soft assignments
    Mat<T> resid;        // K x dim aggregated residuals
    std::vector<T> rho;  // per-cluster norms
    Mat<T> flat;         // 1 x K*dim, per-cluster normalized
    T gamma = T(0);      // global norm
    Mat<T> g;            // 1 x K*dim, globally normalized
  };

  NetVlad() = default;
  NetVlad(const std::string& name, const NetVladConfig& cfg, Rng& rng)
      : cfg_(cfg),
        assign_(name + ".assign", cfg.input_dim, cfg.clusters, rng),
        centers_(name + ".centers", cfg.clusters, cfg.input_dim),
        proj_(name + ".proj", cfg.clusters * cfg.input_dim, cfg.pooled_dim,
              rng) {
    glorot_init(centers_.value, cfg.input_dim, cfg.clusters, rng);
  }

  const NetVladConfig& config() const { return cfg_; }

  Mat<T> forward(const Mat<T>& x, Cache& c) const {
    if (x.cols != cfg_.input_dim)
      throw ShapeError("netvlad: input dim mismatch");
    if (x.rows < 1) throw InvariantError("netvlad: need at least one frame");
    const int n = x.rows, d = cfg_.input_dim, k = cfg_.clusters;

    c.x = x;
    c.assign = softmax_rows(assign_.apply(x));
    c.resid = Mat<T>(k, d);
    for (int t = 0; t < n; ++t) {
      auto xrow = x.row(t);
      for (int kk = 0; kk < k; ++kk) {
        const T a = c.assign(t, kk);
        auto crow = centers_.value.row(kk);
        auto vrow = c.resid.row(kk);
        for (int j = 0; j < d; ++j) vrow[j] += a * (xrow[j] - crow[j]);
      }
    }

    c.rho.assign(k, T(0));
    c.flat = Mat<T>(1, k * d);
    for (int kk = 0; kk < k; ++kk) {
      auto vrow = c.resid.row(kk);
      T ss = T(0);
      for (int j = 0; j < d; ++j) ss += vrow[j] * vrow[j];
      c.rho[kk] = std::sqrt(ss + kNormEps);
      for (int j = 0; j < d; ++j) c.flat.v[kk * d + j] = vrow[j] / c.rho[kk];
    }

    T gss = T(0);
    for (T v : c.flat.v) gss += v * v;
    c.gamma = std::sqrt(gss + kNormEps);
    c.g = Mat<T>(1, k * d);
    for (int j = 0; j < k * d; ++j) c.g.v[j] = c.flat.v[j] / c.gamma;

    return proj_.apply(c.g);
  }

  /// The 1 x K*dim descriptor before the output projection (after both
  /// normalizations). Exposed for structural tests.
  Mat<T> descriptor(const Mat<T>& x) const {
    Cache c;
    forward(x, c);
    return c.g;
  }

  /// Backpropagates d_out (1 x pooled_dim) through the cached forward pass;
  /// accumulates parameter gradients and returns dL/dx (n x dim).
  Mat<T> backward(const Cache& c, const Mat<T>& d_out) {
    const int n = c.x.rows, d = cfg_.input_dim, k = cfg_.clusters;

    Mat<T> dg = proj_.backward_with(d_out, c.g);

    // Global L2 normalization backward.
    T fdotdg = T(0);
    for (int j = 0; j < k * d; ++j) fdotdg += c.flat.v[j] * dg.v[j];
    Mat<T> dflat(1, k * d);
    for (int j = 0; j < k * d; ++j)
      dflat.v[j] = dg.v[j] / c.gamma -
                   c.flat.v[j] * fdotdg / (c.gamma * c.gamma * c.gamma);

    // Per-cluster normalization backward.
    Mat<T> dresid(k, d);
    for (int kk = 0; kk < k; ++kk) {
      auto vrow = c.resid.row(kk);
      const T* drow = dflat.v.data() + static_cast<size_t>(kk) * d;
      T vdot = T(0);
      for (int j = 0; j < d; ++j) vdot += vrow[j] * drow[j];
      const T rho = c.rho[kk];
      for (int j = 0; j < d; ++j)
        dresid(kk, j) = drow[j] / rho - vrow[j] * vdot / (rho * rho * rho);
    }

    // Residual aggregation backward.
    Mat<T> dassign(n, k);
    Mat<T> dx(n, d);
    std::vector<T> assign_sums(k, T(0));
    for (int t = 0; t < n; ++t)
      for (int kk = 0; kk < k; ++kk) assign_sums[kk] += c.assign(t, kk);
    for (int kk = 0; kk < k; ++kk) {
      auto crow = centers_.value.row(kk);
      auto dcrow = centers_.grad.row(kk);
      auto drow = dresid.row(kk);
      for (int j = 0; j < d; ++j) dcrow[j] -= assign_sums[kk] * drow[j];
      for (int t = 0; t < n; ++t) {
        auto xrow = c.x.row(t);
        T da = T(0);
        const T a = c.assign(t, kk);
        auto dxrow = dx.row(t);
        for (int j = 0; j < d; ++j) {
          da += drow[j] * (xrow[j] - crow[j]);
          dxrow[j] += a * drow[j];
        }
        dassign(t, kk) = da;
      }
    }

    Mat<T> dlogits = softmax_backward_rows(c.assign, dassign);
    Mat<T> dx_assign = assign_.backward_with(dlogits, c.x);
    for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dx_assign.v[i];
    return dx;
  }

  void collect(std::vector<Param<T>*>& out) {
    assign_.collect(out);
    out.push_back(&centers_);
    proj_.collect(out);
  }

  Param<T>& centers() { return centers_; }
  nn::Dense<T>& assignment() { return assign_; }

 private:
  static constexpr T kNormEps = T(1e-12);

  NetVladConfig cfg_;
  nn::Dense<T> assign_;
  Param<T> centers_;
  nn::Dense<T> proj_;
};

}  // namespace mgn::model

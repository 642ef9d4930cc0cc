#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mgn/nn/mat.hpp"
#include "mgn/rng.hpp"

namespace mgn::nn {

enum class Mode { Train, Eval };

/// A learnable tensor and its gradient buffer. Gradients accumulate across
/// backward calls and are consumed (and zeroed) by the optimizer step.
template <typename T>
struct Param {
  std::string name;
  Mat<T> value;
  Mat<T> grad;

  Param() = default;
  Param(std::string n, int rows, int cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}
};

/// Fan-balanced scaled-uniform init, limit +/- sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_init(Mat<T>& w, int fan_in, int fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& x : w.v) x = static_cast<T>(rng.uniform(-limit, limit));
}

template <typename T>
T sigmoid(T o) {
  // Split on sign so neither branch exponentiates a large positive value.
  if (o >= T(0)) return T(1) / (T(1) + std::exp(-o));
  T e = std::exp(o);
  return e / (T(1) + e);
}

template <typename T>
Mat<T> sigmoid(const Mat<T>& x) {
  Mat<T> y(x.rows, x.cols);
  for (size_t i = 0; i < x.v.size(); ++i) y.v[i] = sigmoid(x.v[i]);
  return y;
}

/// Row-wise softmax, stabilized by subtracting the row max (which also makes
/// the output exactly invariant to shifting a row by a constant).
template <typename T>
Mat<T> softmax_rows(const Mat<T>& x) {
  Mat<T> y(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i) {
    auto in = x.row(i);
    auto out = y.row(i);
    T mx = in[0];
    for (T v : in) mx = std::max(mx, v);
    T sum = T(0);
    for (int j = 0; j < x.cols; ++j) {
      out[j] = std::exp(in[j] - mx);
      sum += out[j];
    }
    for (int j = 0; j < x.cols; ++j) out[j] /= sum;
  }
  return y;
}

/// dL/dlogits given the softmax output s and dL/ds, row-wise:
/// d_i = s_i * (ds_i - sum_j s_j ds_j).
template <typename T>
Mat<T> softmax_backward_rows(const Mat<T>& s, const Mat<T>& ds) {
  check_shape(s.same_shape(ds), "softmax_backward: shape mismatch");
  Mat<T> d(s.rows, s.cols);
  for (int i = 0; i < s.rows; ++i) {
    T inner = T(0);
    for (int j = 0; j < s.cols; ++j) inner += s(i, j) * ds(i, j);
    for (int j = 0; j < s.cols; ++j) d(i, j) = s(i, j) * (ds(i, j) - inner);
  }
  return d;
}

/// Bernoulli keep-mask (1 = keep, 0 = drop), one value per cell. Applying it
/// is a plain elementwise product; no inverted rescaling.
template <typename T>
Mat<T> dropout_mask(int rows, int cols, double drop_p, Rng& rng) {
  Mat<T> m(rows, cols, T(1));
  if (drop_p <= 0.0) return m;
  for (auto& x : m.v) x = rng.bernoulli(drop_p) ? T(0) : T(1);
  return m;
}

/// Fully connected layer, y = x W^T + b with W of shape out x in.
/// forward() caches its input for the matching backward(); use apply() +
/// backward_with() when several forwards must stay alive at once.
template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(const std::string& name, int in_dim, int out_dim, Rng& rng)
      : w_(name + ".w", out_dim, in_dim), b_(name + ".b", 1, out_dim) {
    glorot_init(w_.value, in_dim, out_dim, rng);
  }

  int in_dim() const { return w_.value.cols; }
  int out_dim() const { return w_.value.rows; }

  Mat<T> apply(const Mat<T>& x) const {
    check_shape(x.cols == in_dim(), "dense '" + w_.name + "': input dim");
    Mat<T> y = matmul_nt(x, w_.value);
    add_row_inplace(y, b_.value);
    return y;
  }

  Mat<T> forward(const Mat<T>& x) {
    input_ = x;
    return apply(x);
  }

  Mat<T> backward(const Mat<T>& dy) { return backward_with(dy, input_); }

  Mat<T> backward_with(const Mat<T>& dy, const Mat<T>& x) {
    check_shape(dy.cols == out_dim() && dy.rows == x.rows,
                "dense '" + w_.name + "': grad shape");
    Mat<T> dw = matmul_tn(dy, x);
    for (size_t i = 0; i < dw.v.size(); ++i) w_.grad.v[i] += dw.v[i];
    Mat<T> db = colsum(dy);
    for (size_t i = 0; i < db.v.size(); ++i) b_.grad.v[i] += db.v[i];
    return matmul(dy, w_.value);
  }

  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&w_);
    out.push_back(&b_);
  }

  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

 private:
  Param<T> w_, b_;
  Mat<T> input_;
};

template <typename T>
class Relu {
 public:
  Mat<T> forward(const Mat<T>& x) {
    input_ = x;
    Mat<T> y(x.rows, x.cols);
    for (size_t i = 0; i < x.v.size(); ++i)
      y.v[i] = x.v[i] > T(0) ? x.v[i] : T(0);
    return y;
  }

  Mat<T> backward(const Mat<T>& dy) const {
    Mat<T> dx(dy.rows, dy.cols);
    for (size_t i = 0; i < dy.v.size(); ++i)
      dx.v[i] = input_.v[i] > T(0) ? dy.v[i] : T(0);
    return dx;
  }

 private:
  Mat<T> input_;
};

/// Batch normalization over the batch dimension of a B x D input.
/// Train mode normalizes by (biased) batch statistics and folds them into the
/// running estimates; eval mode normalizes by the running estimates.
template <typename T>
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(const std::string& name, int dim, T epsilon = T(1e-5),
            T momentum = T(0.99))
      : gamma_(name + ".gamma", 1, dim),
        beta_(name + ".beta", 1, dim),
        running_mean_(1, dim),
        running_var_(1, dim, T(1)),
        epsilon_(epsilon),
        momentum_(momentum) {
    gamma_.value.fill(T(1));
  }

  int dim() const { return gamma_.value.cols; }

  Mat<T> forward(const Mat<T>& x, Mode mode) {
    check_shape(x.cols == dim(), "batchnorm: input dim");
    mode_ = mode;
    const int b = x.rows, d = x.cols;
    if (mode == Mode::Train) {
      if (b < 2)
        throw InvariantError("batchnorm: train mode needs batch size >= 2");
      mean_ = Mat<T>(1, d);
      var_ = Mat<T>(1, d);
      for (int i = 0; i < b; ++i)
        for (int j = 0; j < d; ++j) mean_.v[j] += x(i, j);
      for (int j = 0; j < d; ++j) mean_.v[j] /= b;
      for (int i = 0; i < b; ++i)
        for (int j = 0; j < d; ++j) {
          T c = x(i, j) - mean_.v[j];
          var_.v[j] += c * c;
        }
      for (int j = 0; j < d; ++j) var_.v[j] /= b;
      for (int j = 0; j < d; ++j) {
        running_mean_.v[j] =
            momentum_ * running_mean_.v[j] + (T(1) - momentum_) * mean_.v[j];
        running_var_.v[j] =
            momentum_ * running_var_.v[j] + (T(1) - momentum_) * var_.v[j];
      }
    } else {
      mean_ = running_mean_;
      var_ = running_var_;
    }

    inv_std_ = Mat<T>(1, d);
    for (int j = 0; j < d; ++j)
      inv_std_.v[j] = T(1) / std::sqrt(var_.v[j] + epsilon_);

    xhat_ = Mat<T>(b, d);
    Mat<T> y(b, d);
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < d; ++j) {
        xhat_(i, j) = (x(i, j) - mean_.v[j]) * inv_std_.v[j];
        y(i, j) = gamma_.value.v[j] * xhat_(i, j) + beta_.value.v[j];
      }
    return y;
  }

  Mat<T> backward(const Mat<T>& dy) {
    check_shape(dy.same_shape(xhat_), "batchnorm: grad shape");
    const int b = dy.rows, d = dy.cols;
    Mat<T> dx(b, d);
    for (int j = 0; j < d; ++j) {
      T sum_dy = T(0), sum_dy_xhat = T(0);
      for (int i = 0; i < b; ++i) {
        sum_dy += dy(i, j);
        sum_dy_xhat += dy(i, j) * xhat_(i, j);
      }
      gamma_.grad.v[j] += sum_dy_xhat;
      beta_.grad.v[j] += sum_dy;
      T g = gamma_.value.v[j] * inv_std_.v[j];
      if (mode_ == Mode::Train) {
        for (int i = 0; i < b; ++i)
          dx(i, j) = g * (dy(i, j) - sum_dy / b - xhat_(i, j) * sum_dy_xhat / b);
      } else {
        for (int i = 0; i < b; ++i) dx(i, j) = g * dy(i, j);
      }
    }
    return dx;
  }

  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

  Mat<T>& running_mean() { return running_mean_; }
  Mat<T>& running_var() { return running_var_; }

 private:
  Param<T> gamma_, beta_;
  Mat<T> running_mean_, running_var_;
  T epsilon_ = T(1e-5);
  T momentum_ = T(0.99);
  Mode mode_ = Mode::Train;
  Mat<T> mean_, var_, inv_std_, xhat_;
};

}  // namespace mgn::nn

#pragma once

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mgn/nn/mat.hpp"
#include "mgn/rng.hpp"

namespace testsupport {

/// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mgn_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Independent Pearson reference: the raw-moment formulation
/// (n*Sxy - Sx*Sy) / sqrt((n*Sxx - Sx^2)(n*Syy - Sy^2)) in long double.
/// Deliberately a different algorithm from the library's centered two-pass.
inline double reference_pearson(std::span<const double> x,
                                std::span<const double> y) {
  const size_t n = x.size();
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  const long double nn = static_cast<long double>(n);
  const long double num = nn * sxy - sx * sy;
  const long double den2 = (nn * sxx - sx * sx) * (nn * syy - sy * sy);
  if (den2 <= 0) return 0.0;
  return static_cast<double>(num / std::sqrt(den2));
}

/// Closed-form ridge regression oracle (normal equations, Gaussian
/// elimination with partial pivoting), fit per output column with centered
/// inputs/targets. Independent of the library's training stack.
class RidgeOracle {
 public:
  /// X: n x d (rows = samples), Y: n x c. lambda scales with n.
  void fit(const mgn::nn::Mat<double>& x, const mgn::nn::Mat<double>& y,
           double lambda = 1e-3) {
    const int n = x.rows, d = x.cols, c = y.cols;
    x_mean_.assign(d, 0.0);
    y_mean_.assign(c, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) x_mean_[j] += x(i, j);
      for (int j = 0; j < c; ++j) y_mean_[j] += y(i, j);
    }
    for (auto& m : x_mean_) m /= n;
    for (auto& m : y_mean_) m /= n;

    std::vector<double> xtx(static_cast<size_t>(d) * d, 0.0);
    std::vector<double> xty(static_cast<size_t>(d) * c, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) {
        const double xj = x(i, j) - x_mean_[j];
        for (int k = j; k < d; ++k)
          xtx[static_cast<size_t>(j) * d + k] += xj * (x(i, k) - x_mean_[k]);
        for (int k = 0; k < c; ++k)
          xty[static_cast<size_t>(j) * c + k] += xj * (y(i, k) - y_mean_[k]);
      }
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < j; ++k)
        xtx[static_cast<size_t>(j) * d + k] =
            xtx[static_cast<size_t>(k) * d + j];
    for (int j = 0; j < d; ++j)
      xtx[static_cast<size_t>(j) * d + j] += lambda * n;

    beta_ = solve(xtx, xty, d, c);
    cols_ = c;
    dims_ = d;
  }

  /// Predicted n x c matrix.
  mgn::nn::Mat<double> predict(const mgn::nn::Mat<double>& x) const {
    mgn::nn::Mat<double> out(x.rows, cols_);
    for (int i = 0; i < x.rows; ++i)
      for (int k = 0; k < cols_; ++k) {
        double acc = y_mean_[k];
        for (int j = 0; j < dims_; ++j)
          acc += (x(i, j) - x_mean_[j]) *
                 beta_[static_cast<size_t>(j) * cols_ + k];
        out(i, k) = acc;
      }
    return out;
  }

 private:
  static std::vector<double> solve(std::vector<double> a,
                                   std::vector<double> b, int d, int c) {
    for (int col = 0; col < d; ++col) {
      int pivot = col;
      for (int r = col + 1; r < d; ++r)
        if (std::abs(a[static_cast<size_t>(r) * d + col]) >
            std::abs(a[static_cast<size_t>(pivot) * d + col]))
          pivot = r;
      if (pivot != col) {
        for (int k = 0; k < d; ++k)
          std::swap(a[static_cast<size_t>(col) * d + k],
                    a[static_cast<size_t>(pivot) * d + k]);
        for (int k = 0; k < c; ++k)
          std::swap(b[static_cast<size_t>(col) * c + k],
                    b[static_cast<size_t>(pivot) * c + k]);
      }
      const double diag = a[static_cast<size_t>(col) * d + col];
      for (int r = col + 1; r < d; ++r) {
        const double f = a[static_cast<size_t>(r) * d + col] / diag;
        if (f == 0.0) continue;
        for (int k = col; k < d; ++k)
          a[static_cast<size_t>(r) * d + k] -=
              f * a[static_cast<size_t>(col) * d + k];
        for (int k = 0; k < c; ++k)
          b[static_cast<size_t>(r) * c + k] -=
              f * b[static_cast<size_t>(col) * c + k];
      }
    }
    std::vector<double> x(static_cast<size_t>(d) * c, 0.0);
    for (int col = d - 1; col >= 0; --col)
      for (int k = 0; k < c; ++k) {
        double acc = b[static_cast<size_t>(col) * c + k];
        for (int j = col + 1; j < d; ++j)
          acc -= a[static_cast<size_t>(col) * d + j] *
                 x[static_cast<size_t>(j) * c + k];
        x[static_cast<size_t>(col) * c + k] =
            acc / a[static_cast<size_t>(col) * d + col];
      }
    return x;
  }

  std::vector<double> beta_, x_mean_, y_mean_;
  int cols_ = 0, dims_ = 0;
};

}  // namespace testsupport

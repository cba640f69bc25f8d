#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gnnserve/types.hpp"

namespace gnnserve {

/// Row-major matrix of 32-bit floats.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  float& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }
  const std::vector<float>& storage() const { return data_; }

  bool operator==(const DenseMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// A·B with 64-bit accumulation.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

/// Running state of a numerically stable softmax denominator:
/// exp_sum is Σ exp(logit − max_logit).
struct LogSumExp {
  double max_logit = 0.0;
  double exp_sum = 0.0;
};

/// Merge stable exp-sum parts onto a common maximum. Parts with exp_sum == 0
/// are identities. Throws on an empty list.
LogSumExp stable_logsumexp_merge(std::span<const LogSumExp> parts);

/// Rescale factor that moves a part onto a new maximum: exp(old − new).
double rescale_factor(double old_max, double new_max);

inline float relu(float x) { return x > 0.0f ? x : 0.0f; }
inline double leaky_relu(double x, double slope = 0.2) { return x > 0.0 ? x : slope * x; }
double softplus(double x);

/// x^(1/n) with the sign of x preserved for odd n.
double signed_root(double x, int n);

}  // namespace gnnserve

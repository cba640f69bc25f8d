#include "gnnserve/dense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gnnserve {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows_ * cols_, "DenseMatrix: data size does not match rows*cols");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0f;
  return m;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (!(a.cols() == b.rows())) throw InvalidArgument("matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()) + ")");
  DenseMatrix out(a.rows(), b.cols());
  std::vector<double> acc(b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    auto arow = a.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = arow[k];
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) acc[j] += aik * static_cast<double>(brow[j]);
    }
    auto orow = out.row(i);
    for (std::size_t j = 0; j < b.cols(); ++j) orow[j] = static_cast<float>(acc[j]);
  }
  return out;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "max_abs_diff: shape mismatch");
  double worst = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = std::abs(static_cast<double>(da[i]) - static_cast<double>(db[i]));
    if (std::isnan(d)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, d);
  }
  return worst;
}

double rescale_factor(double old_max, double new_max) { return std::exp(old_max - new_max); }

LogSumExp stable_logsumexp_merge(std::span<const LogSumExp> parts) {
  require(!parts.empty(), "stable_logsumexp_merge: no parts");
  bool any = false;
  double top = 0.0;
  for (const auto& p : parts) {
    if (p.exp_sum <= 0.0) continue;
    top = any ? std::max(top, p.max_logit) : p.max_logit;
    any = true;
  }
  if (!any) return parts.front();
  LogSumExp out{top, 0.0};
  for (const auto& p : parts) {
    if (p.exp_sum <= 0.0) continue;
    out.exp_sum += p.exp_sum * rescale_factor(p.max_logit, top);
  }
  return out;
}

double softplus(double x) {
  // log(1 + e^x) without overflow for large x.
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double signed_root(double x, int n) {
  if (x == 0.0) return 0.0;
  if (n % 2 == 0) return std::pow(std::max(x, 0.0), 1.0 / n);
  return std::copysign(std::pow(std::abs(x), 1.0 / n), x);
}

}  // namespace gnnserve

#pragma once

// Small expression-friendly statistics kernels shared by the modules.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>

namespace detangle {

inline constexpr double kInvSqrt2Pi = 0.3989422804014327;  // 1/sqrt(2*pi)

/// ceil(alpha * n) guarded against representation error in alpha.
inline std::size_t budget_count(double alpha, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-9));
}

inline double normal_pdf(double x, double mean, double variance) {
  const double z = x - mean;
  return kInvSqrt2Pi / std::sqrt(variance) * std::exp(-0.5 * z * z / variance);
}

inline double normal_log_pdf(double x, double mean, double variance) {
  const double z = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + z * z / variance);
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar hi = v.maxCoeff();
  if (!std::isfinite(hi)) return hi;
  return hi + std::log((v.array() - hi).exp().sum());
}

/// Pearson correlation; zero when either side has no variance.
template <typename DX, typename DY>
typename DX::Scalar pearson(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y) {
  using Scalar = typename DX::Scalar;
  const auto n = static_cast<Scalar>(x.size());
  const auto xc = (x.array() - x.sum() / n).eval();
  const auto yc = (y.array() - y.sum() / n).eval();
  const Scalar sxx = (xc * xc).sum();
  const Scalar syy = (yc * yc).sum();
  if (sxx <= Scalar(0) || syy <= Scalar(0)) return Scalar(0);
  const Scalar r = (xc * yc).sum() / std::sqrt(sxx * syy);
  return std::clamp(r, Scalar(-1), Scalar(1));
}

/// Weighted mean and biased variance. Weights need not be normalized.
template <typename DX, typename DW>
std::pair<typename DX::Scalar, typename DX::Scalar> weighted_moments(
    const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DW>& w) {
  using Scalar = typename DX::Scalar;
  const Scalar total = w.sum();
  const Scalar mean = (w.array() * x.array()).sum() / total;
  const Scalar var = (w.array() * (x.array() - mean).square()).sum() / total;
  return {mean, var};
}

/// (sum w)^2 / sum w^2.
template <typename DW>
typename DW::Scalar effective_sample_size(const Eigen::MatrixBase<DW>& w) {
  using Scalar = typename DW::Scalar;
  const Scalar sq = w.squaredNorm();
  if (sq <= Scalar(0)) return Scalar(0);
  const Scalar s = w.sum();
  return s * s / sq;
}

}  // namespace detangle

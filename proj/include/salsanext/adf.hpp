#pragma once

// Assumed-density-filtering variants of the layer vocabulary. Each activation
// is carried as an independent Gaussian per element (mean, variance).

#include <cmath>

#include "salsanext/layers.hpp"

namespace salsanext {

inline constexpr double kDefaultVarianceFloor = 1e-6;

template <typename Scalar>
struct BasicGaussianTensor {
  BasicTensor<Scalar> mean;
  BasicTensor<Scalar> variance;

  BasicGaussianTensor() = default;
  BasicGaussianTensor(BasicTensor<Scalar> m, BasicTensor<Scalar> v) : mean(std::move(m)), variance(std::move(v)) {
    require_same_shape(mean, variance, "GaussianTensor");
  }

  const Shape& shape() const { return mean.shape(); }
};

using GaussianTensor = BasicGaussianTensor<float>;

namespace adf {

template <typename Scalar>
void require_valid(const BasicGaussianTensor<Scalar>& x) {
  require_same_shape(x.mean, x.variance, "GaussianTensor");
  if ((x.variance.array() < Scalar(0)).any() || !x.variance.array().allFinite())
    throw Error(ErrorCode::InvalidDistribution, "variance must be finite and non-negative");
}

template <typename Scalar>
BasicGaussianTensor<Scalar> floored(BasicGaussianTensor<Scalar> x, double floor) {
  x.variance.array() = x.variance.array().max(static_cast<Scalar>(floor));
  return x;
}

/// Exact for a linear layer with independent inputs: mean through W, variance through W*W.
template <typename Scalar>
BasicGaussianTensor<Scalar> conv2d(const BasicGaussianTensor<Scalar>& x, const Conv2dParams<Scalar>& p,
                                   double floor = kDefaultVarianceFloor) {
  require_valid(x);
  Conv2dParams<Scalar> squared{p.kernel, {}, p.dilation, p.padding};
  squared.kernel.array() = p.kernel.array().square();
  return floored(BasicGaussianTensor<Scalar>{salsanext::conv2d(x.mean, p), salsanext::conv2d(x.variance, squared)},
                 floor);
}

template <typename Scalar>
BasicGaussianTensor<Scalar> avg_pool2(const BasicGaussianTensor<Scalar>& x, double floor = kDefaultVarianceFloor) {
  require_valid(x);
  auto variance = salsanext::avg_pool2(x.variance);
  variance.array() *= Scalar(0.25);
  return floored(BasicGaussianTensor<Scalar>{salsanext::avg_pool2(x.mean), std::move(variance)}, floor);
}

template <typename Scalar>
BasicGaussianTensor<Scalar> pixel_shuffle(const BasicGaussianTensor<Scalar>& x, int ratio) {
  require_valid(x);
  return {salsanext::pixel_shuffle(x.mean, ratio), salsanext::pixel_shuffle(x.variance, ratio)};
}

/// Eval-mode batch norm: affine on the mean, squared scale on the variance.
template <typename Scalar>
BasicGaussianTensor<Scalar> batch_norm(const BasicGaussianTensor<Scalar>& x, const BatchNormParams<Scalar>& p,
                                       double floor = kDefaultVarianceFloor) {
  require_valid(x);
  auto mean = salsanext::batch_norm(x.mean, p, Mode::Eval);
  BasicTensor<Scalar> variance(x.variance.shape());
  const Index plane = x.mean.plane();
  const Index channels = x.mean.channels();
  for (Index n = 0; n < x.mean.batch(); ++n)
    for (Index c = 0; c < channels; ++c) {
      const Scalar s = p.gamma[c] * p.gamma[c] / (p.running_var[c] + p.eps);
      const Index off = (n * channels + c) * plane;
      variance.array().segment(off, plane) = x.variance.array().segment(off, plane) * s;
    }
  return floored(BasicGaussianTensor<Scalar>{std::move(mean), std::move(variance)}, floor);
}

/// First and second moments of max(X, aX) for X ~ N(mu, var).
template <typename Scalar>
std::pair<Scalar, Scalar> leaky_relu_moments(Scalar mu, Scalar var, Scalar slope) {
  const double m = mu, a = slope;
  const double sigma = std::sqrt(std::max<double>(var, 0.0));
  if (sigma == 0.0) {
    const double y = m > 0 ? m : a * m;
    return {static_cast<Scalar>(y), Scalar(0)};
  }
  const double alpha = m / sigma;
  const double pdf = std::exp(-0.5 * alpha * alpha) / std::sqrt(2.0 * M_PI);
  const double cdf = 0.5 * std::erfc(-alpha / std::sqrt(2.0));
  const double second = m * m + sigma * sigma;
  const double pos_first = m * cdf + sigma * pdf;
  const double neg_first = m * (1.0 - cdf) - sigma * pdf;
  const double pos_second = second * cdf + m * sigma * pdf;
  const double neg_second = second * (1.0 - cdf) - m * sigma * pdf;
  const double first = pos_first + a * neg_first;
  const double raw_second = pos_second + a * a * neg_second;
  return {static_cast<Scalar>(first), static_cast<Scalar>(std::max(raw_second - first * first, 0.0))};
}

template <typename Scalar>
BasicGaussianTensor<Scalar> leaky_relu(const BasicGaussianTensor<Scalar>& x, Scalar slope,
                                       double floor = kDefaultVarianceFloor) {
  require_valid(x);
  BasicGaussianTensor<Scalar> y{BasicTensor<Scalar>(x.shape()), BasicTensor<Scalar>(x.shape())};
  for (Index i = 0; i < x.mean.size(); ++i) {
    const auto [m, v] = leaky_relu_moments(x.mean[i], x.variance[i], slope);
    y.mean[i] = m;
    y.variance[i] = v;
  }
  return floored(std::move(y), floor);
}

/// In eval mode dropout is the identity. In train-analysis mode each element
/// is X*B/(1-p) with B ~ Bernoulli(1-p): mean unchanged, variance
/// (v + p*mu^2)/(1-p), i.e. v/(1-p) plus p/(1-p)*mu^2.
template <typename Scalar>
BasicGaussianTensor<Scalar> channel_dropout(const BasicGaussianTensor<Scalar>& x, double rate, Mode mode,
                                            double floor = kDefaultVarianceFloor) {
  require_valid(x);
  if (mode == Mode::Eval || rate == 0.0) return x;
  const Scalar keep = static_cast<Scalar>(1.0 - rate);
  BasicGaussianTensor<Scalar> y = x;
  y.variance.array() = (x.variance.array() + static_cast<Scalar>(rate) * x.mean.array().square()) / keep;
  return floored(std::move(y), floor);
}

/// Mean: softmax of the means. Variance: first-order delta method,
/// Var(s_c) ~= sum_k (ds_c/dz_k)^2 v_k with ds_c/dz_k = s_c (delta_ck - s_k).
/// This is an approximation.
template <typename Scalar>
BasicGaussianTensor<Scalar> softmax(const BasicGaussianTensor<Scalar>& x, double floor = kDefaultVarianceFloor) {
  require_valid(x);
  BasicGaussianTensor<Scalar> y{salsanext::softmax(x.mean), BasicTensor<Scalar>(x.shape())};
  const Index channels = x.mean.channels();
  for (Index n = 0; n < x.mean.batch(); ++n) {
    const auto s = y.mean.sample_matrix(n);
    const auto v = x.variance.sample_matrix(n);
    auto out = y.variance.sample_matrix(n);
    for (Index c = 0; c < channels; ++c) {
      // (s_c (delta_ck - s_k))^2 summed against v_k
      Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> jac = -(s.array().rowwise() * s.row(c).array());
      jac.row(c) += s.row(c).array();
      out.row(c) = (jac.square() * v.array()).colwise().sum().matrix();
    }
  }
  return floored(std::move(y), floor);
}

/// Sum of two independent Gaussians.
template <typename Scalar>
BasicGaussianTensor<Scalar> add(const BasicGaussianTensor<Scalar>& a, const BasicGaussianTensor<Scalar>& b) {
  require_same_shape(a.mean, b.mean, "adf add");
  BasicGaussianTensor<Scalar> y = a;
  y.mean.array() += b.mean.array();
  y.variance.array() += b.variance.array();
  return y;
}

template <typename Scalar>
BasicGaussianTensor<Scalar> concat_channels(const std::vector<const BasicGaussianTensor<Scalar>*>& parts) {
  std::vector<const BasicTensor<Scalar>*> means, variances;
  for (const auto* p : parts) {
    means.push_back(&p->mean);
    variances.push_back(&p->variance);
  }
  return {salsanext::concat_channels(means), salsanext::concat_channels(variances)};
}

}  // namespace adf
}  // namespace salsanext

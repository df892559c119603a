#pragma once

// Layer vocabulary of the range-view network: forward passes and exact
// reverse-mode gradients. Every function is templated on the scalar type so
// gradient oracles can run the same code in double precision.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "salsanext/error.hpp"
#include "salsanext/random.hpp"
#include "salsanext/tensor.hpp"

namespace salsanext {

enum class Mode { Train, Eval };

namespace detail {

inline void require_cache(bool valid, const char* layer) {
  if (!valid)
    throw Error(ErrorCode::StaleState, std::string(layer) + " backward called without a cached forward pass");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d: stride-1 dilated cross-correlation, kernel (C_out, C_in, k, k).

template <typename Scalar>
struct Conv2dParams {
  BasicTensor<Scalar> kernel;
  BasicTensor<Scalar> bias;  // (C_out); empty means no bias
  int dilation = 1;
  int padding = -1;  // -1 selects "same" padding d(k-1)/2

  Index out_channels() const { return kernel.dim(0); }
  Index in_channels() const { return kernel.dim(1); }
  int kernel_size() const { return static_cast<int>(kernel.dim(2)); }
  int resolved_padding() const {
    return padding >= 0 ? padding : dilation * (kernel_size() - 1) / 2;
  }
  int receptive_field() const { return dilation * (kernel_size() - 1) + 1; }
  bool has_bias() const { return !bias.empty(); }
};

template <typename Scalar>
struct Conv2dCache {
  BasicTensor<Scalar> input;
  bool valid = false;
};

template <typename Scalar>
struct Conv2dGrads {
  BasicTensor<Scalar> input;
  BasicTensor<Scalar> kernel;
  BasicTensor<Scalar> bias;
};

namespace detail {

struct ConvGeometry {
  Index in_h, in_w, out_h, out_w;
  int k, d, pad;
};

template <typename Scalar>
ConvGeometry conv_geometry(const BasicTensor<Scalar>& x, const Conv2dParams<Scalar>& p) {
  require_rank4(x, "conv2d");
  if (p.kernel.rank() != 4 || p.kernel.dim(2) != p.kernel.dim(3))
    throw Error(ErrorCode::Dimension, "conv2d kernel must be (C_out, C_in, k, k), got " +
                                          shape_string(p.kernel.shape()));
  if (x.channels() != p.in_channels())
    throw Error(ErrorCode::Dimension, "conv2d channel mismatch: input has " +
                                          std::to_string(x.channels()) + ", kernel expects " +
                                          std::to_string(p.in_channels()));
  if (p.has_bias() && p.bias.size() != p.out_channels())
    throw Error(ErrorCode::Dimension, "conv2d bias length does not match C_out");
  ConvGeometry g{x.height(), x.width(), 0, 0, p.kernel_size(), p.dilation, p.resolved_padding()};
  g.out_h = g.in_h + 2 * g.pad - g.d * (g.k - 1);
  g.out_w = g.in_w + 2 * g.pad - g.d * (g.k - 1);
  if (g.out_h <= 0 || g.out_w <= 0)
    throw Error(ErrorCode::Dimension, "conv2d output would be empty");
  return g;
}

// Rows ordered (c, ky, kx), columns (oy, ox); matches the kernel's row-major layout.
template <typename Scalar>
void im2col(const Scalar* src, Index channels, const ConvGeometry& g, Scalar* cols) {
  const Index out_plane = g.out_h * g.out_w;
  for (Index c = 0; c < channels; ++c) {
    const Scalar* plane = src + c * g.in_h * g.in_w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        Scalar* row = cols + ((c * g.k + ky) * g.k + kx) * out_plane;
        const Index dx = kx * g.d - g.pad;
        const Index ox_lo = std::clamp<Index>(-dx, 0, g.out_w);
        const Index ox_hi = std::clamp<Index>(g.in_w - dx, 0, g.out_w);
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy + ky * g.d - g.pad;
          Scalar* out = row + oy * g.out_w;
          if (iy < 0 || iy >= g.in_h || ox_lo >= ox_hi) {
            std::fill(out, out + g.out_w, Scalar(0));
            continue;
          }
          std::fill(out, out + ox_lo, Scalar(0));
          std::copy(plane + iy * g.in_w + ox_lo + dx, plane + iy * g.in_w + ox_hi + dx, out + ox_lo);
          std::fill(out + ox_hi, out + g.out_w, Scalar(0));
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const Scalar* cols, Index channels, const ConvGeometry& g, Scalar* dst) {
  const Index out_plane = g.out_h * g.out_w;
  for (Index c = 0; c < channels; ++c) {
    Scalar* plane = dst + c * g.in_h * g.in_w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const Scalar* row = cols + ((c * g.k + ky) * g.k + kx) * out_plane;
        const Index dx = kx * g.d - g.pad;
        const Index ox_lo = std::clamp<Index>(-dx, 0, g.out_w);
        const Index ox_hi = std::clamp<Index>(g.in_w - dx, 0, g.out_w);
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy + ky * g.d - g.pad;
          if (iy < 0 || iy >= g.in_h) continue;
          const Scalar* in = row + oy * g.out_w;
          Scalar* out = plane + iy * g.in_w + dx;
          for (Index ox = ox_lo; ox < ox_hi; ++ox) out[ox] += in[ox];
        }
      }
    }
  }
}

template <typename Scalar>
bool is_pointwise(const ConvGeometry& g) {
  return g.k == 1 && g.pad == 0;
}

}  // namespace detail

template <typename Scalar>
BasicTensor<Scalar> conv2d(const BasicTensor<Scalar>& x, const Conv2dParams<Scalar>& p,
                           Conv2dCache<Scalar>* cache = nullptr) {
  using Matrix = typename BasicTensor<Scalar>::RowMatrix;
  const auto g = detail::conv_geometry(x, p);
  const Index cin = p.in_channels();
  const Index cout = p.out_channels();
  auto y = BasicTensor<Scalar>::uninitialized({x.batch(), cout, g.out_h, g.out_w});
  const auto weights = p.kernel.as_matrix(cout);
  Matrix cols;
  if (!detail::is_pointwise<Scalar>(g)) cols.resize(cin * g.k * g.k, g.out_h * g.out_w);
  for (Index n = 0; n < x.batch(); ++n) {
    auto out = y.sample_matrix(n);
    if (detail::is_pointwise<Scalar>(g)) {
      out.noalias() = weights * x.sample_matrix(n);
    } else {
      detail::im2col(x.data() + n * cin * x.plane(), cin, g, cols.data());
      out.noalias() = weights * cols;
    }
    if (p.has_bias()) out.colwise() += p.bias.array().matrix();
  }
  if (cache) {
    cache->input = x;
    cache->valid = true;
  }
  return y;
}

template <typename Scalar>
Conv2dGrads<Scalar> conv2d_backward(const Conv2dParams<Scalar>& p, const BasicTensor<Scalar>& dy,
                                    Conv2dCache<Scalar>& cache) {
  using Matrix = typename BasicTensor<Scalar>::RowMatrix;
  detail::require_cache(cache.valid, "conv2d");
  const BasicTensor<Scalar>& x = cache.input;
  const auto g = detail::conv_geometry(x, p);
  const Index cin = p.in_channels();
  const Index cout = p.out_channels();
  if (dy.rank() != 4 || dy.batch() != x.batch() || dy.channels() != cout ||
      dy.height() != g.out_h || dy.width() != g.out_w)
    throw Error(ErrorCode::Dimension, "conv2d upstream gradient has shape " + shape_string(dy.shape()));

  Conv2dGrads<Scalar> grads{BasicTensor<Scalar>::zeros_like(x),
                            BasicTensor<Scalar>::zeros_like(p.kernel), {}};
  if (p.has_bias()) grads.bias = BasicTensor<Scalar>::zeros_like(p.bias);
  const auto weights = p.kernel.as_matrix(cout);
  auto dweights = grads.kernel.as_matrix(cout);
  const bool pointwise = detail::is_pointwise<Scalar>(g);
  Matrix cols;
  Matrix dcols;
  if (!pointwise) {
    cols.resize(cin * g.k * g.k, g.out_h * g.out_w);
    dcols.resize(cin * g.k * g.k, g.out_h * g.out_w);
  }
  for (Index n = 0; n < x.batch(); ++n) {
    const auto upstream = dy.sample_matrix(n);
    if (pointwise) {
      dweights.noalias() += upstream * x.sample_matrix(n).transpose();
      grads.input.sample_matrix(n).noalias() = weights.transpose() * upstream;
    } else {
      detail::im2col(x.data() + n * cin * x.plane(), cin, g, cols.data());
      dweights.noalias() += upstream * cols.transpose();
      dcols.noalias() = weights.transpose() * upstream;
      detail::col2im(dcols.data(), cin, g, grads.input.data() + n * cin * x.plane());
    }
    if (p.has_bias()) grads.bias.array() += upstream.rowwise().sum().array();
  }
  cache.valid = false;
  cache.input = {};
  return grads;
}

// ---------------------------------------------------------------------------
// batch_norm over (N, H, W) per channel.

template <typename Scalar>
struct BatchNormParams {
  BasicTensor<Scalar> gamma;
  BasicTensor<Scalar> beta;
  BasicTensor<Scalar> running_mean;
  BasicTensor<Scalar> running_var;
  Scalar eps = Scalar(1e-5);
  Scalar momentum = Scalar(0.1);

  static BatchNormParams identity(Index channels) {
    return {BasicTensor<Scalar>({channels}, Scalar(1)), BasicTensor<Scalar>({channels}),
            BasicTensor<Scalar>({channels}), BasicTensor<Scalar>({channels}, Scalar(1))};
  }
  Index channels() const { return gamma.size(); }
};

template <typename Scalar>
struct BatchNormCache {
  BasicTensor<Scalar> normalized;                    // x-hat
  Eigen::Array<Scalar, Eigen::Dynamic, 1> inv_std;   // per channel
  Eigen::Array<Scalar, Eigen::Dynamic, 1> batch_mean;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> batch_var;  // unbiased, for running statistics
  Mode mode = Mode::Eval;
  bool valid = false;
};

template <typename Scalar>
struct BatchNormGrads {
  BasicTensor<Scalar> input;
  BasicTensor<Scalar> gamma;
  BasicTensor<Scalar> beta;
};

template <typename Scalar>
BasicTensor<Scalar> batch_norm(const BasicTensor<Scalar>& x, const BatchNormParams<Scalar>& p,
                               Mode mode, BatchNormCache<Scalar>* cache = nullptr) {
  require_rank4(x, "batch_norm");
  const Index channels = x.channels();
  if (p.channels() != channels)
    throw Error(ErrorCode::Dimension, "batch_norm parameters do not match channel count");
  const Index plane = x.plane();
  const Index count = x.batch() * plane;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> mean(channels), inv_std(channels), unbiased(channels);
  if (mode == Mode::Train) {
    for (Index c = 0; c < channels; ++c) {
      double sum = 0.0;
      for (Index n = 0; n < x.batch(); ++n) sum += x.sample_matrix(n).row(c).template cast<double>().sum();
      const double mu = sum / static_cast<double>(count);
      double sq = 0.0;
      for (Index n = 0; n < x.batch(); ++n)
        sq += (x.sample_matrix(n).row(c).template cast<double>().array() - mu).square().sum();
      const double var = sq / static_cast<double>(count);
      mean[c] = static_cast<Scalar>(mu);
      inv_std[c] = static_cast<Scalar>(1.0 / std::sqrt(var + static_cast<double>(p.eps)));
      unbiased[c] = static_cast<Scalar>(count > 1 ? sq / static_cast<double>(count - 1) : var);
    }
  } else {
    mean = p.running_mean.array();
    inv_std = (p.running_var.array() + p.eps).rsqrt();
    unbiased = p.running_var.array();
  }
  auto normalized = BasicTensor<Scalar>::uninitialized(x.shape());
  auto y = BasicTensor<Scalar>::uninitialized(x.shape());
  for (Index n = 0; n < x.batch(); ++n) {
    for (Index c = 0; c < channels; ++c) {
      const Scalar* src = x.data() + (n * channels + c) * plane;
      Scalar* xh = normalized.data() + (n * channels + c) * plane;
      Scalar* dst = y.data() + (n * channels + c) * plane;
      const Scalar mu = mean[c], is = inv_std[c], ga = p.gamma[c], be = p.beta[c];
      for (Index i = 0; i < plane; ++i) {
        xh[i] = (src[i] - mu) * is;
        dst[i] = ga * xh[i] + be;
      }
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = inv_std;
    cache->batch_mean = mean;
    cache->batch_var = unbiased;
    cache->mode = mode;
    cache->valid = true;
  }
  return y;
}

/// Exponential running-statistic update from the batch statistics of a train-mode pass.
template <typename Scalar>
void update_running_stats(BatchNormParams<Scalar>& p, const BatchNormCache<Scalar>& cache) {
  if (cache.mode != Mode::Train) return;
  p.running_mean.array() = (Scalar(1) - p.momentum) * p.running_mean.array() + p.momentum * cache.batch_mean;
  p.running_var.array() = (Scalar(1) - p.momentum) * p.running_var.array() + p.momentum * cache.batch_var;
}

/// Train-mode batch norm that also advances the running statistics.
template <typename Scalar>
BasicTensor<Scalar> batch_norm_train(const BasicTensor<Scalar>& x, BatchNormParams<Scalar>& p,
                                     BatchNormCache<Scalar>* cache = nullptr) {
  BatchNormCache<Scalar> local;
  BatchNormCache<Scalar>* target = cache ? cache : &local;
  auto y = batch_norm(x, p, Mode::Train, target);
  update_running_stats(p, *target);
  return y;
}

template <typename Scalar>
BatchNormGrads<Scalar> batch_norm_backward(const BatchNormParams<Scalar>& p, const BasicTensor<Scalar>& dy,
                                           BatchNormCache<Scalar>& cache) {
  detail::require_cache(cache.valid, "batch_norm");
  require_same_shape(dy, cache.normalized, "batch_norm backward");
  const Index channels = dy.channels();
  const Index plane = dy.plane();
  const double count = static_cast<double>(dy.batch() * plane);
  BatchNormGrads<Scalar> grads{BasicTensor<Scalar>::uninitialized(dy.shape()), BasicTensor<Scalar>({channels}),
                               BasicTensor<Scalar>({channels})};
  for (Index c = 0; c < channels; ++c) {
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (Index n = 0; n < dy.batch(); ++n) {
      const Scalar* g = dy.data() + (n * channels + c) * plane;
      const Scalar* xh = cache.normalized.data() + (n * channels + c) * plane;
      for (Index i = 0; i < plane; ++i) {
        sum_dy += g[i];
        sum_dy_xh += static_cast<double>(g[i]) * static_cast<double>(xh[i]);
      }
    }
    grads.gamma[c] = static_cast<Scalar>(sum_dy_xh);
    grads.beta[c] = static_cast<Scalar>(sum_dy);
    const Scalar scale = p.gamma[c] * cache.inv_std[c];
    const Scalar mean_dy = static_cast<Scalar>(sum_dy / count);
    const Scalar mean_dy_xh = static_cast<Scalar>(sum_dy_xh / count);
    for (Index n = 0; n < dy.batch(); ++n) {
      const Scalar* g = dy.data() + (n * channels + c) * plane;
      const Scalar* xh = cache.normalized.data() + (n * channels + c) * plane;
      Scalar* dx = grads.input.data() + (n * channels + c) * plane;
      if (cache.mode == Mode::Train) {
        for (Index i = 0; i < plane; ++i) dx[i] = scale * (g[i] - mean_dy - xh[i] * mean_dy_xh);
      } else {
        for (Index i = 0; i < plane; ++i) dx[i] = scale * g[i];
      }
    }
  }
  cache.valid = false;
  cache.normalized = {};
  return grads;
}

// ---------------------------------------------------------------------------
// leaky_relu

template <typename Scalar>
struct ActivationCache {
  BasicTensor<Scalar> value;  // input for leaky_relu, output for softmax
  bool valid = false;
};

template <typename Scalar>
BasicTensor<Scalar> leaky_relu(const BasicTensor<Scalar>& x, Scalar slope,
                               ActivationCache<Scalar>* cache = nullptr) {
  auto y = BasicTensor<Scalar>::uninitialized(x.shape());
  y.array() = (x.array() > Scalar(0)).select(x.array(), slope * x.array());
  if (cache) {
    cache->value = x;
    cache->valid = true;
  }
  return y;
}

template <typename Scalar>
BasicTensor<Scalar> leaky_relu_backward(Scalar slope, const BasicTensor<Scalar>& dy,
                                        ActivationCache<Scalar>& cache) {
  detail::require_cache(cache.valid, "leaky_relu");
  require_same_shape(dy, cache.value, "leaky_relu backward");
  auto dx = BasicTensor<Scalar>::uninitialized(dy.shape());
  dx.array() = (cache.value.array() > Scalar(0)).select(dy.array(), slope * dy.array());
  cache.valid = false;
  cache.value = {};
  return dx;
}

// ---------------------------------------------------------------------------
// avg_pool: 2x2 window, stride 2. Odd extents are padded by replicating the
// last row/column, so the output is ceil(H/2) x ceil(W/2).

struct PoolCache {
  Shape input_shape;
  bool valid = false;
};

template <typename Scalar>
BasicTensor<Scalar> avg_pool2(const BasicTensor<Scalar>& x, PoolCache* cache = nullptr) {
  require_rank4(x, "avg_pool");
  const Index h = x.height(), w = x.width();
  const Index oh = (h + 1) / 2, ow = (w + 1) / 2;
  auto y = BasicTensor<Scalar>::uninitialized({x.batch(), x.channels(), oh, ow});
  for (Index nc = 0; nc < x.batch() * x.channels(); ++nc) {
    const Scalar* src = x.data() + nc * h * w;
    Scalar* dst = y.data() + nc * oh * ow;
    for (Index oy = 0; oy < oh; ++oy) {
      const Index y0 = 2 * oy, y1 = std::min(2 * oy + 1, h - 1);
      for (Index ox = 0; ox < ow; ++ox) {
        const Index x0 = 2 * ox, x1 = std::min(2 * ox + 1, w - 1);
        dst[oy * ow + ox] = Scalar(0.25) * (src[y0 * w + x0] + src[y0 * w + x1] +
                                             src[y1 * w + x0] + src[y1 * w + x1]);
      }
    }
  }
  if (cache) {
    cache->input_shape = x.shape();
    cache->valid = true;
  }
  return y;
}

template <typename Scalar>
BasicTensor<Scalar> avg_pool2_backward(const BasicTensor<Scalar>& dy, PoolCache& cache) {
  detail::require_cache(cache.valid, "avg_pool");
  BasicTensor<Scalar> dx(cache.input_shape);
  const Index h = dx.height(), w = dx.width();
  const Index oh = (h + 1) / 2, ow = (w + 1) / 2;
  if (dy.rank() != 4 || dy.height() != oh || dy.width() != ow || dy.channels() != dx.channels() ||
      dy.batch() != dx.batch())
    throw Error(ErrorCode::Dimension, "avg_pool upstream gradient has shape " + shape_string(dy.shape()));
  for (Index nc = 0; nc < dx.batch() * dx.channels(); ++nc) {
    const Scalar* src = dy.data() + nc * oh * ow;
    Scalar* dst = dx.data() + nc * h * w;
    for (Index oy = 0; oy < oh; ++oy) {
      const Index y0 = 2 * oy, y1 = std::min(2 * oy + 1, h - 1);
      for (Index ox = 0; ox < ow; ++ox) {
        const Index x0 = 2 * ox, x1 = std::min(2 * ox + 1, w - 1);
        const Scalar g = Scalar(0.25) * src[oy * ow + ox];
        dst[y0 * w + x0] += g;
        dst[y0 * w + x1] += g;
        dst[y1 * w + x0] += g;
        dst[y1 * w + x1] += g;
      }
    }
  }
  cache.valid = false;
  return dx;
}

// ---------------------------------------------------------------------------
// pixel_shuffle: (N, C r^2, H, W) -> (N, C, H r, W r) with
// out(n, c, h r + i, w r + j) = in(n, c r^2 + i r + j, h, w).

template <typename Scalar>
BasicTensor<Scalar> pixel_shuffle(const BasicTensor<Scalar>& x, int ratio) {
  require_rank4(x, "pixel_shuffle");
  const Index r = ratio, r2 = Index(ratio) * ratio;
  if (ratio < 1 || x.channels() % r2 != 0)
    throw Error(ErrorCode::Dimension, "pixel_shuffle: " + std::to_string(x.channels()) +
                                          " channels not divisible by r^2 = " + std::to_string(r2));
  const Index c_out = x.channels() / r2, h = x.height(), w = x.width();
  auto y = BasicTensor<Scalar>::uninitialized({x.batch(), c_out, h * r, w * r});
  for (Index n = 0; n < x.batch(); ++n)
    for (Index c = 0; c < c_out; ++c)
      for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < r; ++j) {
          const Scalar* src = &x(n, c * r2 + i * r + j, 0, 0);
          for (Index yy = 0; yy < h; ++yy) {
            Scalar* dst = &y(n, c, yy * r + i, j);
            for (Index xx = 0; xx < w; ++xx) dst[xx * r] = src[yy * w + xx];
          }
        }
  return y;
}

/// Inverse of pixel_shuffle (space-to-depth); also its adjoint.
template <typename Scalar>
BasicTensor<Scalar> space_to_depth(const BasicTensor<Scalar>& y, int ratio) {
  require_rank4(y, "space_to_depth");
  const Index r = ratio, r2 = Index(ratio) * ratio;
  if (ratio < 1 || y.height() % r != 0 || y.width() % r != 0)
    throw Error(ErrorCode::Dimension, "space_to_depth: spatial extent not divisible by ratio");
  const Index c_in = y.channels(), h = y.height() / r, w = y.width() / r;
  auto x = BasicTensor<Scalar>::uninitialized({y.batch(), c_in * r2, h, w});
  for (Index n = 0; n < y.batch(); ++n)
    for (Index c = 0; c < c_in; ++c)
      for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < r; ++j) {
          Scalar* dst = &x(n, c * r2 + i * r + j, 0, 0);
          for (Index yy = 0; yy < h; ++yy) {
            const Scalar* src = &y(n, c, yy * r + i, j);
            for (Index xx = 0; xx < w; ++xx) dst[yy * w + xx] = src[xx * r];
          }
        }
  return x;
}

template <typename Scalar>
BasicTensor<Scalar> pixel_shuffle_backward(const BasicTensor<Scalar>& dy, int ratio) {
  return space_to_depth(dy, ratio);
}

// ---------------------------------------------------------------------------
// channel_dropout: whole (n, c) planes are zeroed with probability p and the
// survivors scaled by 1/(1-p). Eval mode is the identity.

template <typename Scalar>
struct DropoutCache {
  Eigen::Array<Scalar, Eigen::Dynamic, 1> scale;  // per (n, c)
  bool valid = false;
};

template <typename Scalar>
BasicTensor<Scalar> channel_dropout(const BasicTensor<Scalar>& x, double rate, std::uint64_t seed,
                                    Mode mode, DropoutCache<Scalar>* cache = nullptr) {
  require_rank4(x, "channel_dropout");
  if (!(rate >= 0.0 && rate < 1.0))
    throw Error(ErrorCode::Config, "dropout rate must lie in [0, 1)");
  const Index planes = x.batch() * x.channels();
  Eigen::Array<Scalar, Eigen::Dynamic, 1> scale = Eigen::Array<Scalar, Eigen::Dynamic, 1>::Ones(planes);
  if (mode == Mode::Train && rate > 0.0) {
    Rng rng(seed);
    const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - rate));
    for (Index i = 0; i < planes; ++i) scale[i] = rng.bernoulli(rate) ? Scalar(0) : keep_scale;
  }
  auto y = BasicTensor<Scalar>::uninitialized(x.shape());
  const Index plane = x.plane();
  for (Index i = 0; i < planes; ++i)
    y.array().segment(i * plane, plane) = x.array().segment(i * plane, plane) * scale[i];
  if (cache) {
    cache->scale = std::move(scale);
    cache->valid = true;
  }
  return y;
}

template <typename Scalar>
BasicTensor<Scalar> channel_dropout_backward(const BasicTensor<Scalar>& dy, DropoutCache<Scalar>& cache) {
  detail::require_cache(cache.valid, "channel_dropout");
  require_rank4(dy, "channel_dropout backward");
  if (cache.scale.size() != dy.batch() * dy.channels())
    throw Error(ErrorCode::Dimension, "channel_dropout upstream gradient does not match the cached mask");
  auto dx = BasicTensor<Scalar>::uninitialized(dy.shape());
  const Index plane = dy.plane();
  for (Index i = 0; i < cache.scale.size(); ++i)
    dx.array().segment(i * plane, plane) = dy.array().segment(i * plane, plane) * cache.scale[i];
  cache.valid = false;
  return dx;
}

// ---------------------------------------------------------------------------
// softmax over the channel axis of an NCHW tensor.

template <typename Scalar>
BasicTensor<Scalar> softmax(const BasicTensor<Scalar>& x, ActivationCache<Scalar>* cache = nullptr) {
  require_rank4(x, "softmax");
  auto y = BasicTensor<Scalar>::uninitialized(x.shape());
  const Index channels = x.channels();
  for (Index n = 0; n < x.batch(); ++n) {
    const auto in = x.sample_matrix(n);
    auto out = y.sample_matrix(n);
    const auto peak = in.colwise().maxCoeff();
    out = (in.rowwise() - peak).array().exp().matrix();
    const auto total = out.colwise().sum().eval();
    for (Index c = 0; c < channels; ++c) out.row(c).array() /= total.array();
  }
  if (cache) {
    cache->value = y;
    cache->valid = true;
  }
  return y;
}

template <typename Scalar>
BasicTensor<Scalar> softmax_backward(const BasicTensor<Scalar>& dy, ActivationCache<Scalar>& cache) {
  detail::require_cache(cache.valid, "softmax");
  require_same_shape(dy, cache.value, "softmax backward");
  auto dx = BasicTensor<Scalar>::uninitialized(dy.shape());
  for (Index n = 0; n < dy.batch(); ++n) {
    const auto s = cache.value.sample_matrix(n);
    const auto g = dy.sample_matrix(n);
    const auto inner = (s.array() * g.array()).colwise().sum().eval();
    dx.sample_matrix(n).array() = s.array() * (g.array().rowwise() - inner);
  }
  cache.valid = false;
  cache.value = {};
  return dx;
}

// ---------------------------------------------------------------------------
// Channel concatenation and its adjoint.

template <typename Scalar>
BasicTensor<Scalar> concat_channels(const std::vector<const BasicTensor<Scalar>*>& parts) {
  if (parts.empty()) throw Error(ErrorCode::Dimension, "concat of zero tensors");
  const auto& first = *parts.front();
  require_rank4(first, "concat");
  Index channels = 0;
  for (const auto* p : parts) {
    require_rank4(*p, "concat");
    if (p->batch() != first.batch() || p->height() != first.height() || p->width() != first.width())
      throw Error(ErrorCode::Dimension, "concat: " + shape_string(p->shape()) + " vs " +
                                            shape_string(first.shape()));
    channels += p->channels();
  }
  auto y = BasicTensor<Scalar>::uninitialized({first.batch(), channels, first.height(), first.width()});
  const Index plane = first.plane();
  for (Index n = 0; n < first.batch(); ++n) {
    Index offset = 0;
    for (const auto* p : parts) {
      const Index len = p->channels() * plane;
      std::copy(p->data() + n * len, p->data() + (n + 1) * len, y.data() + (n * channels) * plane + offset);
      offset += len;
    }
  }
  return y;
}

template <typename Scalar>
std::vector<BasicTensor<Scalar>> split_channels(const BasicTensor<Scalar>& y, const std::vector<Index>& sizes) {
  require_rank4(y, "split");
  Index total = 0;
  for (Index s : sizes) total += s;
  if (total != y.channels()) throw Error(ErrorCode::Dimension, "split sizes do not sum to channel count");
  std::vector<BasicTensor<Scalar>> parts;
  const Index plane = y.plane();
  for (Index s : sizes) parts.emplace_back(Shape{y.batch(), s, y.height(), y.width()});
  for (Index n = 0; n < y.batch(); ++n) {
    Index offset = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      const Index len = sizes[i] * plane;
      const Scalar* src = y.data() + n * total * plane + offset;
      std::copy(src, src + len, parts[i].data() + n * len);
      offset += len;
    }
  }
  return parts;
}

}  // namespace salsanext

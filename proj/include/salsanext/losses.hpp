#pragma once

// Losses over class probabilities. Inputs are either (C, P) or (N, C, H, W);
// pixel p of an NCHW tensor is n*H*W + h*W + w. Gradients are with respect
// to the probabilities; the softmax backward is applied by the caller.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "salsanext/pointcloud.hpp"
#include "salsanext/tensor.hpp"

namespace salsanext {

inline constexpr double kLogClamp = 1e-12;

template <typename Scalar>
struct LossTerm {
  double value = 0.0;
  BasicTensor<Scalar> gradient;
  std::vector<double> per_class;  // Lovasz only; NaN for classes absent from the ground truth
};

template <typename Scalar>
struct BasicLossValue {
  double total = 0.0;
  double wce = 0.0;
  double lovasz = 0.0;
  BasicTensor<Scalar> gradient;
};

using LossValue = BasicLossValue<float>;

namespace detail {

/// Class/pixel addressing shared by (C, P) and (N, C, H, W) layouts.
struct ProbLayout {
  Index classes = 0, pixels = 0, plane = 0;

  template <typename Scalar>
  static ProbLayout of(const BasicTensor<Scalar>& probs) {
    if (probs.rank() == 2) return {probs.dim(0), probs.dim(1), probs.dim(1)};
    if (probs.rank() == 4) return {probs.channels(), probs.batch() * probs.plane(), probs.plane()};
    throw Error(ErrorCode::Dimension, "loss expects (C, P) or (N, C, H, W) probabilities, got " +
                                          shape_string(probs.shape()));
  }
  Index offset(Index c, Index p) const { return ((p / plane) * classes + c) * plane + p % plane; }
};

inline void check_inputs(const ProbLayout& l, std::span<const ClassId> targets, std::span<const std::uint8_t> valid) {
  if (static_cast<Index>(targets.size()) != l.pixels)
    throw Error(ErrorCode::Dimension, "loss got " + std::to_string(targets.size()) + " targets for " +
                                          std::to_string(l.pixels) + " pixels");
  if (!valid.empty() && static_cast<Index>(valid.size()) != l.pixels)
    throw Error(ErrorCode::Dimension, "valid mask length does not match the pixel count");
  Index count = 0;
  for (Index p = 0; p < l.pixels; ++p) {
    if (!valid.empty() && !valid[static_cast<std::size_t>(p)]) continue;
    ++count;
    if (targets[static_cast<std::size_t>(p)] >= static_cast<ClassId>(l.classes))
      throw Error(ErrorCode::InvalidTarget, "target " + std::to_string(targets[static_cast<std::size_t>(p)]) +
                                                " is not below " + std::to_string(l.classes) + " classes");
  }
  if (count == 0) throw Error(ErrorCode::EmptyBatch, "loss has no valid pixels");
}

inline bool is_valid(std::span<const std::uint8_t> valid, Index p) {
  return valid.empty() || valid[static_cast<std::size_t>(p)] != 0;
}

}  // namespace detail

/// Mean over valid pixels of alpha[target] * -log(max(p_target, 1e-12)).
/// An empty mask means every pixel is valid.
template <typename Scalar>
LossTerm<Scalar> weighted_cross_entropy(const BasicTensor<Scalar>& probs, std::span<const ClassId> targets,
                                        std::span<const double> weights, std::span<const std::uint8_t> valid = {}) {
  const auto l = detail::ProbLayout::of(probs);
  detail::check_inputs(l, targets, valid);
  if (static_cast<Index>(weights.size()) != l.classes)
    throw Error(ErrorCode::Dimension, "need one class weight per class");
  LossTerm<Scalar> out{0.0, BasicTensor<Scalar>::zeros_like(probs), {}};
  Index count = 0;
  for (Index p = 0; p < l.pixels; ++p) count += detail::is_valid(valid, p);
  const double inv_count = 1.0 / static_cast<double>(count);
  double sum = 0.0;
  for (Index p = 0; p < l.pixels; ++p) {
    if (!detail::is_valid(valid, p)) continue;
    const ClassId t = targets[static_cast<std::size_t>(p)];
    const Index at = l.offset(static_cast<Index>(t), p);
    const double prob = probs[at];
    const double alpha = weights[t];
    if (prob > kLogClamp) {
      sum += alpha * -std::log(prob);
      out.gradient[at] = static_cast<Scalar>(-alpha * inv_count / prob);
    } else {
      sum += alpha * -std::log(kLogClamp);
    }
  }
  out.value = sum * inv_count;
  return out;
}

template <typename Scalar>
LossTerm<Scalar> weighted_cross_entropy(const BasicTensor<Scalar>& probs, std::span<const ClassId> targets,
                                        const ClassWeights& weights, std::span<const std::uint8_t> valid = {}) {
  return weighted_cross_entropy(probs, targets, std::span<const double>(weights.weights), valid);
}

/// Gradient of the Lovasz extension of the Jaccard loss for a ground-truth
/// indicator already sorted by descending error.
inline std::vector<double> lovasz_grad(std::span<const std::uint8_t> sorted_fg) {
  const double gts = static_cast<double>(std::count(sorted_fg.begin(), sorted_fg.end(), std::uint8_t{1}));
  std::vector<double> jaccard(sorted_fg.size());
  double cum_fg = 0.0, cum_bg = 0.0;
  for (std::size_t k = 0; k < sorted_fg.size(); ++k) {
    cum_fg += sorted_fg[k];
    cum_bg += 1 - sorted_fg[k];
    const double intersection = gts - cum_fg;
    const double uni = gts + cum_bg;
    jaccard[k] = 1.0 - intersection / uni;
  }
  for (std::size_t k = jaccard.size(); k-- > 1;) jaccard[k] -= jaccard[k - 1];
  return jaccard;
}

/// Lovasz-Softmax averaged over classes present among the valid targets.
/// Sort ties break by pixel index, which fixes the subgradient at ties.
template <typename Scalar>
LossTerm<Scalar> lovasz_softmax(const BasicTensor<Scalar>& probs, std::span<const ClassId> targets,
                                std::span<const std::uint8_t> valid = {}) {
  const auto l = detail::ProbLayout::of(probs);
  detail::check_inputs(l, targets, valid);
  LossTerm<Scalar> out{0.0, BasicTensor<Scalar>::zeros_like(probs),
                       std::vector<double>(static_cast<std::size_t>(l.classes), std::nan(""))};
  std::vector<Index> pixels;
  for (Index p = 0; p < l.pixels; ++p)
    if (detail::is_valid(valid, p)) pixels.push_back(p);
  const std::size_t n = pixels.size();

  std::vector<bool> present(static_cast<std::size_t>(l.classes), false);
  for (Index p : pixels) present[targets[static_cast<std::size_t>(p)]] = true;
  const auto num_present = std::count(present.begin(), present.end(), true);

  std::vector<double> errors(n);
  std::vector<std::uint8_t> fg(n), sorted_fg(n);
  std::vector<std::size_t> order(n);
  std::vector<double> class_grad(n);
  for (Index c = 0; c < l.classes; ++c) {
    if (!present[static_cast<std::size_t>(c)]) continue;
    for (std::size_t i = 0; i < n; ++i) {
      fg[i] = targets[static_cast<std::size_t>(pixels[i])] == static_cast<ClassId>(c);
      errors[i] = std::abs(static_cast<double>(fg[i]) - static_cast<double>(probs[l.offset(c, pixels[i])]));
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return errors[a] != errors[b] ? errors[a] > errors[b] : a < b;
    });
    for (std::size_t k = 0; k < n; ++k) sorted_fg[k] = fg[order[k]];
    const auto g = lovasz_grad(sorted_fg);
    double value = 0.0;
    for (std::size_t k = 0; k < n; ++k) value += errors[order[k]] * g[k];
    out.per_class[static_cast<std::size_t>(c)] = value;
    out.value += value;
    const double scale = 1.0 / static_cast<double>(num_present);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = order[k];
      // d|fg - p| / dp = -1 on foreground, +1 on background.
      const double sign = fg[i] ? -1.0 : 1.0;
      out.gradient[l.offset(c, pixels[i])] += static_cast<Scalar>(sign * g[k] * scale);
    }
  }
  out.value /= static_cast<double>(num_present);
  return out;
}

template <typename Scalar>
BasicLossValue<Scalar> total_loss(const BasicTensor<Scalar>& probs, std::span<const ClassId> targets,
                                  std::span<const double> weights, std::span<const std::uint8_t> valid = {}) {
  auto wce = weighted_cross_entropy(probs, targets, weights, valid);
  auto ls = lovasz_softmax(probs, targets, valid);
  BasicLossValue<Scalar> out;
  out.wce = wce.value;
  out.lovasz = ls.value;
  out.total = out.wce + out.lovasz;
  out.gradient = std::move(wce.gradient);
  out.gradient.array() += ls.gradient.array();
  return out;
}

template <typename Scalar>
BasicLossValue<Scalar> total_loss(const BasicTensor<Scalar>& probs, std::span<const ClassId> targets,
                                  const ClassWeights& weights, std::span<const std::uint8_t> valid = {}) {
  return total_loss(probs, targets, std::span<const double>(weights.weights), valid);
}

}  // namespace salsanext

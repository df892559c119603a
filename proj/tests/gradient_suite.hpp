#pragma once

// Finite-difference checks of every layer backward and of the composed loss,
// run in double precision. Each check returns the worst normwise relative
// error seen over its random instances.

#include <string>
#include <vector>

#include "oracles.hpp"
#include "salsanext/layers.hpp"
#include "salsanext/losses.hpp"

namespace gradsuite {

using namespace salsanext;
using oracle::dot;
using oracle::finite_difference;
using oracle::random_tensor;
using oracle::relative_error;

struct Result {
  std::string name;
  int instances = 0;
  double worst = 0.0;
};

inline constexpr double kStep = 1e-3;
inline const Shape kInput{2, 3, 4, 4};

/// Pushes entries away from zero so |x| >= margin (no kink inside the FD stencil).
inline void away_from_zero(TensorD& x, double margin) {
  for (Index i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) < margin) x[i] = x[i] < 0 ? -margin - std::abs(x[i]) : margin + std::abs(x[i]);
}

inline Result conv2d_check(int instances, std::uint64_t seed) {
  Result r{"conv2d", instances, 0.0};
  Rng rng(seed);
  for (int it = 0; it < instances; ++it) {
    const int k = it % 3 == 0 ? 1 : 3;
    const int d = k == 1 ? 1 : 1 + static_cast<int>(rng.below(3));
    const Index cout = 1 + static_cast<Index>(rng.below(4));
    Conv2dParams<double> p{random_tensor(rng, {cout, 3, k, k}), random_tensor(rng, {cout}), d, -1};
    if (it % 5 == 4) p.padding = 0;
    TensorD x = random_tensor(rng, kInput);
    if (p.padding == 0 && d * (k - 1) >= 4) p.padding = -1;
    const TensorD probe = conv2d(x, p);
    const TensorD u = random_tensor(rng, probe.shape());
    Conv2dCache<double> cache;
    conv2d(x, p, &cache);
    const auto g = conv2d_backward(p, u, cache);
    auto f = [&] { return dot(conv2d(x, p), u); };
    r.worst = std::max({r.worst, relative_error(g.input, finite_difference(f, x, kStep)),
                        relative_error(g.kernel, finite_difference(f, p.kernel, kStep)),
                        relative_error(g.bias, finite_difference(f, p.bias, kStep))});
  }
  return r;
}

inline Result batch_norm_check(Mode mode, int instances, std::uint64_t seed) {
  Result r{mode == Mode::Train ? "batch_norm (train)" : "batch_norm (eval)", instances, 0.0};
  Rng rng(seed);
  for (int it = 0; it < instances; ++it) {
    auto p = BatchNormParams<double>::identity(3);
    p.gamma = random_tensor(rng, {3}, 0.5, 1.5);
    p.beta = random_tensor(rng, {3});
    p.running_mean = random_tensor(rng, {3});
    p.running_var = random_tensor(rng, {3}, 0.5, 2.0);
    TensorD x = random_tensor(rng, kInput, -2.0, 2.0);
    const TensorD u = random_tensor(rng, kInput);
    BatchNormCache<double> cache;
    batch_norm(x, p, mode, &cache);
    const auto g = batch_norm_backward(p, u, cache);
    auto f = [&] { return dot(batch_norm(x, p, mode), u); };
    r.worst = std::max({r.worst, relative_error(g.input, finite_difference(f, x, kStep)),
                        relative_error(g.gamma, finite_difference(f, p.gamma, kStep)),
                        relative_error(g.beta, finite_difference(f, p.beta, kStep))});
  }
  return r;
}

inline Result leaky_relu_check(int instances, std::uint64_t seed) {
  Result r{"leaky_relu", instances, 0.0};
  Rng rng(seed);
  for (int it = 0; it < instances; ++it) {
    const double slope = it % 4 == 0 ? 0.01 : rng.uniform(0.0, 1.0);
    TensorD x = random_tensor(rng, kInput);
    away_from_zero(x, 4 * kStep);
    const TensorD u = random_tensor(rng, kInput);
    ActivationCache<double> cache;
    leaky_relu(x, slope, &cache);
    const auto g = leaky_relu_backward(slope, u, cache);
    auto f = [&] { return dot(leaky_relu(x, slope), u); };
    r.worst = std::max(r.worst, relative_error(g, finite_difference(f, x, kStep)));
  }
  return r;
}

inline Result avg_pool_check(int instances, std::uint64_t seed) {
  Result r{"avg_pool", instances, 0.0};
  Rng rng(seed);
  for (int it = 0; it < instances; ++it) {
    TensorD x = random_tensor(rng, it % 2 ? kInput : Shape{2, 3, 5, 3});  // odd extents exercise replication
    const TensorD u = random_tensor(rng, avg_pool2(x).shape());
    PoolCache cache;
    avg_pool2(x, &cache);
    const auto g = avg_pool2_backward(u, cache);
    auto f = [&] { return dot(avg_pool2(x), u); };
    r.worst = std::max(r.worst, relative_error(g, finite_difference(f, x, kStep)));
  }
  return r;
}

inline Result pixel_shuffle_check(int instances, std::uint64_t seed) {
  Result r{"pixel_shuffle", instances, 0.0};
  Rng rng(seed);
  for (int it = 0; it < instances; ++it) {
    TensorD x = random_tensor(rng, {2, 12, 4, 4});
    const TensorD u = random_tensor(rng, {2, 3, 8, 8});
    const auto g = pixel_shuffle_backward(u, 2);
    auto f = [&] { return dot(pixel_shuffle(x, 2), u); };
    r.worst = std::max(r.worst, relative_error(g, finite_difference(f, x, kStep)));
  }
  return r;
}

inline Result dropout_check(int instances, std::uint64_t seed) {
  Result r{"channel_dropout", instances, 0.0};
  Rng rng(seed);
  for (int it = 0; it < instances; ++it) {
    const double rate = rng.uniform(0.0, 0.8);
    const std::uint64_t mask_seed = rng.next();
    TensorD x = random_tensor(rng, kInput);
    const TensorD u = random_tensor(rng, kInput);
    DropoutCache<double> cache;
    channel_dropout(x, rate, mask_seed, Mode::Train, &cache);
    const auto g = channel_dropout_backward(u, cache);
    auto f = [&] { return dot(channel_dropout(x, rate, mask_seed, Mode::Train), u); };
    r.worst = std::max(r.worst, relative_error(g, finite_difference(f, x, kStep)));
  }
  return r;
}

inline Result softmax_check(int instances, std::uint64_t seed) {
  Result r{"softmax", instances, 0.0};
  Rng rng(seed);
  for (int it = 0; it < instances; ++it) {
    TensorD x = random_tensor(rng, kInput, -3.0, 3.0);
    const TensorD u = random_tensor(rng, kInput);
    ActivationCache<double> cache;
    softmax(x, &cache);
    const auto g = softmax_backward(u, cache);
    auto f = [&] { return dot(softmax(x), u); };
    r.worst = std::max(r.worst, relative_error(g, finite_difference(f, x, kStep)));
  }
  return r;
}

inline Result concat_check(int instances, std::uint64_t seed) {
  Result r{"concat", instances, 0.0};
  Rng rng(seed);
  for (int it = 0; it < instances; ++it) {
    TensorD a = random_tensor(rng, kInput), b = random_tensor(rng, {2, 2, 4, 4});
    const TensorD u = random_tensor(rng, {2, 5, 4, 4});
    const auto parts = split_channels(u, {3, 2});
    auto f = [&] { return dot(concat_channels<double>({&a, &b}), u); };
    r.worst = std::max({r.worst, relative_error(parts[0], finite_difference(f, a, kStep)),
                        relative_error(parts[1], finite_difference(f, b, kStep))});
  }
  return r;
}

/// conv -> leaky -> batch norm (train), the network's unit.
inline Result composition_check(int instances, std::uint64_t seed) {
  Result r{"conv+leaky+batch_norm", instances, 0.0};
  Rng rng(seed);
  for (int it = 0; it < instances; ++it) {
    Conv2dParams<double> p{random_tensor(rng, {3, 3, 3, 3}), random_tensor(rng, {3}), 1 + int(rng.below(2)), -1};
    auto bn = BatchNormParams<double>::identity(3);
    bn.gamma = random_tensor(rng, {3}, 0.5, 1.5);
    bn.beta = random_tensor(rng, {3});
    TensorD x = random_tensor(rng, kInput);
    const TensorD u = random_tensor(rng, kInput);
    auto f = [&] { return dot(batch_norm(leaky_relu(conv2d(x, p), 0.1), bn, Mode::Train), u); };
    Conv2dCache<double> cc;
    ActivationCache<double> ac;
    BatchNormCache<double> bc;
    const auto pre = conv2d(x, p, &cc);
    // Skip instances with a pre-activation inside the FD stencil of the kink.
    if ((pre.array().abs() < 1e-2).any()) {
      --it;
      continue;
    }
    batch_norm(leaky_relu(pre, 0.1, &ac), bn, Mode::Train, &bc);
    const auto gb = batch_norm_backward(bn, u, bc);
    const auto ga = leaky_relu_backward(0.1, gb.input, ac);
    const auto gc = conv2d_backward(p, ga, cc);
    r.worst = std::max({r.worst, relative_error(gc.input, finite_difference(f, x, kStep)),
                        relative_error(gc.kernel, finite_difference(f, p.kernel, kStep)),
                        relative_error(gb.gamma, finite_difference(f, bn.gamma, kStep))});
  }
  return r;
}

/// Random (C, P) probabilities whose per-class Lovasz errors are separated by
/// more than the stencil, so no sort order changes inside it. Entries stay
/// above ~0.1 so the O(h^2) truncation of -log p is negligible at h = 1e-3.
inline TensorD separated_probabilities(Rng& rng, Index classes, Index pixels, const std::vector<ClassId>& targets,
                                       double margin) {
  for (;;) {
    TensorD p = random_tensor(rng, {classes, pixels}, 0.3, 1.0);
    for (Index i = 0; i < pixels; ++i) {
      double s = 0;
      for (Index c = 0; c < classes; ++c) s += p[c * pixels + i];
      for (Index c = 0; c < classes; ++c) p[c * pixels + i] /= s;
    }
    bool ok = true;
    for (Index c = 0; c < classes && ok; ++c) {
      std::vector<double> e;
      for (Index i = 0; i < pixels; ++i) e.push_back(std::abs((targets[i] == ClassId(c)) - p[c * pixels + i]));
      std::sort(e.begin(), e.end());
      for (std::size_t k = 1; k < e.size(); ++k) ok = ok && e[k] - e[k - 1] > margin;
    }
    if (ok) return p;
  }
}

/// d(wce + lovasz)/d(probabilities) on 3 classes x 8 pixels.
inline Result total_loss_check(int instances, std::uint64_t seed) {
  Result r{"total loss", instances, 0.0};
  Rng rng(seed);
  for (int it = 0; it < instances; ++it) {
    std::vector<ClassId> t(8);
    for (auto& c : t) c = static_cast<ClassId>(rng.below(3));
    const std::vector<double> w{rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0)};
    TensorD p = separated_probabilities(rng, 3, 8, t, 4 * kStep);
    const auto loss = total_loss(p, t, w);
    auto f = [&] { return total_loss(p, t, w).total; };
    r.worst = std::max(r.worst, relative_error(loss.gradient, finite_difference(f, p, kStep)));
  }
  return r;
}

/// Loss composed with softmax, differentiated with respect to logits.
inline Result softmax_loss_check(int instances, std::uint64_t seed) {
  Result r{"softmax + total loss", instances, 0.0};
  Rng rng(seed);
  for (int it = 0; it < instances; ++it) {
    std::vector<ClassId> t(8);
    for (auto& c : t) c = static_cast<ClassId>(rng.below(3));
    const std::vector<double> w{1.0, 0.7, 1.3};
    TensorD logits = random_tensor(rng, {1, 3, 2, 4}, -2.0, 2.0);
    auto probs_of = [&] { return softmax(logits); };
    // Reject instances whose Lovasz errors nearly tie.
    const TensorD probs = probs_of();
    bool ok = true;
    for (Index c = 0; c < 3 && ok; ++c) {
      std::vector<double> e;
      for (Index i = 0; i < 8; ++i) e.push_back(std::abs((t[i] == ClassId(c)) - probs[c * 8 + i]));
      std::sort(e.begin(), e.end());
      for (std::size_t k = 1; k < e.size(); ++k) ok = ok && e[k] - e[k - 1] > 1e-2;
    }
    if (!ok) {
      --it;
      continue;
    }
    ActivationCache<double> cache;
    const auto pr = softmax(logits, &cache);
    const auto loss = total_loss(pr, t, w);
    const auto g = softmax_backward(loss.gradient, cache);
    auto f = [&] { return total_loss(probs_of(), t, w).total; };
    r.worst = std::max(r.worst, relative_error(g, finite_difference(f, logits, kStep)));
  }
  return r;
}

inline std::vector<Result> run_all(int instances = 100, std::uint64_t seed = 2024) {
  return {conv2d_check(instances, seed + 1),
          batch_norm_check(Mode::Train, instances, seed + 2),
          batch_norm_check(Mode::Eval, instances, seed + 3),
          leaky_relu_check(instances, seed + 4),
          avg_pool_check(instances, seed + 5),
          pixel_shuffle_check(instances, seed + 6),
          dropout_check(instances, seed + 7),
          softmax_check(instances, seed + 8),
          concat_check(instances, seed + 9),
          composition_check(instances, seed + 10),
          total_loss_check(instances, seed + 11),
          softmax_loss_check(instances, seed + 12)};
}

}  // namespace gradsuite

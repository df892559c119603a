#include "doctest.h"
#include "oracles.hpp"
#include "salsanext/adf.hpp"

using namespace salsanext;
using oracle::random_tensor;

namespace {

using G = BasicGaussianTensor<double>;

/// Linear chain avg_pool -> conv(3x3, d=2) -> pixel_shuffle -> batch_norm(eval). Each stage sees
/// independent inputs, so a diagonal Gaussian carries the exact output variance.
struct LinearNet {
  Conv2dParams<double> a;
  BatchNormParams<double> bn = BatchNormParams<double>::identity(2);

  TensorD forward(const TensorD& x) const { return batch_norm(pixel_shuffle(conv2d(avg_pool2(x), a), 2), bn, Mode::Eval); }
  G forward(const G& x) const {
    return adf::batch_norm(adf::pixel_shuffle(adf::conv2d(adf::avg_pool2(x, 0.0), a, 0.0), 2), bn, 0.0);
  }
};

LinearNet make_net(Rng& rng) {
  LinearNet net{{random_tensor(rng, {8, 2, 3, 3}), random_tensor(rng, {8}), 2, -1}};
  net.bn.gamma = random_tensor(rng, {2});
  net.bn.beta = random_tensor(rng, {2});
  net.bn.running_mean = random_tensor(rng, {2});
  net.bn.running_var = random_tensor(rng, {2}, 0.5, 2.0);
  return net;
}

}  // namespace

TEST_CASE("linear ADF examples") {
  const G x{TensorD({1, 1, 1, 1}, 1.0), TensorD({1, 1, 1, 1}, 1.0)};
  const auto id = adf::conv2d(x, Conv2dParams<double>{TensorD({1, 1, 1, 1}, 1.0), {}, 1, -1});
  CHECK(id.mean[0] == 1.0);
  CHECK(id.variance[0] == 1.0);
  const auto twice = adf::conv2d(x, Conv2dParams<double>{TensorD({1, 1, 1, 1}, 2.0), {}, 1, -1});
  CHECK(twice.mean[0] == 2.0);
  CHECK(twice.variance[0] == 4.0);

  const G bad{TensorD({1, 1, 1, 1}), TensorD({1, 1, 1, 1}, -1.0)};
  try {
    adf::leaky_relu(bad, 0.1);
    FAIL("expected invalid-distribution");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidDistribution);
  }

  // Floor applies after every layer.
  const G zero{TensorD({1, 1, 2, 2}), TensorD({1, 1, 2, 2})};
  CHECK((adf::avg_pool2(zero).variance.array() == 1e-6).all());
}

TEST_CASE("ReLU-limit moments against closed form and Monte Carlo") {
  const auto [m, v] = adf::leaky_relu_moments<double>(0.0, 1.0, 0.0);
  CHECK(m == doctest::Approx(1.0 / std::sqrt(2 * M_PI)).epsilon(1e-12));
  CHECK(v == doctest::Approx(0.5 - 1.0 / (2 * M_PI)).epsilon(1e-12));

  Rng rng(10);
  for (auto [mu, var, a] : {std::tuple{0.0, 1.0, 0.0}, std::tuple{0.7, 0.3, 0.1}, std::tuple{-1.2, 2.0, 0.01}}) {
    const int n = 1000000;
    std::vector<double> ys(n);
    double s = 0;
    for (auto& y : ys) {
      const double xx = mu + std::sqrt(var) * rng.normal();
      y = xx > 0 ? xx : a * xx;
      s += y;
    }
    const double mc_mean = s / n;
    double c2 = 0, c4 = 0;
    for (double y : ys) {
      const double d = (y - mc_mean) * (y - mc_mean);
      c2 += d / n;
      c4 += d * d / n;
    }
    const double mc_var = c2;
    const auto [am, av] = adf::leaky_relu_moments<double>(mu, var, a);
    CHECK(std::abs(am - mc_mean) < 4 * std::sqrt(mc_var / n));
    CHECK(std::abs(av - mc_var) < 4 * std::sqrt((c4 - c2 * c2) / n));
  }
}

TEST_CASE("linear network propagation is exact") {
  Rng rng(11);
  for (int it = 0; it < 5; ++it) {
    const auto net = make_net(rng);
    const TensorD mean = random_tensor(rng, {1, 2, 8, 12});
    const TensorD var = random_tensor(rng, {1, 2, 8, 12}, 0.0, 2.0);
    const G out = net.forward(G{mean, var});

    // Closed form: Var(y_i) = sum_j A_ij^2 v_j with A recovered column by column
    // from the bias-free network applied to unit vectors.
    const TensorD offset = net.forward(TensorD::zeros_like(mean));
    TensorD expected = TensorD::zeros_like(out.variance);
    for (Index j = 0; j < mean.size(); ++j) {
      TensorD e = TensorD::zeros_like(mean);
      e[j] = 1.0;
      const TensorD col = net.forward(e);
      expected.array() += (col.array() - offset.array()).square() * var[j];
    }
    CHECK((out.mean.array() - net.forward(mean).array()).abs().maxCoeff() < 1e-12);
    const double rel = ((out.variance.array() - expected.array()).abs() / expected.array().max(1e-300)).maxCoeff();
    CHECK(rel < 1e-5);
  }
}

TEST_CASE("linear network variance matches Monte Carlo within 3 standard errors") {
  Rng rng(12);
  const auto net = make_net(rng);
  const TensorD mean = random_tensor(rng, {1, 2, 8, 8});
  const TensorD var = random_tensor(rng, {1, 2, 8, 8}, 0.1, 1.0);
  const G out = net.forward(G{mean, var});
  const int n = 100000;
  TensorD s = TensorD::zeros_like(out.mean), s2 = TensorD::zeros_like(out.mean);
  TensorD x = mean;
  for (int t = 0; t < n; ++t) {
    for (Index j = 0; j < x.size(); ++j) x[j] = mean[j] + std::sqrt(var[j]) * rng.normal();
    const TensorD y = net.forward(x);
    s.array() += y.array();
    s2.array() += y.array().square();
  }
  int outside = 0;
  for (Index i = 0; i < s.size(); ++i) {
    const double m = s[i] / n, v = (s2[i] - n * m * m) / (n - 1);
    const double se = v * std::sqrt(2.0 / (n - 1));
    outside += std::abs(v - out.variance[i]) > 3 * se;
  }
  // 3 SE is a per-entry 99.7% band; allow the binomial tail.
  CHECK(outside <= std::max<int>(2, static_cast<int>(0.01 * s.size())));
}

TEST_CASE("batch norm, dropout and softmax ADF") {
  auto p = BatchNormParams<double>::identity(1);
  p.gamma[0] = 3.0;
  p.beta[0] = 1.0;
  p.running_mean[0] = 2.0;
  p.running_var[0] = 4.0;
  const G x{TensorD({1, 1, 1, 1}, 4.0), TensorD({1, 1, 1, 1}, 0.5)};
  const auto y = adf::batch_norm(x, p);
  CHECK(y.mean[0] == doctest::Approx(3.0 * 2.0 / std::sqrt(4.0 + 1e-5) + 1.0));
  CHECK(y.variance[0] == doctest::Approx(0.5 * 9.0 / (4.0 + 1e-5)));

  const auto eval = adf::channel_dropout(x, 0.3, Mode::Eval);
  CHECK(eval.mean == x.mean);
  CHECK(eval.variance == x.variance);
  const auto train = adf::channel_dropout(x, 0.3, Mode::Train);
  CHECK(train.mean[0] == 4.0);
  // X B/(1-p): Var = (v + mu^2)/(1-p) - mu^2
  CHECK(train.variance[0] == doctest::Approx((0.5 + 16.0) / 0.7 - 16.0));

  // Softmax delta method: small input variance, compare with Monte Carlo.
  Rng rng(13);
  const TensorD logits = random_tensor(rng, {1, 3, 1, 1});
  const G s = adf::softmax(G{logits, TensorD({1, 3, 1, 1}, 1e-4)});
  const int n = 200000;
  std::array<double, 3> m{}, m2{};
  for (int t = 0; t < n; ++t) {
    TensorD z = logits;
    for (int c = 0; c < 3; ++c) z[c] += 1e-2 * rng.normal();
    const auto p2 = softmax(z);
    for (int c = 0; c < 3; ++c) {
      m[c] += p2[c] / n;
      m2[c] += p2[c] * p2[c] / n;
    }
  }
  for (int c = 0; c < 3; ++c) CHECK(s.variance[c] == doctest::Approx(m2[c] - m[c] * m[c]).epsilon(0.05));
}

#include "doctest.h"
#include "oracles.hpp"
#include "salsanext/uncertainty.hpp"

using namespace salsanext;

namespace {

Tensor random_input(Rng& rng, Index h, Index w) {
  Tensor x({1, 5, h, w});
  for (Index i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.uniform(0.5, 15.0));
  return x;
}

/// Direct evaluation of sum_valid 0.5 log s + sum_c (y_c - yhat_c)^2 / (2 s).
double objective_oracle(const Tensor& mean, const Tensor& epi, const Tensor& ale, const std::vector<ClassId>& labels,
                        const std::vector<std::uint8_t>& valid) {
  const Index classes = mean.shape()[1], plane = mean.shape()[2] * mean.shape()[3];
  double total = 0;
  for (Index p = 0; p < plane; ++p) {
    if (!valid[p]) continue;
    const double s = std::max(double(epi[p]) + double(ale[p]), 1e-6);
    double r = 0;
    for (Index c = 0; c < classes; ++c) {
      const double y = labels[p] == c ? 1.0 : 0.0;
      r += (y - mean[c * plane + p]) * (y - mean[c * plane + p]);
    }
    total += 0.5 * std::log(s) + r / (2 * s);
  }
  return total;
}

}  // namespace

TEST_CASE("epistemic examples") {
  Tensor a({1, 2, 1, 1}), b({1, 2, 1, 1});
  a[0] = 0.4f;
  a[1] = 0.6f;
  b[0] = 0.6f;
  b[1] = 0.4f;
  const std::vector<Tensor> trials{a, b};
  const auto [mean, var] = epistemic_from_trials(trials);
  CHECK(mean[0] == doctest::Approx(0.5));
  // 0.01 per class, summed over the two classes.
  CHECK(var[0] == doctest::Approx(0.02).epsilon(1e-6));
  const std::vector<Tensor> one{a};
  CHECK(epistemic_from_trials(one).second[0] == 0.0f);

  const Model m = build_model(ModelConfig::micro(4), 30);
  Rng rng(31);
  const Tensor x = random_input(rng, 16, 32);
  const auto n1 = mc_dropout_infer(m, x, 1, 5);
  CHECK(n1.epistemic.shape() == Shape{1, 1, 16, 32});
  CHECK((n1.epistemic.array() == 0.0f).all());
  const auto p0 = mc_dropout_infer(m, x, 8, 5, 0.0);
  CHECK((p0.epistemic.array() == 0.0f).all());
  const auto u = mc_dropout_infer(m, x, 8, 5);
  CHECK((u.epistemic.array() >= 0.0f).all());
  CHECK(u.epistemic.array().maxCoeff() > 0.0f);
  CHECK(u.n_trials == 8);
  const auto again = mc_dropout_infer(m, x, 8, 5);
  CHECK(again.epistemic == u.epistemic);
  for (Index p = 0; p < 16 * 32; p += 31) {
    double s = 0;
    for (Index c = 0; c < 4; ++c) s += u.mean_prediction[c * 16 * 32 + p];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
  }
  try {
    mc_dropout_infer(m, x, 0, 5);
    FAIL("expected invalid-trials");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidTrials);
  }

  // Trial order does not matter.
  std::vector<Tensor> samples;
  for (int i = 0; i < 6; ++i) samples.push_back(forward(m, x, ForwardOptions::mc_dropout(derive_seed(5, i))));
  const auto fwd = epistemic_from_trials(samples).second;
  std::reverse(samples.begin(), samples.end());
  const auto rev = epistemic_from_trials(samples).second;
  CHECK((fwd.array() - rev.array()).abs().maxCoeff() < 1e-6f);
}

TEST_CASE("aleatoric maps") {
  const Model m = build_model(ModelConfig::micro(4), 30);
  Rng rng(32);
  const Tensor x = random_input(rng, 16, 32);
  const auto quiet = adf_infer(m, x, SensorNoiseModel{});
  const auto noisy = adf_infer(m, x, SensorNoiseModel{{0.01, 0.01, 0.01, 0.001, 0.01}});
  CHECK(quiet.aleatoric.shape() == Shape{1, 1, 16, 32});
  CHECK((noisy.aleatoric.array() >= 0.0f).all());
  CHECK(noisy.aleatoric.array().mean() > quiet.aleatoric.array().mean());
  // ADF mean follows the deterministic forward closely at small noise.
  const Tensor det = forward(m, x);
  CHECK((quiet.mean_prediction.array() - det.array()).abs().maxCoeff() < 1e-3f);

  CHECK(SensorNoiseModel::parse("x=0.1\nrange=0.2\n").variance[4] == 0.2);
  CHECK_THROWS_AS(SensorNoiseModel::parse("x=-1\n"), Error);
  CHECK_THROWS_AS(SensorNoiseModel::parse("colour=1\n"), Error);
}

TEST_CASE("rate selection and objective") {
  CHECK(select_rate(std::vector<double>{0.1, 0.2}, std::vector<double>{5.0, 3.0}) == 1);
  CHECK(select_rate(std::vector<double>{0.1, 0.2}, std::vector<double>{3.0, 3.0}) == 0);
  CHECK(select_rate(std::vector<double>{0.3, 0.1}, std::vector<double>{3.0, 3.0}) == 1);
  CHECK_THROWS_AS(select_rate(std::vector<double>{}, std::vector<double>{}), Error);

  const auto grid = log_rate_grid();
  REQUIRE(grid.size() == 20);
  CHECK(grid.front() == doctest::Approx(0.01));
  CHECK(grid.back() == doctest::Approx(0.5));
  CHECK(grid[1] / grid[0] == doctest::Approx(grid[19] / grid[18]));

  const Model m = build_model(ModelConfig::micro(4), 30);
  Rng rng(33);
  CalibrationSample s{random_input(rng, 16, 32), std::vector<ClassId>(16 * 32), std::vector<std::uint8_t>(16 * 32, 1)};
  for (auto& l : s.labels) l = static_cast<ClassId>(rng.below(4));
  s.valid[3] = 0;
  const std::vector<CalibrationSample> calib{s};
  const SensorNoiseModel noise{{0.01, 0.01, 0.01, 0.001, 0.01}};
  const auto single = grid_search_dropout_rate(m, calib, std::vector<double>{0.2}, noise, 4, 1);
  CHECK(single.selected_rate == 0.2);
  CHECK_THROWS_AS(grid_search_dropout_rate(m, calib, std::vector<double>{}, noise, 4, 1), Error);
  CHECK_THROWS_AS(grid_search_dropout_rate(m, calib, std::vector<double>{1.0}, noise, 4, 1), Error);

  // Objective against the direct sum, for each rate the search evaluated.
  const std::vector<double> rates{0.05, 0.2, 0.5};
  const auto result = grid_search_dropout_rate(m, calib, rates, noise, 4, 1);
  const auto ale = adf_infer(m, s.input, noise);
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const auto mc = mc_dropout_infer(m, s.input, 4, derive_seed(1, 0), rates[i]);
    const double direct = objective_oracle(mc.mean_prediction, mc.epistemic, ale.aleatoric, s.labels, s.valid);
    CHECK(dropout_objective(mc.mean_prediction, mc.epistemic, ale.aleatoric, s.labels, s.valid) ==
          doctest::Approx(direct).epsilon(1e-9));
    CHECK(result.objectives[i] == doctest::Approx(direct).epsilon(1e-6));
  }
}

TEST_CASE("matched injected variance wins the grid") {
  // Residuals are built so that |onehot - yhat|^2 equals the 0.2-rate predictive
  // variance at every pixel; 0.5 log s + r / 2s is minimized at s = r pixelwise.
  const Model m = build_model(ModelConfig::micro(4), 34);
  Rng rng(35);
  const Tensor x = random_input(rng, 16, 32);
  const std::vector<double> rates{0.05, 0.2, 0.5};
  std::vector<Tensor> epi;
  for (double r : rates) epi.push_back(mc_dropout_infer(m, x, 16, 7, r).epistemic);
  const Index plane = 16 * 32;
  Tensor mean({1, 2, 16, 32});
  std::vector<ClassId> labels(plane, 0);
  const std::vector<std::uint8_t> valid(plane, 1);
  for (Index p = 0; p < plane; ++p) {
    const double target = std::max<double>(epi[1][p], 1e-6);
    const double q = std::sqrt(target / 2.0);
    REQUIRE(q < 1.0);
    mean[p] = static_cast<float>(1.0 - q);
    mean[plane + p] = static_cast<float>(q);
  }
  const Tensor zero({1, 1, 16, 32});
  std::vector<double> objectives;
  for (const auto& e : epi) objectives.push_back(objective_oracle(mean, e, zero, labels, valid));
  CHECK(objectives[1] < objectives[0]);
  CHECK(objectives[1] < objectives[2]);
  std::vector<double> library;
  for (const auto& e : epi) library.push_back(dropout_objective(mean, e, zero, labels, valid));
  CHECK(select_rate(rates, library) == 1);
}

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salsanext/model.hpp"
#include "salsanext/pointcloud.hpp"

namespace salsanext {

/// Per-channel input variance (x, y, z, intensity, range) in squared physical units.
struct SensorNoiseModel {
  std::array<double, 5> variance{};

  void validate() const;
  /// key=value text with keys x, y, z, intensity, range (missing keys are 0).
  static SensorNoiseModel parse(const std::string& text);
  static SensorNoiseModel load(const std::string& path);
};

/// Maps are (N, 1, H, W); mean_prediction is (N, C, H, W).
struct UncertaintyMap {
  Tensor epistemic;
  Tensor aleatoric;
  Tensor mean_prediction;
  int n_trials = 0;
};

/// Mean and per-pixel sum over classes of the population variance of a set of
/// probability tensors. Accumulates in double (Welford).
std::pair<Tensor, Tensor> epistemic_from_trials(std::span<const Tensor> trials);

/// n forward passes with running statistics and dropout active; trial i uses
/// derive_seed(seed, i). `rate` overrides the configured dropout rate.
UncertaintyMap mc_dropout_infer(const Model& model, const Tensor& input, int n_trials, std::uint64_t seed,
                                std::optional<double> rate = std::nullopt);

/// Gaussian input (x, noise) with zero variance on empty pixels, propagated by
/// adf_forward; aleatoric = per-pixel sum over classes of the output variance.
UncertaintyMap adf_infer(const Model& model, const Tensor& input, const SensorNoiseModel& noise,
                         double variance_floor = kDefaultVarianceFloor);

struct CalibrationSample {
  Tensor input;                      // (1, 5, H, W)
  std::vector<ClassId> labels;       // H*W
  std::vector<std::uint8_t> valid;   // H*W
};

inline constexpr double kTotalVarianceFloor = 1e-6;

/// Sum over valid pixels of 0.5 log(s) + |onehot(y) - yhat|^2 / (2 s), s = max(epistemic + aleatoric, 1e-6).
double dropout_objective(const Tensor& mean_prediction, const Tensor& epistemic, const Tensor& aleatoric,
                         std::span<const ClassId> labels, std::span<const std::uint8_t> valid);

/// Index of the smallest objective; ties go to the smaller rate.
std::size_t select_rate(std::span<const double> rates, std::span<const double> objectives);

struct GridSearchResult {
  double selected_rate = 0.0;
  std::vector<double> rates;
  std::vector<double> objectives;
};

/// Post-hoc search over candidate rates on an already trained model.
GridSearchResult grid_search_dropout_rate(const Model& model, std::span<const CalibrationSample> calibration,
                                          std::span<const double> rates, const SensorNoiseModel& noise, int n_trials,
                                          std::uint64_t seed);

/// `count` log-spaced rates in [lo, hi].
std::vector<double> log_rate_grid(double lo = 0.01, double hi = 0.5, int count = 20);

}  // namespace salsanext

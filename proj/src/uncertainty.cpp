#include "salsanext/uncertainty.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "salsanext/config.hpp"
#include "salsanext/random.hpp"

namespace salsanext {

void SensorNoiseModel::validate() const {
  for (double v : variance)
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidDistribution, "sensor noise variances must be finite and >= 0");
}

SensorNoiseModel SensorNoiseModel::parse(const std::string& text) {
  const auto kv = KeyValueConfig::parse(text);
  static const char* names[5] = {"x", "y", "z", "intensity", "range"};
  SensorNoiseModel m;
  for (int c = 0; c < 5; ++c) m.variance[static_cast<std::size_t>(c)] = kv.get_double(names[c], 0.0);
  kv.reject_unknown({"x", "y", "z", "intensity", "range"});
  m.validate();
  return m;
}

SensorNoiseModel SensorNoiseModel::load(const std::string& path) { return parse(read_text_file(path)); }

std::pair<Tensor, Tensor> epistemic_from_trials(std::span<const Tensor> trials) {
  if (trials.empty()) throw Error(ErrorCode::InvalidTrials, "need at least one trial");
  const Tensor& first = trials.front();
  require_rank4(first, "trial probabilities");
  Eigen::ArrayXd mean = Eigen::ArrayXd::Zero(first.size());
  Eigen::ArrayXd m2 = Eigen::ArrayXd::Zero(first.size());
  double count = 0.0;
  for (const Tensor& t : trials) {
    require_same_shape(first, t, "MC trial");
    count += 1.0;
    const Eigen::ArrayXd x = t.array().cast<double>();
    const Eigen::ArrayXd delta = x - mean;
    mean += delta / count;
    m2 += delta * (x - mean);
  }
  const Index n = first.batch(), c = first.channels(), plane = first.plane();
  Tensor mean_t(first.shape(), mean.cast<float>().eval());
  Tensor epistemic({n, 1, first.height(), first.width()});
  for (Index s = 0; s < n; ++s) {
    Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(plane);
    for (Index k = 0; k < c; ++k) acc += m2.segment((s * c + k) * plane, plane);
    epistemic.array().segment(s * plane, plane) = (acc / count).cast<float>();
  }
  return {std::move(mean_t), std::move(epistemic)};
}

UncertaintyMap mc_dropout_infer(const Model& model, const Tensor& input, int n_trials, std::uint64_t seed,
                                std::optional<double> rate) {
  if (n_trials < 1) throw Error(ErrorCode::InvalidTrials, "MC dropout needs n >= 1 trials");
  std::vector<Tensor> trials;
  trials.reserve(static_cast<std::size_t>(n_trials));
  for (int i = 0; i < n_trials; ++i)
    trials.push_back(forward(model, input, ForwardOptions::mc_dropout(derive_seed(seed, static_cast<std::uint64_t>(i)), rate)));
  auto [mean, epistemic] = epistemic_from_trials(trials);
  UncertaintyMap out;
  out.aleatoric = Tensor::zeros_like(epistemic);
  out.epistemic = std::move(epistemic);
  out.mean_prediction = std::move(mean);
  out.n_trials = n_trials;
  return out;
}

UncertaintyMap adf_infer(const Model& model, const Tensor& input, const SensorNoiseModel& noise, double variance_floor) {
  noise.validate();
  require_rank4(input, "ADF input");
  if (input.channels() != 5) throw Error(ErrorCode::Dimension, "ADF sensor noise needs a 5-channel input");
  const Index n = input.batch(), plane = input.plane();
  Tensor variance(input.shape());
  for (Index s = 0; s < n; ++s) {
    const float* range = input.data() + (s * 5 + 4) * plane;
    for (Index c = 0; c < 5; ++c) {
      float* dst = variance.data() + (s * 5 + c) * plane;
      const float v = static_cast<float>(noise.variance[static_cast<std::size_t>(c)]);
      for (Index i = 0; i < plane; ++i) dst[i] = range[i] < 0.f ? 0.f : v;
    }
  }
  const GaussianTensor out = adf_forward(model, GaussianTensor{input, std::move(variance)}, variance_floor);
  UncertaintyMap map;
  map.aleatoric = Tensor({n, 1, input.height(), input.width()});
  for (Index s = 0; s < n; ++s)
    map.aleatoric.array().segment(s * plane, plane) = out.variance.sample_matrix(s).colwise().sum().transpose().array();
  map.epistemic = Tensor::zeros_like(map.aleatoric);
  map.mean_prediction = out.mean;
  return map;
}

double dropout_objective(const Tensor& mean_prediction, const Tensor& epistemic, const Tensor& aleatoric,
                         std::span<const ClassId> labels, std::span<const std::uint8_t> valid) {
  require_rank4(mean_prediction, "mean prediction");
  require_same_shape(epistemic, aleatoric, "uncertainty maps");
  const Index n = mean_prediction.batch(), c = mean_prediction.channels(), plane = mean_prediction.plane();
  if (epistemic.size() != n * plane || static_cast<Index>(labels.size()) != n * plane ||
      static_cast<Index>(valid.size()) != n * plane)
    throw Error(ErrorCode::Dimension, "objective inputs disagree in pixel count");
  double sum = 0.0;
  for (Index s = 0; s < n; ++s)
    for (Index p = 0; p < plane; ++p) {
      const Index at = s * plane + p;
      if (!valid[static_cast<std::size_t>(at)]) continue;
      const ClassId y = labels[static_cast<std::size_t>(at)];
      if (y >= static_cast<ClassId>(c)) throw Error(ErrorCode::InvalidTarget, "calibration label out of range");
      const double tot = std::max(static_cast<double>(epistemic[at]) + static_cast<double>(aleatoric[at]), kTotalVarianceFloor);
      double sq = 0.0;
      for (Index k = 0; k < c; ++k) {
        const double r = (static_cast<ClassId>(k) == y ? 1.0 : 0.0) - mean_prediction[(s * c + k) * plane + p];
        sq += r * r;
      }
      sum += 0.5 * std::log(tot) + sq / (2.0 * tot);
    }
  return sum;
}

std::size_t select_rate(std::span<const double> rates, std::span<const double> objectives) {
  if (rates.empty()) throw Error(ErrorCode::EmptyCandidates, "no candidate dropout rates");
  if (rates.size() != objectives.size()) throw Error(ErrorCode::LengthMismatch, "one objective per rate required");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rates.size(); ++i)
    if (objectives[i] < objectives[best] || (objectives[i] == objectives[best] && rates[i] < rates[best])) best = i;
  return best;
}

GridSearchResult grid_search_dropout_rate(const Model& model, std::span<const CalibrationSample> calibration,
                                          std::span<const double> rates, const SensorNoiseModel& noise, int n_trials,
                                          std::uint64_t seed) {
  if (rates.empty()) throw Error(ErrorCode::EmptyCandidates, "no candidate dropout rates");
  if (calibration.empty()) throw Error(ErrorCode::EmptyDataset, "grid search needs calibration samples");
  for (double r : rates)
    if (!(r > 0.0 && r < 1.0)) throw Error(ErrorCode::Config, "candidate dropout rates must lie in (0, 1)");
  // ADF runs in eval mode, so the aleatoric part does not depend on the candidate.
  std::vector<Tensor> aleatoric;
  for (const auto& sample : calibration) aleatoric.push_back(adf_infer(model, sample.input, noise).aleatoric);
  GridSearchResult out;
  out.rates.assign(rates.begin(), rates.end());
  for (double rate : rates) {
    double objective = 0.0;
    for (std::size_t i = 0; i < calibration.size(); ++i) {
      const auto& sample = calibration[i];
      const auto mc = mc_dropout_infer(model, sample.input, n_trials, derive_seed(seed, i), rate);
      objective += dropout_objective(mc.mean_prediction, mc.epistemic, aleatoric[i], sample.labels, sample.valid);
    }
    out.objectives.push_back(objective);
  }
  out.selected_rate = out.rates[select_rate(out.rates, out.objectives)];
  return out;
}

std::vector<double> log_rate_grid(double lo, double hi, int count) {
  if (!(lo > 0.0 && hi < 1.0 && lo <= hi) || count < 1) throw Error(ErrorCode::Config, "invalid rate grid");
  std::vector<double> out;
  if (count == 1) return {lo};
  for (int i = 0; i < count; ++i) out.push_back(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (count - 1)));
  return out;
}

}  // namespace salsanext

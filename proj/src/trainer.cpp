#include "salsanext/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "salsanext/config.hpp"
#include "salsanext/metrics.hpp"
#include "salsanext/random.hpp"

namespace salsanext {

void TrainConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::Config, "train config: " + why); };
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) fail("lr_decay must lie in (0, 1]");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be non-negative");
  if (batch_size < 1) fail("batch_size must be positive");
  if (epochs < 0) fail("epochs must be non-negative");
}

TrainConfig TrainConfig::parse(const std::string& text) {
  const auto kv = KeyValueConfig::parse(text);
  TrainConfig c;
  c.learning_rate = kv.get_double("learning_rate", c.learning_rate);
  c.lr_decay = kv.get_double("lr_decay", c.lr_decay);
  c.momentum = kv.get_double("momentum", c.momentum);
  c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
  c.batch_size = kv.get_int("batch_size", c.batch_size);
  c.epochs = kv.get_int("epochs", c.epochs);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<int>(c.seed)));
  c.augment = kv.get_bool("augment", c.augment);
  c.normalize_class_weights = kv.get_bool("normalize_class_weights", c.normalize_class_weights);
  auto& a = c.augmentation;
  a.rotate_probability = kv.get_double("augment_rotate_probability", a.rotate_probability);
  a.translate_probability = kv.get_double("augment_translate_probability", a.translate_probability);
  a.flip_probability = kv.get_double("augment_flip_probability", a.flip_probability);
  a.drop_probability = kv.get_double("augment_drop_probability", a.drop_probability);
  a.translation_max = kv.get_double("augment_translation_max", a.translation_max);
  a.drop_fraction_max = kv.get_double("augment_drop_fraction_max", a.drop_fraction_max);
  kv.reject_unknown({"learning_rate", "lr_decay", "momentum", "weight_decay", "batch_size", "epochs", "seed",
                     "augment", "normalize_class_weights", "augment_rotate_probability",
                     "augment_translate_probability", "augment_flip_probability", "augment_drop_probability",
                     "augment_translation_max", "augment_drop_fraction_max"});
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::string& path) { return parse(read_text_file(path)); }

TrainingBatch make_batch(std::span<const LidarScan> scans, const ProjectionConfig& projection) {
  if (scans.empty()) throw Error(ErrorCode::EmptyBatch, "batch has no scans");
  const Index b = static_cast<Index>(scans.size());
  const Index plane = Index(projection.width) * projection.height;
  TrainingBatch batch;
  batch.input = Tensor({b, kRangeChannels, projection.height, projection.width});
  batch.labels.reserve(static_cast<std::size_t>(b * plane));
  batch.valid.reserve(static_cast<std::size_t>(b * plane));
  for (Index n = 0; n < b; ++n) {
    const auto& scan = scans[static_cast<std::size_t>(n)];
    if (!scan.labeled()) throw Error(ErrorCode::MissingLabels, "training scans need labels");
    const RangeImage img = build_range_image(scan, projection);
    batch.input.array().segment(n * kRangeChannels * plane, kRangeChannels * plane) = img.channels.array();
    const auto labels = pixel_labels_from_points(img, *scan.labels);
    batch.labels.insert(batch.labels.end(), labels.begin(), labels.end());
    batch.valid.insert(batch.valid.end(), img.valid.begin(), img.valid.end());
  }
  return batch;
}

void sgd_update(Tensor& param, const Tensor& grad, Tensor& buffer, double lr, double momentum, double decay) {
  require_same_shape(param, grad, "sgd gradient");
  if (buffer.empty()) buffer = Tensor::zeros_like(param);
  require_same_shape(param, buffer, "sgd momentum buffer");
  const float m = static_cast<float>(momentum), d = static_cast<float>(decay), step = static_cast<float>(lr);
  buffer.array() = m * buffer.array() + (grad.array() + d * param.array());
  param.array() -= step * buffer.array();
}

void sgd_step(Model& model, const Gradients& grads, SgdState& state, const TrainConfig& cfg, double lr) {
  if (grads.units.size() != model.units.size()) throw Error(ErrorCode::Dimension, "gradients do not match the model");
  std::size_t slot = 0;
  auto update = [&](Tensor& param, const Tensor& grad, bool decay) {
    if (state.buffers.size() <= slot) state.buffers.resize(slot + 1);
    sgd_update(param, grad, state.buffers[slot++], lr, cfg.momentum, decay ? cfg.weight_decay : 0.0);
  };
  for (std::size_t i = 0; i < model.units.size(); ++i) {
    auto& u = model.units[i];
    const auto& g = grads.units[i];
    update(u.conv.kernel, g.kernel, true);
    update(u.conv.bias, g.bias, false);
    if (u.has_bn) {
      update(u.bn.gamma, g.gamma, false);
      update(u.bn.beta, g.beta, false);
    }
  }
}

LossValue batch_loss(const Tensor& probs, const TrainingBatch& batch, std::span<const double> weights) {
  require_rank4(probs, "batch probabilities");
  const Index n = probs.batch(), c = probs.channels(), plane = probs.plane();
  if (static_cast<Index>(batch.labels.size()) != n * plane)
    throw Error(ErrorCode::Dimension, "batch labels do not match the probability tensor");
  LossValue out;
  out.gradient = Tensor::zeros_like(probs);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Index s = 0; s < n; ++s) {
    Tensor sample({1, c, probs.height(), probs.width()});
    sample.array() = probs.array().segment(s * c * plane, c * plane);
    const auto at = static_cast<std::size_t>(s * plane);
    const std::span<const ClassId> labels(batch.labels.data() + at, static_cast<std::size_t>(plane));
    const std::span<const std::uint8_t> valid(batch.valid.data() + at, static_cast<std::size_t>(plane));
    auto loss = total_loss(sample, labels, weights, valid);
    out.wce += loss.wce * inv_n;
    out.lovasz += loss.lovasz * inv_n;
    out.gradient.array().segment(s * c * plane, c * plane) = loss.gradient.array() * static_cast<float>(inv_n);
  }
  out.total = out.wce + out.lovasz;
  return out;
}

LossValue evaluate_batch_loss(const Model& model, const TrainingBatch& batch, std::span<const double> weights,
                              std::uint64_t seed) {
  return batch_loss(forward(model, batch.input, ForwardOptions::train(seed)), batch, weights);
}

StepResult train_step(Model& model, const TrainingBatch& batch, std::span<const double> weights, SgdState& state,
                      const TrainConfig& cfg, double lr, std::uint64_t seed) {
  Tape tape;
  StepResult out;
  out.probs = forward_train(model, batch.input, seed, tape);
  out.loss = batch_loss(out.probs, batch, weights);
  const Gradients grads = backward(model, tape, out.loss.gradient);
  sgd_step(model, grads, state, cfg, lr);
  model.for_each_tensor(Model::Visitor([](const std::string& name, Tensor& t, TensorRole, bool) {
    if (!t.array().allFinite()) throw Error(ErrorCode::InvalidDistribution, "training produced non-finite " + name);
  }));
  return out;
}

std::string EpochMetrics::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\"epoch\":" << epoch << ",\"lr\":" << lr << ",\"loss_total\":" << loss_total << ",\"loss_wce\":" << loss_wce
     << ",\"loss_ls\":" << loss_ls << ",\"train_miou\":" << train_miou << "}";
  return os.str();
}

std::vector<double> training_class_weights(std::span<const LidarScan> scans, ClassId num_classes, bool normalize) {
  const ClassWeights cw = compute_class_frequencies(scans, num_classes);
  std::vector<double> w = cw.weights;
  if (!normalize) return w;
  double weighted = 0.0, total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    weighted += w[i] * static_cast<double>(cw.frequencies[i]);
    total += static_cast<double>(cw.frequencies[i]);
  }
  if (weighted > 0.0)
    for (double& x : w) x *= total / weighted;
  return w;
}

namespace {

double train_set_miou(const Model& model, std::span<const LidarScan> scans, const ProjectionConfig& projection) {
  ConfusionMatrix cm(static_cast<ClassId>(model.config.num_classes));
  for (const auto& scan : scans) {
    const RangeImage img = build_range_image(scan, projection);
    const Tensor probs = forward(model, img.network_input());
    std::vector<ClassId> pixel(static_cast<std::size_t>(img.plane()));
    const auto m = probs.sample_matrix(0);
    for (Index p = 0; p < img.plane(); ++p) {
      Index best = 0;
      m.col(p).maxCoeff(&best);
      pixel[static_cast<std::size_t>(p)] = static_cast<ClassId>(best);
    }
    cm.accumulate(back_project(pixel, img), *scan.labels);
  }
  return iou(cm).miou;
}

}  // namespace

std::vector<EpochMetrics> train(Model& model, std::span<const LidarScan> dataset, const ProjectionConfig& projection,
                                const TrainConfig& cfg, const std::function<void(const EpochMetrics&)>& on_epoch) {
  cfg.validate();
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "training needs at least one scan");
  const auto weights = training_class_weights(dataset, static_cast<ClassId>(model.config.num_classes),
                                              cfg.normalize_class_weights);
  SgdState state;
  double lr = cfg.learning_rate;
  std::vector<EpochMetrics> log;
  std::vector<std::size_t> order(dataset.size());
  std::uint64_t step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::uint64_t epoch_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch));
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng(derive_seed(epoch_seed, 1)).shuffle(order.begin(), order.end());
    EpochMetrics m;
    m.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<LidarScan> scans;
      for (std::size_t i = start; i < end; ++i) {
        const auto& scan = dataset[order[i]];
        scans.push_back(cfg.augment ? augment_scan(scan, derive_seed(epoch_seed, 100 + i), cfg.augmentation) : scan);
      }
      const TrainingBatch batch = make_batch(scans, projection);
      const auto result = train_step(model, batch, weights, state, cfg, lr, derive_seed(cfg.seed ^ 0xD50, ++step));
      m.loss_total += result.loss.total;
      m.loss_wce += result.loss.wce;
      m.loss_ls += result.loss.lovasz;
      ++batches;
    }
    m.loss_total /= static_cast<double>(batches);
    m.loss_wce /= static_cast<double>(batches);
    m.loss_ls /= static_cast<double>(batches);
    lr *= cfg.lr_decay;
    m.lr = lr;
    m.train_miou = train_set_miou(model, dataset, projection);
    log.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return log;
}

}  // namespace salsanext

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salsanext/losses.hpp"
#include "salsanext/model.hpp"
#include "salsanext/pointcloud.hpp"
#include "salsanext/range_view.hpp"

namespace salsanext {

struct TrainConfig {
  double learning_rate = 0.01;
  double lr_decay = 0.99;  // lr <- lr * lr_decay after every epoch
  double momentum = 0.9;
  double weight_decay = 1e-4;  // L2 on conv kernels
  int batch_size = 24;
  int epochs = 1;
  std::uint64_t seed = 0;
  bool augment = true;
  AugmentConfig augmentation;
  /// Rescale alpha so the pixel-weighted mean weight is 1 (ratios unchanged).
  bool normalize_class_weights = true;

  void validate() const;
  static TrainConfig parse(const std::string& text);
  static TrainConfig load(const std::string& path);
};

/// One network batch: (B, 5, h, w) input plus per-pixel labels and mask, sample-major.
struct TrainingBatch {
  Tensor input;
  std::vector<ClassId> labels;
  std::vector<std::uint8_t> valid;
  std::size_t size() const { return static_cast<std::size_t>(input.batch()); }
};

TrainingBatch make_batch(std::span<const LidarScan> scans, const ProjectionConfig& projection);

/// Momentum buffers, one per trainable tensor in visitation order.
struct SgdState {
  std::vector<Tensor> buffers;
};

/// buffer <- momentum * buffer + (grad + decay * param); param <- param - lr * buffer.
void sgd_update(Tensor& param, const Tensor& grad, Tensor& buffer, double lr, double momentum, double decay);

/// Applies sgd_update to every trainable tensor; weight decay only on conv kernels.
void sgd_step(Model& model, const Gradients& grads, SgdState& state, const TrainConfig& cfg, double lr);

/// Loss of a batch: per-sample total loss averaged over the batch.
LossValue batch_loss(const Tensor& probs, const TrainingBatch& batch, std::span<const double> weights);

/// Deterministic batch loss with train-mode normalization and a fixed dropout
/// seed; running statistics are not touched.
LossValue evaluate_batch_loss(const Model& model, const TrainingBatch& batch, std::span<const double> weights,
                              std::uint64_t seed);

struct StepResult {
  LossValue loss;
  Tensor probs;
};

StepResult train_step(Model& model, const TrainingBatch& batch, std::span<const double> weights, SgdState& state,
                      const TrainConfig& cfg, double lr, std::uint64_t seed);

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;  // after the epoch's decay
  double loss_total = 0.0, loss_wce = 0.0, loss_ls = 0.0;
  double train_miou = 0.0;

  std::string to_json() const;
};

/// Alpha weights used by train(): 1/sqrt(f), optionally rescaled.
std::vector<double> training_class_weights(std::span<const LidarScan> scans, ClassId num_classes, bool normalize);

/// Seeded shuffle, augmentation, projection, forward, loss, backward and SGD
/// per batch; lr decays after every epoch. train_miou is the point-wise mIoU of
/// eval-mode predictions on the unaugmented training scans.
std::vector<EpochMetrics> train(Model& model, std::span<const LidarScan> dataset, const ProjectionConfig& projection,
                                const TrainConfig& cfg, const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace salsanext

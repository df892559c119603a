#include "salsanext/metrics.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace salsanext {

ConfusionMatrix::ConfusionMatrix(ClassId num_classes)
    : num_classes_(num_classes), counts_(std::size_t(num_classes) * num_classes, 0) {}

std::int64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0}); }

void ConfusionMatrix::accumulate(std::span<const ClassId> predictions, std::span<const ClassId> ground_truth,
                                 const std::set<ClassId>& ignore) {
  if (predictions.size() != ground_truth.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                               std::to_string(ground_truth.size()) + " ground-truth labels");
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const ClassId gt = ground_truth[i], pred = predictions[i];
    if (ignore.count(gt)) continue;
    if (gt >= num_classes_ || pred >= num_classes_)
      throw Error(ErrorCode::UnknownClass, "label " + std::to_string(std::max(gt, pred)) + " outside " +
                                               std::to_string(num_classes_) + " classes");
    ++counts_[index(gt, pred)];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) throw Error(ErrorCode::Dimension, "confusion matrices differ in class count");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

IouReport iou(const ConfusionMatrix& cm, const std::set<ClassId>& ignore) {
  const ClassId c = cm.num_classes();
  IouReport out;
  out.per_class.assign(c, std::nan(""));
  out.included.assign(c, false);
  double sum = 0.0;
  int used = 0;
  for (ClassId i = 0; i < c; ++i) {
    if (ignore.count(i)) continue;
    std::int64_t tp = cm(i, i), fp = 0, fn = 0;
    for (ClassId j = 0; j < c; ++j) {
      if (j == i) continue;
      fn += cm(i, j);
      if (!ignore.count(j)) fp += cm(j, i);
    }
    const std::int64_t uni = tp + fp + fn;
    if (uni == 0) continue;
    out.per_class[i] = static_cast<double>(tp) / static_cast<double>(uni);
    out.included[i] = true;
    sum += out.per_class[i];
    ++used;
  }
  if (used == 0) throw Error(ErrorCode::UndefinedMetric, "every class has an empty union; mIoU is undefined");
  out.miou = sum / used;
  return out;
}

}  // namespace salsanext

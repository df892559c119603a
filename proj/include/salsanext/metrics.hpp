#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "salsanext/pointcloud.hpp"

namespace salsanext {

/// counts(gt, pred); rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(ClassId num_classes = 0);

  ClassId num_classes() const { return num_classes_; }
  std::int64_t operator()(ClassId gt, ClassId pred) const { return counts_[index(gt, pred)]; }
  std::int64_t total() const;
  const std::vector<std::int64_t>& counts() const { return counts_; }

  /// Adds one count per (gt, pred) pair whose gt is not in `ignore`.
  void accumulate(std::span<const ClassId> predictions, std::span<const ClassId> ground_truth,
                  const std::set<ClassId>& ignore = {});
  /// Elementwise sum; associative and commutative.
  void merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t index(ClassId gt, ClassId pred) const { return std::size_t(gt) * num_classes_ + pred; }
  ClassId num_classes_;
  std::vector<std::int64_t> counts_;
};

struct IouReport {
  std::vector<double> per_class;  // NaN where the union is empty
  std::vector<bool> included;
  double miou = 0.0;
};

/// IoU_i = TP / (TP + FP + FN); classes with an empty union are left out of the mean.
IouReport iou(const ConfusionMatrix& cm, const std::set<ClassId>& ignore = {});

}  // namespace salsanext

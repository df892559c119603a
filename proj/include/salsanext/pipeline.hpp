#pragma once

#include <vector>

#include "salsanext/knn.hpp"
#include "salsanext/model.hpp"
#include "salsanext/range_view.hpp"

namespace salsanext {

/// Per-pixel argmax over classes for sample n of (N, C, H, W) probabilities.
std::vector<ClassId> argmax_labels(const Tensor& probs, Index n = 0);

struct InferenceOptions {
  ProjectionConfig projection;
  bool use_knn = true;
  KnnConfig knn;
};

struct InferenceResult {
  RangeImage image;
  std::vector<ClassId> pixel_labels;
  std::vector<ClassId> point_labels;
  double projection_ms = 0.0;
  double network_ms = 0.0;
  double knn_ms = 0.0;  // back-projection plus optional filtering
  double total_ms = 0.0;
};

/// project -> eval-mode forward -> argmax -> back-project (-> kNN).
InferenceResult infer_scan(const Model& model, const LidarScan& scan, const InferenceOptions& options);

}  // namespace salsanext

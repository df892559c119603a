#pragma once

#include <span>
#include <string>
#include <vector>

#include "salsanext/range_view.hpp"

namespace salsanext {

enum class KnnWeighting { Uniform, InverseRangeGap };

struct KnnConfig {
  int window = 5;       // odd
  int k = 5;            // 1 <= k <= window^2
  double cutoff = 1.0;  // meters
  KnnWeighting weighting = KnnWeighting::InverseRangeGap;
  double epsilon = 1e-3;  // inverse-gap weight is 1 / (epsilon + gap)

  void validate() const;
};

KnnWeighting parse_knn_weighting(const std::string& name);
std::string to_string(KnnWeighting w);

/// Per-point relabeling from range-nearest labeled pixels in a window around
/// each point's own pixel. `points` supplies each point's own range; votes
/// read the input pixel labels only, never the output.
std::vector<ClassId> knn_filter(const RangeImage& img, std::span<const ClassId> pixel_labels,
                                std::span<const ClassId> point_labels_in, std::span<const LidarPoint> points,
                                const KnnConfig& cfg = {});

}  // namespace salsanext

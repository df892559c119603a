#include "salsanext/knn.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace salsanext {

void KnnConfig::validate() const {
  if (window < 1 || window % 2 == 0) throw Error(ErrorCode::Config, "kNN window must be odd and >= 1");
  if (k < 1 || k > window * window) throw Error(ErrorCode::Config, "kNN k must lie in [1, window^2]");
  if (!(cutoff > 0.0)) throw Error(ErrorCode::Config, "kNN cutoff must be positive");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::Config, "kNN epsilon must be positive");
}

KnnWeighting parse_knn_weighting(const std::string& name) {
  if (name == "uniform") return KnnWeighting::Uniform;
  if (name == "inverse-range-gap" || name == "inverse") return KnnWeighting::InverseRangeGap;
  throw Error(ErrorCode::Config, "unknown kNN weighting '" + name + "' (uniform | inverse-range-gap)");
}

std::string to_string(KnnWeighting w) { return w == KnnWeighting::Uniform ? "uniform" : "inverse-range-gap"; }

std::vector<ClassId> knn_filter(const RangeImage& img, std::span<const ClassId> pixel_labels,
                                std::span<const ClassId> point_labels_in, std::span<const LidarPoint> points,
                                const KnnConfig& cfg) {
  cfg.validate();
  if (pixel_labels.size() != static_cast<std::size_t>(img.plane()))
    throw Error(ErrorCode::Dimension, "kNN pixel label map does not match the image");
  if (point_labels_in.size() != img.pixel_of_point.size() || points.size() != img.pixel_of_point.size())
    throw Error(ErrorCode::Dimension, "kNN point labels/points do not match the projected scan");

  const int half = cfg.window / 2;
  const int w = img.width(), h = img.height();
  struct Candidate {
    double gap;
    std::size_t pixel;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(std::size_t(cfg.window) * cfg.window);
  std::vector<double> votes;
  std::vector<ClassId> out(point_labels_in.begin(), point_labels_in.end());

  for (std::size_t k = 0; k < out.size(); ++k) {
    const PixelCoord px = img.pixel_of_point[k];
    if (!px.valid()) continue;
    const double own = points[k].range();
    candidates.clear();
    for (int dv = -half; dv <= half; ++dv) {
      const int v = px.v + dv;
      if (v < 0 || v >= h) continue;
      for (int du = -half; du <= half; ++du) {
        const int u = px.u + du;
        if (u < 0 || u >= w) continue;
        const std::size_t pixel = img.pixel_index(u, v);
        if (!img.is_valid(pixel)) continue;
        candidates.push_back({std::abs(static_cast<double>(img.range_at(pixel)) - own), pixel});
      }
    }
    const std::size_t keep = std::min<std::size_t>(cfg.k, candidates.size());
    const auto by_gap = [](const Candidate& a, const Candidate& b) {
      return a.gap != b.gap ? a.gap < b.gap : a.pixel < b.pixel;
    };
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(), by_gap);

    votes.clear();
    bool any = false;
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& c = candidates[i];
      if (c.gap > cfg.cutoff) continue;
      const ClassId label = pixel_labels[c.pixel];
      if (label >= votes.size()) votes.resize(label + 1, 0.0);
      votes[label] += cfg.weighting == KnnWeighting::Uniform ? 1.0 : 1.0 / (cfg.epsilon + c.gap);
      any = true;
    }
    if (!any) continue;
    // max_element returns the first maximum, i.e. the smaller class on ties.
    out[k] = static_cast<ClassId>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return out;
}

}  // namespace salsanext

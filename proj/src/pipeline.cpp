#include "salsanext/pipeline.hpp"

#include <chrono>

namespace salsanext {

namespace {
using Clock = std::chrono::steady_clock;
double ms_since(Clock::time_point t) { return std::chrono::duration<double, std::milli>(Clock::now() - t).count(); }
}  // namespace

std::vector<ClassId> argmax_labels(const Tensor& probs, Index n) {
  require_rank4(probs, "argmax");
  const auto m = probs.sample_matrix(n);
  std::vector<ClassId> out(static_cast<std::size_t>(m.cols()));
  for (Index p = 0; p < m.cols(); ++p) {
    Index best = 0;
    for (Index c = 1; c < m.rows(); ++c)
      if (m(c, p) > m(best, p)) best = c;
    out[static_cast<std::size_t>(p)] = static_cast<ClassId>(best);
  }
  return out;
}

InferenceResult infer_scan(const Model& model, const LidarScan& scan, const InferenceOptions& options) {
  InferenceResult r;
  const auto start = Clock::now();
  auto t = start;
  r.image = build_range_image(scan, options.projection);
  r.projection_ms = ms_since(t);

  t = Clock::now();
  r.pixel_labels = argmax_labels(forward(model, r.image.network_input()));
  r.network_ms = ms_since(t);

  t = Clock::now();
  r.point_labels = back_project(r.pixel_labels, r.image);
  if (options.use_knn) r.point_labels = knn_filter(r.image, r.pixel_labels, r.point_labels, scan.points, options.knn);
  r.knn_ms = ms_since(t);
  r.total_ms = ms_since(start);
  return r;
}

}  // namespace salsanext

#include "salsanext/pointcloud.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "salsanext/random.hpp"

namespace salsanext {

static_assert(std::endian::native == std::endian::little, "KITTI codecs assume a little-endian host");

double LidarPoint::range() const {
  const double dx = x, dy = y, dz = z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

ClassMap::ClassMap(std::vector<Entry> entries) : entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (!forward_.emplace(e.raw_id, e.training_id).second)
      throw Error(ErrorCode::Config, "class map lists raw id " + std::to_string(e.raw_id) + " twice");
    inverse_.emplace(e.training_id, e.raw_id);
  }
  for (ClassId t = 0; t < num_classes(); ++t)
    if (!inverse_.count(t))
      throw Error(ErrorCode::Config, "class map training ids are not contiguous; missing " + std::to_string(t));
}

ClassMap ClassMap::parse(const std::string& text) {
  std::vector<Entry> entries;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    long long raw = 0, training = 0;
    if (!(fields >> raw)) continue;
    if (!(fields >> training) || raw < 0 || training < 0 || raw > 0xFFFF)
      throw Error(ErrorCode::Config, "class map line " + std::to_string(line_no) + " is malformed");
    std::string name;
    std::getline(fields >> std::ws, name);
    while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.pop_back();
    entries.push_back({static_cast<std::uint32_t>(raw), static_cast<ClassId>(training), name});
  }
  if (entries.empty()) throw Error(ErrorCode::Config, "class map is empty");
  return ClassMap(std::move(entries));
}

ClassMap ClassMap::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, "cannot open class map " + path);
  return parse(std::string(std::istreambuf_iterator<char>(in), {}));
}

ClassMap ClassMap::semantic_kitti() {
  // Canonical raw id first for every training id so to_raw() is the benchmark inverse map.
  static const char* kTable = R"(0 0 unlabeled
1 0 outlier
52 0 other-structure
99 0 other-object
10 1 car
252 1 moving-car
11 2 bicycle
15 3 motorcycle
18 4 truck
258 4 moving-truck
20 5 other-vehicle
13 5 bus
16 5 on-rails
256 5 moving-on-rails
257 5 moving-bus
259 5 moving-other-vehicle
30 6 person
254 6 moving-person
31 7 bicyclist
253 7 moving-bicyclist
32 8 motorcyclist
255 8 moving-motorcyclist
40 9 road
60 9 lane-marking
44 10 parking
48 11 sidewalk
49 12 other-ground
50 13 building
51 14 fence
70 15 vegetation
71 16 trunk
72 17 terrain
80 18 pole
81 19 traffic-sign
)";
  return parse(kTable);
}

ClassMap ClassMap::identity(ClassId num_classes) {
  std::vector<Entry> entries;
  for (ClassId i = 0; i < num_classes; ++i) entries.push_back({i, i, "class" + std::to_string(i)});
  return ClassMap(std::move(entries));
}

ClassId ClassMap::to_training(std::uint32_t raw_id) const {
  auto it = forward_.find(raw_id);
  if (it == forward_.end()) throw Error(ErrorCode::UnknownClass, "raw id " + std::to_string(raw_id) + " not in class map");
  return it->second;
}

std::uint32_t ClassMap::to_raw(ClassId training_id) const {
  auto it = inverse_.find(training_id);
  if (it == inverse_.end()) throw Error(ErrorCode::UnknownClass, "training id " + std::to_string(training_id) + " not in class map");
  return it->second;
}

ClassId ClassMap::num_classes() const { return inverse_.empty() ? 0 : inverse_.rbegin()->first + 1; }

std::string ClassMap::name(ClassId training_id) const {
  for (const auto& e : entries_)
    if (e.training_id == training_id) return e.name;
  return "class" + std::to_string(training_id);
}

LidarScan read_kitti_scan(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 16 != 0)
    throw Error(ErrorCode::MalformedScan, "scan length " + std::to_string(bytes.size()) + " is not a multiple of 16");
  LidarScan scan;
  const std::size_t count = bytes.size() / 16;
  scan.points.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    float v[4];
    std::memcpy(v, bytes.data() + 16 * i, 16);
    for (float f : v)
      if (!std::isfinite(f)) throw Error(ErrorCode::InvalidPoint, "non-finite value at point " + std::to_string(i));
    scan.points[i] = {v[0], v[1], v[2], v[3]};
  }
  return scan;
}

std::vector<std::uint8_t> write_kitti_scan(const LidarScan& scan) {
  std::vector<std::uint8_t> bytes(scan.points.size() * 16);
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    const auto& p = scan.points[i];
    const float v[4] = {p.x, p.y, p.z, p.intensity};
    std::memcpy(bytes.data() + 16 * i, v, 16);
  }
  return bytes;
}

LidarScan read_kitti_labels(std::span<const std::uint8_t> bytes, const LidarScan& scan, const ClassMap& map) {
  if (bytes.size() != 4 * scan.points.size())
    throw Error(ErrorCode::LabelMismatch, std::to_string(bytes.size()) + " label bytes for " +
                                              std::to_string(scan.points.size()) + " points");
  LidarScan out = scan;
  std::vector<ClassId> labels(scan.points.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::uint32_t record;
    std::memcpy(&record, bytes.data() + 4 * i, 4);
    labels[i] = map.to_training(record & 0xFFFFu);
  }
  out.labels = std::move(labels);
  return out;
}

std::vector<std::uint8_t> write_kitti_labels(std::span<const ClassId> labels, const ClassMap& map) {
  std::vector<std::uint8_t> bytes(labels.size() * 4);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint32_t raw = map.to_raw(labels[i]);
    std::memcpy(bytes.data() + 4 * i, &raw, 4);
  }
  return bytes;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

LidarScan augment_scan(const LidarScan& scan, std::uint64_t seed, const AugmentConfig& config) {
  if (!scan.labeled()) throw Error(ErrorCode::MissingLabels, "augmentation is applied to labeled training scans");
  Rng rng(seed);
  // Every decision is drawn up front so enabling one transform does not shift the others' streams.
  const bool rotate = rng.bernoulli(config.rotate_probability);
  const double angle = rng.uniform(config.rotation_min, config.rotation_max);
  const bool translate = rng.bernoulli(config.translate_probability);
  const double tx = rng.uniform(-config.translation_max, config.translation_max);
  const double ty = rng.uniform(-config.translation_max, config.translation_max);
  const double tz = rng.uniform(-config.translation_max, config.translation_max);
  const bool flip = rng.bernoulli(config.flip_probability);
  const bool drop = rng.bernoulli(config.drop_probability);
  const double drop_fraction = rng.uniform(config.drop_fraction_min, config.drop_fraction_max);
  Rng drop_rng(derive_seed(seed, 1));

  LidarScan out;
  out.labels.emplace();
  out.points.reserve(scan.points.size());
  out.labels->reserve(scan.points.size());
  const double c = std::cos(angle), s = std::sin(angle);
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    if (drop && drop_rng.bernoulli(drop_fraction)) continue;
    LidarPoint p = scan.points[i];
    double x = p.x, y = p.y, z = p.z;
    if (rotate) {
      const double rx = c * x - s * y;
      const double ry = s * x + c * y;
      x = rx;
      y = ry;
    }
    if (translate) {
      x += tx;
      y += ty;
      z += tz;
    }
    if (flip) y = -y;
    p.x = static_cast<float>(x);
    p.y = static_cast<float>(y);
    p.z = static_cast<float>(z);
    out.points.push_back(p);
    out.labels->push_back((*scan.labels)[i]);
  }
  return out;
}

ClassWeights class_weights_from_counts(std::vector<std::uint64_t> counts) {
  ClassWeights w;
  w.weights.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    w.weights[i] = counts[i] > 0 ? 1.0 / std::sqrt(static_cast<double>(counts[i])) : 0.0;
  w.frequencies = std::move(counts);
  return w;
}

ClassWeights compute_class_frequencies(std::span<const LidarScan> scans, ClassId num_classes) {
  std::vector<std::uint64_t> counts(num_classes, 0);
  for (const auto& scan : scans) {
    if (!scan.labeled()) throw Error(ErrorCode::MissingLabels, "class frequencies need labeled scans");
    for (ClassId label : *scan.labels) {
      if (label >= num_classes) throw Error(ErrorCode::UnknownClass, "label " + std::to_string(label) + " out of range");
      ++counts[label];
    }
  }
  return class_weights_from_counts(std::move(counts));
}

}  // namespace salsanext

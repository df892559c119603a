// salsanext: train, infer, eval, uncertainty and project subcommands.
// Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "salsanext/config.hpp"
#include "salsanext/image_io.hpp"
#include "salsanext/knn.hpp"
#include "salsanext/metrics.hpp"
#include "salsanext/model.hpp"
#include "salsanext/pipeline.hpp"
#include "salsanext/random.hpp"
#include "salsanext/synthetic.hpp"
#include "salsanext/tensor_io.hpp"
#include "salsanext/trainer.hpp"
#include "salsanext/uncertainty.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace salsanext;

namespace {

constexpr const char* kVersion = "0.1.0";

/// Bad invocation: exit 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;
double ms_since(Clock::time_point t) { return std::chrono::duration<double, std::milli>(Clock::now() - t).count(); }

std::string fnv1a_hex(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) { write_file(path.string(), bytes); }

/// Scan files from a list of files and directories (directories contribute their *.bin), sorted by stem.
std::vector<fs::path> collect_scans(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && e.path().extension() == ".bin") out.push_back(e.path());
    } else if (fs::is_regular_file(in)) {
      out.emplace_back(in);
    } else {
      throw UsageError("scan input not found: " + in);
    }
  }
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) { return a.stem() < b.stem(); });
  if (out.empty()) throw UsageError("no scans given");
  return out;
}

/// stem -> path for files with the given extension.
std::map<std::string, fs::path> files_by_stem(const std::string& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw UsageError("directory not found: " + dir);
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out[e.path().stem().string()] = e.path();
  return out;
}

struct ProjectionFlags {
  int width = 2048;
  int height = 64;
  double fov_up = 3.0;
  double fov_down = -25.0;

  void add(CLI::App* app) {
    app->add_option("--width", width, "Range image width")->capture_default_str();
    app->add_option("--height", height, "Range image height")->capture_default_str();
    app->add_option("--fov-up", fov_up, "Upper vertical field of view, degrees")->capture_default_str();
    app->add_option("--fov-down", fov_down, "Lower vertical field of view, degrees")->capture_default_str();
  }
  ProjectionConfig config() const {
    auto c = ProjectionConfig::from_degrees(width, height, fov_up, fov_down);
    c.validate();
    return c;
  }
  json to_json() const { return {{"width", width}, {"height", height}, {"fov_up_deg", fov_up}, {"fov_down_deg", fov_down}}; }
};

struct KnnFlags {
  bool disabled = false;
  int window = 5;
  int k = 5;
  double cutoff = 1.0;
  std::string weights = "inverse-range-gap";

  void add(CLI::App* app) {
    app->add_flag("--no-knn", disabled, "Disable kNN post-processing");
    app->add_option("--knn-window", window, "kNN window size (odd)")->capture_default_str();
    app->add_option("--knn-k", k, "kNN neighbor count")->capture_default_str();
    app->add_option("--knn-cutoff", cutoff, "kNN range cutoff, meters")->capture_default_str();
    app->add_option("--knn-weights", weights, "uniform | inverse-range-gap")->capture_default_str();
  }
  KnnConfig config() const {
    KnnConfig c;
    c.window = window;
    c.k = k;
    c.cutoff = cutoff;
    c.weighting = parse_knn_weighting(weights);
    c.validate();
    return c;
  }
};

ClassMap load_class_map(const std::string& path, ClassId num_classes) {
  if (path.empty()) return ClassMap::identity(num_classes);
  require_file(path, "class map");
  return ClassMap::load(path);
}

Model load_model(const std::string& path) {
  require_file(path, "checkpoint");
  return load_checkpoint(read_file(path));
}

LidarScan load_scan(const fs::path& path) { return read_kitti_scan(read_file(path.string())); }

json base_manifest(const std::string& command, std::uint64_t seed) {
  return {{"command", command}, {"version", kVersion}, {"seed", seed}};
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string model_config, train_config, synthetic, dataset, class_map, out;
  std::optional<std::uint64_t> seed;
  int num_scans = 20;
  bool write_dataset = false;
  ProjectionFlags projection;
  bool width_set = false;
};

int cmd_train(const TrainArgs& a, bool width_given) {
  require_file(a.model_config, "model config");
  require_file(a.train_config, "train config");
  if (a.synthetic.empty() == a.dataset.empty()) throw UsageError("give exactly one of --synthetic or --dataset");
  const ModelConfig mcfg = ModelConfig::load(a.model_config);
  TrainConfig tcfg = TrainConfig::load(a.train_config);
  if (a.seed) tcfg.seed = *a.seed;
  ProjectionFlags proj = a.projection;

  const auto start = Clock::now();
  std::vector<LidarScan> scans;
  std::vector<std::string> names;
  if (!a.synthetic.empty()) {
    SceneSpec spec = SceneSpec::four_class();
    if (a.synthetic != "default") {
      require_file(a.synthetic, "scene config");
      spec = SceneSpec::load(a.synthetic);
    }
    if (!width_given) proj.width = spec.scanner.cols;
    if (a.num_scans < 1) throw UsageError("--num-scans must be positive");
    for (int i = 0; i < a.num_scans; ++i) {
      scans.push_back(generate_synthetic_scene(derive_seed(tcfg.seed, 0x5CE7E + static_cast<std::uint64_t>(i)), spec));
      char name[16];
      std::snprintf(name, sizeof name, "%06d", i);
      names.emplace_back(name);
    }
  } else {
    const ClassMap map = load_class_map(a.class_map, static_cast<ClassId>(mcfg.num_classes));
    const auto bins = files_by_stem((fs::path(a.dataset) / "velodyne").string(), ".bin");
    const auto labels = files_by_stem((fs::path(a.dataset) / "labels").string(), ".label");
    if (bins.empty()) throw UsageError("dataset has no velodyne/*.bin scans");
    for (const auto& [stem, path] : bins) {
      const auto it = labels.find(stem);
      if (it == labels.end()) throw UsageError("scan " + stem + " has no label file");
      scans.push_back(read_kitti_labels(read_file(it->second.string()), load_scan(path), map));
      names.push_back(stem);
    }
  }
  const ProjectionConfig pcfg = proj.config();

  fs::create_directories(a.out);
  if (a.write_dataset) {
    const ClassMap map = ClassMap::identity(static_cast<ClassId>(mcfg.num_classes));
    fs::create_directories(fs::path(a.out) / "dataset" / "velodyne");
    fs::create_directories(fs::path(a.out) / "dataset" / "labels");
    for (std::size_t i = 0; i < scans.size(); ++i) {
      write_bytes(fs::path(a.out) / "dataset" / "velodyne" / (names[i] + ".bin"), write_kitti_scan(scans[i]));
      write_bytes(fs::path(a.out) / "dataset" / "labels" / (names[i] + ".label"),
                  write_kitti_labels(*scans[i].labels, map));
    }
  }

  Model model = build_model(mcfg, derive_seed(tcfg.seed, 0x1417));
  std::ofstream metrics(fs::path(a.out) / "metrics.jsonl");
  if (!metrics) throw Error(ErrorCode::Io, "cannot write metrics log");
  const auto log = train(model, scans, pcfg, tcfg, [&](const EpochMetrics& m) {
    metrics << m.to_json() << '\n';
    metrics.flush();
    std::cerr << "epoch " << m.epoch << " loss " << m.loss_total << " train_miou " << m.train_miou << '\n';
  });
  const auto blob = save_checkpoint(model);
  write_bytes(fs::path(a.out) / "model.snxc", blob);

  json manifest = base_manifest("train", tcfg.seed);
  manifest["config"] = {{"model", a.model_config}, {"train", a.train_config}};
  manifest["inputs"] = {{"synthetic", a.synthetic}, {"dataset", a.dataset}, {"scans", scans.size()}};
  manifest["projection"] = proj.to_json();
  manifest["outputs"] = {{"checkpoint", (fs::path(a.out) / "model.snxc").string()},
                         {"metrics", (fs::path(a.out) / "metrics.jsonl").string()}};
  manifest["checkpoint_fnv1a"] = fnv1a_hex(blob);
  manifest["parameters"] = count_parameters(model);
  manifest["epochs"] = log.size();
  manifest["final_train_miou"] = log.empty() ? 0.0 : log.back().train_miou;
  manifest["timing_ms"] = {{"total", ms_since(start)}};
  write_text_atomic(fs::path(a.out) / "manifest.json", manifest.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// infer

struct InferArgs {
  std::string checkpoint, class_map, out;
  std::vector<std::string> scans;
  bool png = false;
  ProjectionFlags projection;
  KnnFlags knn;
};

int cmd_infer(const InferArgs& a) {
  const auto paths = collect_scans(a.scans);
  const Model model = load_model(a.checkpoint);
  const ClassMap map = load_class_map(a.class_map, static_cast<ClassId>(model.config.num_classes));
  InferenceOptions opts;
  opts.projection = a.projection.config();
  opts.use_knn = !a.knn.disabled;
  opts.knn = a.knn.config();
  fs::create_directories(a.out);

  json per_scan = json::array();
  double sum_proj = 0, sum_net = 0, sum_knn = 0, sum_total = 0;
  for (const auto& path : paths) {
    const auto t = Clock::now();
    const LidarScan scan = load_scan(path);
    const auto load_ms = ms_since(t);
    const auto r = infer_scan(model, scan, opts);
    const std::string stem = path.stem().string();
    write_bytes(fs::path(a.out) / (stem + ".label"), write_kitti_labels(r.point_labels, map));
    if (a.png)
      write_image((fs::path(a.out) / (stem + ".png")).string(),
                  label_image(r.pixel_labels, r.image.width(), r.image.height(), r.image.valid));
    per_scan.push_back({{"scan", path.string()},
                        {"points", scan.size()},
                        {"load_ms", load_ms},
                        {"projection_ms", r.projection_ms},
                        {"network_ms", r.network_ms},
                        {"knn_ms", r.knn_ms},
                        {"total_ms", r.total_ms}});
    sum_proj += r.projection_ms;
    sum_net += r.network_ms;
    sum_knn += r.knn_ms;
    sum_total += r.total_ms;
  }
  const double n = static_cast<double>(paths.size());
  json manifest = base_manifest("infer", 0);
  manifest["checkpoint"] = a.checkpoint;
  manifest["projection"] = a.projection.to_json();
  manifest["knn"] = {{"enabled", opts.use_knn}, {"window", opts.knn.window}, {"k", opts.knn.k},
                     {"cutoff", opts.knn.cutoff}, {"weights", to_string(opts.knn.weighting)}};
  manifest["outputs"] = {{"dir", a.out}};
  manifest["timing_ms"] = {{"projection", sum_proj / n}, {"network", sum_net / n}, {"knn", sum_knn / n},
                           {"total", sum_total / n}};
  manifest["scans"] = per_scan;
  write_text_atomic(fs::path(a.out) / "manifest.json", manifest.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string predictions, labels, class_map, out;
  int num_classes = 0;
  std::vector<ClassId> ignore;
};

int cmd_eval(const EvalArgs& a) {
  if (a.class_map.empty() && a.num_classes < 1) throw UsageError("give --class-map or --num-classes");
  const ClassMap map = load_class_map(a.class_map, static_cast<ClassId>(std::max(a.num_classes, 1)));
  const auto preds = files_by_stem(a.predictions, ".label");
  const auto gts = files_by_stem(a.labels, ".label");
  if (gts.empty()) throw UsageError("no ground-truth label files in " + a.labels);
  for (const auto& [stem, path] : preds)
    if (!gts.count(stem)) throw UsageError("prediction " + stem + " has no ground truth");
  const std::set<ClassId> ignore(a.ignore.begin(), a.ignore.end());
  ConfusionMatrix cm(map.num_classes());
  std::int64_t points = 0;
  for (const auto& [stem, gt_path] : gts) {
    const auto it = preds.find(stem);
    if (it == preds.end()) throw UsageError("ground truth " + stem + " has no prediction");
    const auto gt_bytes = read_file(gt_path.string());
    const auto pred_bytes = read_file(it->second.string());
    if (gt_bytes.size() != pred_bytes.size())
      throw UsageError("point count mismatch for " + stem + ": " + std::to_string(pred_bytes.size() / 4) +
                       " predictions vs " + std::to_string(gt_bytes.size() / 4) + " labels");
    LidarScan dummy;
    dummy.points.resize(gt_bytes.size() / 4);
    const auto gt = read_kitti_labels(gt_bytes, dummy, map);
    const auto pred = read_kitti_labels(pred_bytes, dummy, map);
    cm.accumulate(*pred.labels, *gt.labels, ignore);
    points += static_cast<std::int64_t>(dummy.points.size());
  }
  const IouReport rep = iou(cm, ignore);
  json classes = json::array();
  for (ClassId c = 0; c < map.num_classes(); ++c) {
    json entry = {{"id", c}, {"name", map.name(c)}};
    entry["iou"] = rep.included[c] ? json(rep.per_class[c]) : json(nullptr);
    classes.push_back(entry);
  }
  json confusion = json::array();
  for (ClassId g = 0; g < map.num_classes(); ++g) {
    json row = json::array();
    for (ClassId p = 0; p < map.num_classes(); ++p) row.push_back(cm(g, p));
    confusion.push_back(row);
  }
  json report = {{"miou", rep.miou},     {"classes", classes}, {"confusion", confusion},
                 {"points", points},     {"evaluated_points", cm.total()}, {"files", gts.size()}};
  const std::string text = report.dump(2) + "\n";
  if (a.out.empty()) std::cout << text;
  else write_text_atomic(a.out, text);
  return 0;
}

// ---------------------------------------------------------------------------
// uncertainty

struct UncertaintyArgs {
  std::string checkpoint, noise_model, out, labels, class_map;
  std::vector<std::string> scans;
  int mc_trials = 30;
  std::uint64_t seed = 0;
  std::optional<double> rate;
  bool grid_search = false;
  std::vector<double> rates;
  ProjectionFlags projection;
};

int cmd_uncertainty(const UncertaintyArgs& a) {
  const auto paths = collect_scans(a.scans);
  if (a.mc_trials < 1) throw UsageError("--mc-trials must be >= 1");
  const Model model = load_model(a.checkpoint);
  SensorNoiseModel noise;
  if (!a.noise_model.empty()) {
    require_file(a.noise_model, "noise model");
    noise = SensorNoiseModel::load(a.noise_model);
  }
  const ProjectionConfig pcfg = a.projection.config();
  fs::create_directories(a.out);
  const auto start = Clock::now();

  json per_scan = json::array();
  std::vector<CalibrationSample> calibration;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const LidarScan scan = load_scan(paths[i]);
    const RangeImage img = build_range_image(scan, pcfg);
    const Tensor input = img.network_input();
    const auto mc = mc_dropout_infer(model, input, a.mc_trials, derive_seed(a.seed, i), a.rate);
    const auto adf = adf_infer(model, input, noise);
    const std::string stem = paths[i].stem().string();
    const std::span<const float> epi(mc.epistemic.data(), static_cast<std::size_t>(mc.epistemic.size()));
    const std::span<const float> ale(adf.aleatoric.data(), static_cast<std::size_t>(adf.aleatoric.size()));
    write_image((fs::path(a.out) / (stem + "_epistemic.png")).string(), grayscale(epi, img.width(), img.height(), img.valid));
    write_image((fs::path(a.out) / (stem + "_aleatoric.png")).string(), grayscale(ale, img.width(), img.height(), img.valid));
    write_bytes(fs::path(a.out) / (stem + ".uncertainty"),
                save_tensors({{"epistemic", mc.epistemic}, {"aleatoric", adf.aleatoric}, {"mean_prediction", mc.mean_prediction}}));
    double epi_sum = 0, ale_sum = 0;
    for (std::size_t p = 0; p < img.valid.size(); ++p)
      if (img.valid[p]) {
        epi_sum += epi[p];
        ale_sum += ale[p];
      }
    const double valid = static_cast<double>(std::max<std::size_t>(img.valid_count(), 1));
    per_scan.push_back({{"scan", paths[i].string()}, {"mean_epistemic", epi_sum / valid}, {"mean_aleatoric", ale_sum / valid},
                        {"max_epistemic", mc.epistemic.array().maxCoeff()}});
    if (a.grid_search) {
      if (a.labels.empty()) throw UsageError("--grid-search needs --labels with ground truth for calibration");
      const auto label_path = fs::path(a.labels) / (stem + ".label");
      require_file(label_path.string(), "calibration labels");
      const ClassMap map = load_class_map(a.class_map, static_cast<ClassId>(model.config.num_classes));
      const LidarScan labeled = read_kitti_labels(read_file(label_path.string()), scan, map);
      calibration.push_back({input, pixel_labels_from_points(img, *labeled.labels), img.valid});
    }
  }
  json manifest = base_manifest("uncertainty", a.seed);
  manifest["checkpoint"] = a.checkpoint;
  manifest["noise_model"] = a.noise_model;
  manifest["mc_trials"] = a.mc_trials;
  manifest["projection"] = a.projection.to_json();
  manifest["scans"] = per_scan;
  if (a.grid_search) {
    const std::vector<double> rates = a.rates.empty() ? log_rate_grid() : a.rates;
    const auto gs = grid_search_dropout_rate(model, calibration, rates, noise, a.mc_trials, a.seed);
    const json result = {{"selected_rate", gs.selected_rate}, {"rates", gs.rates}, {"objectives", gs.objectives}};
    manifest["grid_search"] = result;
    std::cout << result.dump() << '\n';
  }
  manifest["timing_ms"] = {{"total", ms_since(start)}};
  write_text_atomic(fs::path(a.out) / "manifest.json", manifest.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// project

struct ProjectArgs {
  std::string scan, out;
  ProjectionFlags projection;
};

int cmd_project(const ProjectArgs& a) {
  require_file(a.scan, "scan");
  const LidarScan scan = load_scan(a.scan);
  const RangeImage img = build_range_image(scan, a.projection.config());
  json report = {{"points", scan.size()}, {"valid_pixels", img.valid_count()}, {"collisions", img.collision_count()}};
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    const std::string stem = fs::path(a.scan).stem().string();
    static const char* names[kRangeChannels] = {"x", "y", "z", "intensity", "range"};
    const auto plane = static_cast<std::size_t>(img.plane());
    for (int c = 0; c < kRangeChannels; ++c) {
      const std::span<const float> values(img.channels.data() + c * plane, plane);
      write_image((fs::path(a.out) / (stem + "_" + names[c] + ".png")).string(),
                  grayscale(values, img.width(), img.height(), img.valid));
    }
    Image8 mask{img.width(), img.height(), 1, std::vector<std::uint8_t>(plane)};
    for (std::size_t p = 0; p < plane; ++p) mask.pixels[p] = img.valid[p] ? 255 : 0;
    write_image((fs::path(a.out) / (stem + "_valid.png")).string(), mask);
    write_bytes(fs::path(a.out) / (stem + ".rangeimage"), save_tensors({{"channels", img.channels}}));
    report["outputs"] = a.out;
  }
  std::cout << report.dump() << '\n';
  return 0;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config:
    case ErrorCode::InvalidSpec:
    case ErrorCode::InvalidTrials:
    case ErrorCode::EmptyCandidates:
      return 2;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Range-view LiDAR semantic segmentation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model on synthetic or KITTI-format scans");
  train_cmd->add_option("--model-config", train_args.model_config, "Model config (key=value)")->required();
  train_cmd->add_option("--train-config", train_args.train_config, "Train config (key=value)")->required();
  train_cmd->add_option("--synthetic", train_args.synthetic, "Scene config file, or 'default'");
  train_cmd->add_option("--dataset", train_args.dataset, "Directory with velodyne/*.bin and labels/*.label");
  train_cmd->add_option("--class-map", train_args.class_map, "Raw id -> training id map");
  train_cmd->add_option("--out", train_args.out, "Output directory")->required();
  train_cmd->add_option("--seed", train_args.seed, "Overrides the train config seed");
  train_cmd->add_option("--num-scans", train_args.num_scans, "Synthetic scan count")->capture_default_str();
  train_cmd->add_flag("--write-dataset", train_args.write_dataset, "Also write the scans in KITTI format");
  train_args.projection.add(train_cmd);

  InferArgs infer_args;
  auto* infer_cmd = app.add_subcommand("infer", "Label scans with a trained checkpoint");
  infer_cmd->add_option("--checkpoint", infer_args.checkpoint, "Checkpoint file")->required();
  infer_cmd->add_option("scans", infer_args.scans, "Scan files (.bin) or directories");
  infer_cmd->add_option("--class-map", infer_args.class_map, "Raw id -> training id map");
  infer_cmd->add_option("--out", infer_args.out, "Output directory")->required();
  infer_cmd->add_flag("--png", infer_args.png, "Write a label-map PNG per scan");
  infer_args.projection.add(infer_cmd);
  infer_args.knn.add(infer_cmd);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "IoU report for predicted against ground-truth label files");
  eval_cmd->add_option("--predictions", eval_args.predictions, "Directory of predicted .label files")->required();
  eval_cmd->add_option("--labels", eval_args.labels, "Directory of ground-truth .label files")->required();
  eval_cmd->add_option("--class-map", eval_args.class_map, "Raw id -> training id map");
  eval_cmd->add_option("--num-classes", eval_args.num_classes, "Identity class map size when no map is given");
  eval_cmd->add_option("--ignore", eval_args.ignore, "Training ids to ignore");
  eval_cmd->add_option("--out", eval_args.out, "Report file (stdout when omitted)");

  UncertaintyArgs unc_args;
  auto* unc_cmd = app.add_subcommand("uncertainty", "Epistemic (MC dropout) and aleatoric (ADF) maps");
  unc_cmd->add_option("--checkpoint", unc_args.checkpoint, "Checkpoint file")->required();
  unc_cmd->add_option("scans", unc_args.scans, "Scan files (.bin) or directories");
  unc_cmd->add_option("--out", unc_args.out, "Output directory")->required();
  unc_cmd->add_option("--mc-trials", unc_args.mc_trials, "MC dropout trials")->capture_default_str();
  unc_cmd->add_option("--noise-model", unc_args.noise_model, "Sensor noise variances (key=value)");
  unc_cmd->add_option("--seed", unc_args.seed, "Root seed")->capture_default_str();
  unc_cmd->add_option("--rate", unc_args.rate, "Dropout rate override for MC sampling");
  unc_cmd->add_flag("--grid-search", unc_args.grid_search, "Select a dropout rate on the given scans");
  unc_cmd->add_option("--rates", unc_args.rates, "Candidate rates (default: 20 log-spaced in [0.01, 0.5])");
  unc_cmd->add_option("--labels", unc_args.labels, "Ground-truth .label directory for the grid search");
  unc_cmd->add_option("--class-map", unc_args.class_map, "Raw id -> training id map");
  unc_args.projection.add(unc_cmd);

  ProjectArgs proj_args;
  auto* proj_cmd = app.add_subcommand("project", "Render a scan's range image and report projection statistics");
  proj_cmd->add_option("scan", proj_args.scan, "Scan file (.bin)")->required();
  proj_cmd->add_option("--out", proj_args.out, "Image output directory");
  proj_args.projection.add(proj_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) return cmd_train(train_args, train_cmd->count("--width") > 0);
    if (*infer_cmd) return cmd_infer(infer_args);
    if (*eval_cmd) return cmd_eval(eval_args);
    if (*unc_cmd) return cmd_uncertainty(unc_args);
    if (*proj_cmd) return cmd_project(proj_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

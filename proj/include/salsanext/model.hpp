#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salsanext/adf.hpp"
#include "salsanext/layers.hpp"
#include "salsanext/tensor.hpp"

namespace salsanext {

struct ModelConfig {
  int num_classes = 20;
  int base_channels = 32;
  std::vector<int> encoder_channels = {32, 64, 128, 256, 256};
  int num_pool_stages = 4;
  double dropout_rate = 0.2;
  double leaky_slope = 0.01;
  int input_channels = 5;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
  // Per-channel input normalization (x, y, z, intensity, range).
  std::vector<float> input_mean = {10.88f, 0.23f, -1.04f, 0.21f, 12.12f};
  std::vector<float> input_std = {11.47f, 6.91f, 0.86f, 0.16f, 12.32f};

  /// Desk-scale configuration: base 8, channels [8, 16, 32], two pooling stages.
  static ModelConfig micro(int num_classes = 4);

  void validate() const;
  int spatial_divisor() const { return 1 << num_pool_stages; }

  /// key=value text, one entry per line; lists are comma separated.
  std::string to_text() const;
  static ModelConfig parse(const std::string& text);
  static ModelConfig load(const std::string& path);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// conv -> leaky-ReLU -> batch norm; the classification head is a bare conv.
struct ConvUnit {
  std::string name;
  Conv2dParams<float> conv;
  bool has_bn = true;
  BatchNormParams<float> bn;
  int level = 0;  // input resolution is (H, W) / 2^level
};

/// Two parallel paths: 1x1 shortcut and a 3x3 (d=1) then 3x3 (d=2) stack.
struct ContextBlock {
  std::size_t shortcut, first, second;
};

/// 1x1 shortcut plus three parallel 3x3 branches with dilation 1, 2, 3
/// (receptive fields 3, 5, 7), concatenated and fused by a 1x1 conv.
struct FusionBlock {
  std::size_t shortcut;
  std::array<std::size_t, 3> branches;
  std::size_t fuse;
};

struct EncoderStage {
  FusionBlock block;
  bool dropout = true;
  bool pool = true;
};

/// pixel-shuffle (r=2) -> concat(skip) -> fusion block.
struct DecoderStage {
  FusionBlock block;
  bool dropout = true;
  std::size_t skip_stage = 0;
};

enum class TensorRole { Trainable, Buffer };

struct Model {
  ModelConfig config;
  std::vector<ConvUnit> units;
  std::vector<ContextBlock> context;
  std::vector<EncoderStage> encoder;
  std::vector<DecoderStage> decoder;
  std::optional<std::size_t> head;

  using Visitor = std::function<void(const std::string& name, Tensor& tensor, TensorRole role, bool decay)>;
  using ConstVisitor =
      std::function<void(const std::string& name, const Tensor& tensor, TensorRole role, bool decay)>;
  void for_each_tensor(const Visitor& visit);
  void for_each_tensor(const ConstVisitor& visit) const;

  /// One line per structural block with its dropout flag, in network order.
  struct BlockInfo {
    std::string name;
    bool dropout;
  };
  std::vector<BlockInfo> blocks() const;
};

Model build_model(const ModelConfig& cfg, std::uint64_t seed);

struct ForwardOptions {
  Mode norm = Mode::Eval;              // batch statistics vs running statistics
  bool dropout = false;                // sample dropout masks
  std::optional<double> dropout_rate;  // overrides the configured rate
  std::uint64_t seed = 0;

  static ForwardOptions eval() { return {}; }
  static ForwardOptions train(std::uint64_t seed) { return {Mode::Train, true, std::nullopt, seed}; }
  /// Running statistics with dropout active (MC-dropout sampling).
  static ForwardOptions mc_dropout(std::uint64_t seed, std::optional<double> rate = std::nullopt) {
    return {Mode::Eval, true, rate, seed};
  }
};

/// Class probabilities (N, num_classes, H, W) from a raw (N, 5, H, W) range image batch.
/// Pixels whose range channel is negative are treated as empty.
Tensor forward(const Model& model, const Tensor& input, const ForwardOptions& options = {});
Tensor forward(const Model& model, const Tensor& input, Mode mode, std::uint64_t seed);

/// Normalized network input with empty pixels zeroed.
Tensor normalize_input(const ModelConfig& cfg, const Tensor& input);

struct UnitGradients {
  Tensor kernel, bias, gamma, beta;
};

struct Gradients {
  std::vector<UnitGradients> units;
};

/// Activation caches recorded by forward_train and consumed by backward.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(Tape&&) noexcept;
  Tape& operator=(Tape&&) noexcept;
  bool recorded() const;
  struct State;

 private:
  friend Tensor forward_train(Model&, const Tensor&, std::uint64_t, Tape&);
  friend Gradients backward(const Model&, Tape&, const Tensor&);
  std::unique_ptr<State> state_;
};

/// Train-mode forward that records the tape and advances batch-norm running statistics.
Tensor forward_train(Model& model, const Tensor& input, std::uint64_t seed, Tape& tape);

/// Gradients of every trainable tensor given d(loss)/d(probabilities).
Gradients backward(const Model& model, Tape& tape, const Tensor& grad_probs);

Gradients zero_gradients(const Model& model);

/// Aleatoric propagation: input variances (raw units) through every layer in eval mode.
GaussianTensor adf_forward(const Model& model, const GaussianTensor& input, double variance_floor = kDefaultVarianceFloor);

std::int64_t count_parameters(const Model& model);
/// 2 x multiply-accumulates over conv layers for an (H, W) input; pooling,
/// activations and normalization are not counted.
std::int64_t count_flops(const Model& model, int height, int width);

std::vector<std::uint8_t> save_checkpoint(const Model& model);
Model load_checkpoint(std::span<const std::uint8_t> bytes);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace salsanext

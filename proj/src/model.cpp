#include "salsanext/model.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "salsanext/config.hpp"
#include "salsanext/random.hpp"

namespace salsanext {

namespace {
constexpr Index kChannelRangeIndex = 4;  // empty pixels carry a negative range
}  // namespace

// ---------------------------------------------------------------------------
// ModelConfig

ModelConfig ModelConfig::micro(int num_classes) {
  ModelConfig cfg;
  cfg.num_classes = num_classes;
  cfg.base_channels = 8;
  cfg.encoder_channels = {8, 16, 32};
  cfg.num_pool_stages = 2;
  return cfg;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::Config, "model config: " + why); };
  if (num_classes < 1) fail("num_classes must be positive");
  if (input_channels < 1) fail("input_channels must be positive");
  if (encoder_channels.size() < 2) fail("encoder_channels needs at least two entries");
  if (base_channels != encoder_channels.front()) fail("base_channels must equal encoder_channels[0]");
  for (std::size_t i = 0; i < encoder_channels.size(); ++i) {
    if (encoder_channels[i] < 1) fail("channel widths must be positive");
    if (i > 0 && encoder_channels[i] < encoder_channels[i - 1]) fail("encoder_channels must be non-decreasing");
  }
  if (num_pool_stages < 0 || num_pool_stages > static_cast<int>(encoder_channels.size()) - 1)
    fail("num_pool_stages must lie in [0, len(encoder_channels) - 1]");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
  if (!(leaky_slope >= 0.0 && leaky_slope <= 1.0)) fail("leaky_slope must lie in [0, 1]");
  if (!(bn_eps > 0.0) || !(bn_momentum >= 0.0 && bn_momentum <= 1.0)) fail("invalid batch-norm constants");
  if (static_cast<int>(input_mean.size()) != input_channels || static_cast<int>(input_std.size()) != input_channels)
    fail("input_mean/input_std need one entry per input channel");
  for (float s : input_std)
    if (!(s > 0.f)) fail("input_std entries must be positive");
  // Decoder channel bookkeeping: pixel-shuffle needs C divisible by 4.
  int in = encoder_channels.back();
  for (int j = num_pool_stages; j >= 1; --j) {
    if (in % 4 != 0) fail("decoder input width " + std::to_string(in) + " is not divisible by 4");
    if (encoder_channels[j] % 2 != 0) fail("skip width must be even");
    in = encoder_channels[j] / 2;
  }
}

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os << "num_classes=" << num_classes << '\n'
     << "base_channels=" << base_channels << '\n'
     << "encoder_channels=" << join_list(encoder_channels) << '\n'
     << "num_pool_stages=" << num_pool_stages << '\n'
     << "dropout_rate=" << format_number(dropout_rate) << '\n'
     << "leaky_slope=" << format_number(leaky_slope) << '\n'
     << "input_channels=" << input_channels << '\n'
     << "bn_eps=" << format_number(bn_eps) << '\n'
     << "bn_momentum=" << format_number(bn_momentum) << '\n'
     << "input_mean=" << join_list(input_mean) << '\n'
     << "input_std=" << join_list(input_std) << '\n';
  return os.str();
}

ModelConfig ModelConfig::parse(const std::string& text) {
  const auto kv = KeyValueConfig::parse(text);
  ModelConfig cfg;
  cfg.num_classes = kv.get_int("num_classes", cfg.num_classes);
  cfg.encoder_channels = kv.get_int_list("encoder_channels", cfg.encoder_channels);
  cfg.base_channels = kv.get_int("base_channels", cfg.encoder_channels.front());
  cfg.num_pool_stages = kv.get_int("num_pool_stages", cfg.num_pool_stages);
  cfg.dropout_rate = kv.get_double("dropout_rate", cfg.dropout_rate);
  cfg.leaky_slope = kv.get_double("leaky_slope", cfg.leaky_slope);
  cfg.input_channels = kv.get_int("input_channels", cfg.input_channels);
  cfg.bn_eps = kv.get_double("bn_eps", cfg.bn_eps);
  cfg.bn_momentum = kv.get_double("bn_momentum", cfg.bn_momentum);
  cfg.input_mean = kv.get_float_list("input_mean", cfg.input_mean);
  cfg.input_std = kv.get_float_list("input_std", cfg.input_std);
  kv.reject_unknown({"num_classes", "encoder_channels", "base_channels", "num_pool_stages", "dropout_rate",
                     "leaky_slope", "input_channels", "bn_eps", "bn_momentum", "input_mean", "input_std"});
  cfg.validate();
  return cfg;
}

ModelConfig ModelConfig::load(const std::string& path) { return parse(read_text_file(path)); }

// ---------------------------------------------------------------------------
// Assembly

namespace {

class Builder {
 public:
  Builder(Model& model, std::uint64_t seed) : model_(model), rng_(seed) {}

  std::size_t unit(std::string name, int cin, int cout, int k, int dilation, int level, bool bn = true) {
    ConvUnit u;
    u.name = std::move(name);
    u.level = level;
    u.has_bn = bn;
    u.conv.dilation = dilation;
    u.conv.kernel = Tensor({cout, cin, k, k});
    u.conv.bias = Tensor({cout});
    const double fan_in = static_cast<double>(cin) * k * k;
    const double bound = std::sqrt(3.0 / fan_in);
    for (Index i = 0; i < u.conv.kernel.size(); ++i) u.conv.kernel[i] = static_cast<float>(rng_.uniform(-bound, bound));
    const double bias_bound = 1.0 / std::sqrt(fan_in);
    for (Index i = 0; i < u.conv.bias.size(); ++i) u.conv.bias[i] = static_cast<float>(rng_.uniform(-bias_bound, bias_bound));
    if (bn) {
      u.bn = BatchNormParams<float>::identity(cout);
      u.bn.eps = static_cast<float>(model_.config.bn_eps);
      u.bn.momentum = static_cast<float>(model_.config.bn_momentum);
    }
    model_.units.push_back(std::move(u));
    return model_.units.size() - 1;
  }

  ContextBlock context(const std::string& name, int cin, int cout) {
    ContextBlock b{};
    b.shortcut = unit(name + ".shortcut", cin, cout, 1, 1, 0);
    b.first = unit(name + ".conv_d1", cout, cout, 3, 1, 0);
    b.second = unit(name + ".conv_d2", cout, cout, 3, 2, 0);
    return b;
  }

  FusionBlock fusion(const std::string& name, int cin, int cout, int level) {
    FusionBlock b{};
    b.shortcut = unit(name + ".shortcut", cin, cout, 1, 1, level);
    for (int d = 1; d <= 3; ++d)
      b.branches[static_cast<std::size_t>(d - 1)] = unit(name + ".branch_d" + std::to_string(d), cin, cout, 3, d, level);
    b.fuse = unit(name + ".fuse", 3 * cout, cout, 1, 1, level);
    return b;
  }

 private:
  Model& model_;
  Rng rng_;
};

}  // namespace

Model build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.config = cfg;
  Builder b(m, seed);
  const auto& ch = cfg.encoder_channels;
  const int pools = cfg.num_pool_stages;

  m.context.push_back(b.context("context1", cfg.input_channels, cfg.base_channels));
  m.context.push_back(b.context("context2", cfg.base_channels, cfg.base_channels));

  int level = 0;
  for (std::size_t i = 1; i < ch.size(); ++i) {
    EncoderStage stage;
    stage.block = b.fusion("encoder" + std::to_string(i), ch[i - 1], ch[i], level);
    stage.pool = static_cast<int>(i) <= pools;
    stage.dropout = i != 1;  // first network stage stays deterministic
    m.encoder.push_back(stage);
    if (stage.pool) ++level;
  }

  int in = ch.back();
  for (int j = pools; j >= 1; --j) {
    DecoderStage stage;
    const int skip = ch[static_cast<std::size_t>(j)];
    const int out = skip / 2;
    stage.block = b.fusion("decoder" + std::to_string(j), in / 4 + skip, out, j - 1);
    stage.skip_stage = static_cast<std::size_t>(j - 1);
    stage.dropout = j != 1;  // last network stage stays deterministic
    m.decoder.push_back(stage);
    in = out;
  }
  m.head = b.unit("head", in, cfg.num_classes, 1, 1, 0, false);
  return m;
}

void Model::for_each_tensor(const Visitor& visit) {
  for (auto& u : units) {
    visit(u.name + ".kernel", u.conv.kernel, TensorRole::Trainable, true);
    visit(u.name + ".bias", u.conv.bias, TensorRole::Trainable, false);
    if (!u.has_bn) continue;
    visit(u.name + ".bn.gamma", u.bn.gamma, TensorRole::Trainable, false);
    visit(u.name + ".bn.beta", u.bn.beta, TensorRole::Trainable, false);
    visit(u.name + ".bn.running_mean", u.bn.running_mean, TensorRole::Buffer, false);
    visit(u.name + ".bn.running_var", u.bn.running_var, TensorRole::Buffer, false);
  }
}

void Model::for_each_tensor(const ConstVisitor& visit) const {
  const_cast<Model*>(this)->for_each_tensor(
      Visitor([&](const std::string& name, Tensor& t, TensorRole role, bool decay) { visit(name, t, role, decay); }));
}

std::vector<Model::BlockInfo> Model::blocks() const {
  std::vector<BlockInfo> out;
  for (std::size_t i = 0; i < context.size(); ++i) out.push_back({"context" + std::to_string(i + 1), false});
  for (std::size_t i = 0; i < encoder.size(); ++i) out.push_back({"encoder" + std::to_string(i + 1), encoder[i].dropout});
  for (std::size_t i = 0; i < decoder.size(); ++i)
    out.push_back({"decoder" + std::to_string(decoder[i].skip_stage + 1), decoder[i].dropout});
  if (head) out.push_back({"head", false});
  return out;
}

// ---------------------------------------------------------------------------
// Forward / backward

struct Tape::State {
  struct UnitCache {
    Conv2dCache<float> conv;
    ActivationCache<float> act;
    BatchNormCache<float> bn;
  };
  std::vector<UnitCache> units;
  std::vector<DropoutCache<float>> encoder_dropout;
  std::vector<PoolCache> encoder_pool;
  std::vector<DropoutCache<float>> decoder_dropout;
  std::vector<Index> decoder_up_channels;
  std::vector<Index> skip_channels;
  ActivationCache<float> softmax;
  bool recorded = false;
};

Tape::Tape() : state_(std::make_unique<State>()) {}
Tape::~Tape() = default;
Tape::Tape(Tape&&) noexcept = default;
Tape& Tape::operator=(Tape&&) noexcept = default;
bool Tape::recorded() const { return state_ && state_->recorded; }

Tensor normalize_input(const ModelConfig& cfg, const Tensor& input) {
  require_rank4(input, "model input");
  if (input.channels() != cfg.input_channels)
    throw Error(ErrorCode::Dimension, "model expects " + std::to_string(cfg.input_channels) + " input channels, got " +
                                          std::to_string(input.channels()));
  Tensor out(input.shape());
  const Index plane = input.plane();
  const Index channels = input.channels();
  const bool has_range = channels > kChannelRangeIndex;
  for (Index n = 0; n < input.batch(); ++n) {
    const float* range = input.data() + (n * channels + kChannelRangeIndex) * plane;
    for (Index c = 0; c < channels; ++c) {
      const float* src = input.data() + (n * channels + c) * plane;
      float* dst = out.data() + (n * channels + c) * plane;
      const float mean = cfg.input_mean[static_cast<std::size_t>(c)];
      const float inv = 1.0f / cfg.input_std[static_cast<std::size_t>(c)];
      for (Index i = 0; i < plane; ++i) dst[i] = (has_range && range[i] < 0.f) ? 0.f : (src[i] - mean) * inv;
    }
  }
  return out;
}

namespace {

void check_spatial(const Model& model, const Tensor& input) {
  require_rank4(input, "model input");
  const int div = model.config.spatial_divisor();
  if (input.height() % div != 0 || input.width() % div != 0)
    throw Error(ErrorCode::Dimension, "input " + std::to_string(input.height()) + "x" + std::to_string(input.width()) +
                                          " is not divisible by " + std::to_string(div));
}

std::uint64_t encoder_stream(std::size_t i) { return 1000 + i; }
std::uint64_t decoder_stream(std::size_t j) { return 2000 + j; }

class Runner {
 public:
  Runner(const Model& model, const ForwardOptions& options, Tape::State* tape, Model* mutable_model)
      : model_(model), options_(options), tape_(tape), mutable_(mutable_model),
        slope_(static_cast<float>(model.config.leaky_slope)),
        rate_(options.dropout_rate.value_or(model.config.dropout_rate)) {
    if (tape_) {
      tape_->units.assign(model.units.size(), {});
      tape_->encoder_dropout.assign(model.encoder.size(), {});
      tape_->encoder_pool.assign(model.encoder.size(), {});
      tape_->decoder_dropout.assign(model.decoder.size(), {});
      tape_->decoder_up_channels.assign(model.decoder.size(), 0);
      tape_->skip_channels.assign(model.encoder.size(), 0);
    }
  }

  Tensor run(const Tensor& input) {
    check_spatial(model_, input);
    Tensor x = normalize_input(model_.config, input);
    for (const auto& block : model_.context) x = context(block, x);
    std::vector<Tensor> skips(model_.encoder.size());
    for (std::size_t i = 0; i < model_.encoder.size(); ++i) {
      const auto& stage = model_.encoder[i];
      Tensor y = fusion(stage.block, x);
      skips[i] = y;
      if (tape_) tape_->skip_channels[i] = y.channels();
      if (stage.dropout) y = dropout(y, encoder_stream(i), tape_ ? &tape_->encoder_dropout[i] : nullptr);
      if (stage.pool) y = avg_pool2(y, tape_ ? &tape_->encoder_pool[i] : nullptr);
      x = std::move(y);
    }
    for (std::size_t j = 0; j < model_.decoder.size(); ++j) {
      const auto& stage = model_.decoder[j];
      Tensor up = pixel_shuffle(x, 2);
      if (tape_) tape_->decoder_up_channels[j] = up.channels();
      Tensor cat = concat_channels<float>({&up, &skips[stage.skip_stage]});
      Tensor y = fusion(stage.block, cat);
      if (stage.dropout) y = dropout(y, decoder_stream(j), tape_ ? &tape_->decoder_dropout[j] : nullptr);
      x = std::move(y);
    }
    if (model_.head) x = unit(*model_.head, x);
    Tensor probs = softmax(x, tape_ ? &tape_->softmax : nullptr);
    if (tape_) tape_->recorded = true;
    return probs;
  }

 private:
  Tensor unit(std::size_t id, const Tensor& x) {
    const ConvUnit& u = model_.units[id];
    auto* cache = tape_ ? &tape_->units[id] : nullptr;
    Tensor y = conv2d(x, u.conv, cache ? &cache->conv : nullptr);
    if (!u.has_bn) return y;
    y = leaky_relu(y, slope_, cache ? &cache->act : nullptr);
    if (options_.norm == Mode::Train && mutable_) return batch_norm_train(y, mutable_->units[id].bn, cache ? &cache->bn : nullptr);
    return batch_norm(y, u.bn, options_.norm, cache ? &cache->bn : nullptr);
  }

  Tensor context(const ContextBlock& b, const Tensor& x) {
    Tensor s = unit(b.shortcut, x);
    Tensor a = unit(b.first, s);
    Tensor out = unit(b.second, a);
    out.array() += s.array();
    return out;
  }

  Tensor fusion(const FusionBlock& b, const Tensor& x) {
    Tensor s = unit(b.shortcut, x);
    std::array<Tensor, 3> branch;
    for (std::size_t i = 0; i < 3; ++i) branch[i] = unit(b.branches[i], x);
    Tensor out = unit(b.fuse, concat_channels<float>({&branch[0], &branch[1], &branch[2]}));
    out.array() += s.array();
    return out;
  }

  Tensor dropout(const Tensor& x, std::uint64_t stream, DropoutCache<float>* cache) {
    const Mode mode = options_.dropout ? Mode::Train : Mode::Eval;
    return channel_dropout(x, rate_, derive_seed(options_.seed, stream), mode, cache);
  }

  const Model& model_;
  ForwardOptions options_;
  Tape::State* tape_;
  Model* mutable_;
  float slope_;
  double rate_;
};

class BackwardRunner {
 public:
  BackwardRunner(const Model& model, Tape::State& tape)
      : model_(model), tape_(tape), slope_(static_cast<float>(model.config.leaky_slope)), grads_(zero_gradients(model)) {}

  Gradients run(const Tensor& grad_probs) {
    Tensor d = softmax_backward(grad_probs, tape_.softmax);
    if (model_.head) d = unit(*model_.head, d);
    std::vector<Tensor> skip_grads(model_.encoder.size());
    for (std::size_t jj = model_.decoder.size(); jj-- > 0;) {
      const auto& stage = model_.decoder[jj];
      if (stage.dropout) d = channel_dropout_backward(d, tape_.decoder_dropout[jj]);
      Tensor dcat = fusion(stage.block, d);
      auto parts = split_channels(dcat, {tape_.decoder_up_channels[jj], tape_.skip_channels[stage.skip_stage]});
      skip_grads[stage.skip_stage] = std::move(parts[1]);
      d = pixel_shuffle_backward(parts[0], 2);
    }
    for (std::size_t ii = model_.encoder.size(); ii-- > 0;) {
      const auto& stage = model_.encoder[ii];
      if (stage.pool) d = avg_pool2_backward(d, tape_.encoder_pool[ii]);
      if (stage.dropout) d = channel_dropout_backward(d, tape_.encoder_dropout[ii]);
      if (!skip_grads[ii].empty()) d.array() += skip_grads[ii].array();
      d = fusion(stage.block, d);
    }
    for (std::size_t c = model_.context.size(); c-- > 0;) d = context(model_.context[c], d);
    tape_.recorded = false;
    return std::move(grads_);
  }

 private:
  Tensor unit(std::size_t id, const Tensor& dy) {
    const ConvUnit& u = model_.units[id];
    auto& cache = tape_.units[id];
    auto& g = grads_.units[id];
    Tensor d = dy;
    if (u.has_bn) {
      auto bn = batch_norm_backward(u.bn, d, cache.bn);
      g.gamma.array() += bn.gamma.array();
      g.beta.array() += bn.beta.array();
      d = leaky_relu_backward(slope_, bn.input, cache.act);
    }
    auto conv = conv2d_backward(u.conv, d, cache.conv);
    g.kernel.array() += conv.kernel.array();
    g.bias.array() += conv.bias.array();
    return std::move(conv.input);
  }

  Tensor context(const ContextBlock& b, const Tensor& dout) {
    Tensor da = unit(b.second, dout);
    Tensor ds = unit(b.first, da);
    ds.array() += dout.array();
    return unit(b.shortcut, ds);
  }

  Tensor fusion(const FusionBlock& b, const Tensor& dout) {
    Tensor dcat = unit(b.fuse, dout);
    const Index width = model_.units[b.branches[0]].conv.out_channels();
    auto parts = split_channels(dcat, {width, width, width});
    Tensor dx = unit(b.shortcut, dout);
    for (std::size_t i = 0; i < 3; ++i) dx.array() += unit(b.branches[i], parts[i]).array();
    return dx;
  }

  const Model& model_;
  Tape::State& tape_;
  float slope_;
  Gradients grads_;
};

}  // namespace

Tensor forward(const Model& model, const Tensor& input, const ForwardOptions& options) {
  return Runner(model, options, nullptr, nullptr).run(input);
}

Tensor forward(const Model& model, const Tensor& input, Mode mode, std::uint64_t seed) {
  return forward(model, input, mode == Mode::Train ? ForwardOptions::train(seed) : ForwardOptions::eval());
}

Tensor forward_train(Model& model, const Tensor& input, std::uint64_t seed, Tape& tape) {
  return Runner(model, ForwardOptions::train(seed), tape.state_.get(), &model).run(input);
}

Gradients backward(const Model& model, Tape& tape, const Tensor& grad_probs) {
  if (!tape.recorded()) throw Error(ErrorCode::StaleState, "backward needs a tape recorded by forward_train");
  return BackwardRunner(model, *tape.state_).run(grad_probs);
}

Gradients zero_gradients(const Model& model) {
  Gradients g;
  g.units.reserve(model.units.size());
  for (const auto& u : model.units) {
    UnitGradients ug{Tensor::zeros_like(u.conv.kernel), Tensor::zeros_like(u.conv.bias), {}, {}};
    if (u.has_bn) {
      ug.gamma = Tensor::zeros_like(u.bn.gamma);
      ug.beta = Tensor::zeros_like(u.bn.beta);
    }
    g.units.push_back(std::move(ug));
  }
  return g;
}

// ---------------------------------------------------------------------------
// ADF

namespace {

class AdfRunner {
 public:
  AdfRunner(const Model& model, double floor)
      : model_(model), floor_(floor), slope_(static_cast<float>(model.config.leaky_slope)) {}

  GaussianTensor run(const GaussianTensor& input) {
    adf::require_valid(input);
    check_spatial(model_, input.mean);
    GaussianTensor x{normalize_input(model_.config, input.mean), Tensor(input.shape())};
    const ModelConfig& cfg = model_.config;
    const Index plane = input.mean.plane();
    const Index channels = input.mean.channels();
    for (Index n = 0; n < input.mean.batch(); ++n) {
      const float* range = input.mean.data() + (n * channels + kChannelRangeIndex) * plane;
      for (Index c = 0; c < channels; ++c) {
        const float inv = 1.0f / cfg.input_std[static_cast<std::size_t>(c)];
        const float* src = input.variance.data() + (n * channels + c) * plane;
        float* dst = x.variance.data() + (n * channels + c) * plane;
        for (Index i = 0; i < plane; ++i) dst[i] = (channels > kChannelRangeIndex && range[i] < 0.f) ? 0.f : src[i] * inv * inv;
      }
    }
    for (const auto& block : model_.context) x = context(block, x);
    std::vector<GaussianTensor> skips(model_.encoder.size());
    for (std::size_t i = 0; i < model_.encoder.size(); ++i) {
      const auto& stage = model_.encoder[i];
      GaussianTensor y = fusion(stage.block, x);
      skips[i] = y;
      if (stage.pool) y = adf::avg_pool2(y, floor_);
      x = std::move(y);
    }
    for (const auto& stage : model_.decoder) {
      GaussianTensor up = adf::pixel_shuffle(x, 2);
      x = fusion(stage.block, adf::concat_channels<float>({&up, &skips[stage.skip_stage]}));
    }
    if (model_.head) x = adf::conv2d(x, model_.units[*model_.head].conv, floor_);
    return adf::softmax(x, floor_);
  }

 private:
  GaussianTensor unit(std::size_t id, const GaussianTensor& x) {
    const ConvUnit& u = model_.units[id];
    GaussianTensor y = adf::conv2d(x, u.conv, floor_);
    if (!u.has_bn) return y;
    return adf::batch_norm(adf::leaky_relu(y, slope_, floor_), u.bn, floor_);
  }

  GaussianTensor context(const ContextBlock& b, const GaussianTensor& x) {
    GaussianTensor s = unit(b.shortcut, x);
    return adf::add(unit(b.second, unit(b.first, s)), s);
  }

  GaussianTensor fusion(const FusionBlock& b, const GaussianTensor& x) {
    GaussianTensor s = unit(b.shortcut, x);
    std::array<GaussianTensor, 3> branch;
    for (std::size_t i = 0; i < 3; ++i) branch[i] = unit(b.branches[i], x);
    return adf::add(unit(b.fuse, adf::concat_channels<float>({&branch[0], &branch[1], &branch[2]})), s);
  }

  const Model& model_;
  double floor_;
  float slope_;
};

}  // namespace

GaussianTensor adf_forward(const Model& model, const GaussianTensor& input, double variance_floor) {
  return AdfRunner(model, variance_floor).run(input);
}

// ---------------------------------------------------------------------------
// Counting

std::int64_t count_parameters(const Model& model) {
  std::int64_t total = 0;
  model.for_each_tensor(Model::ConstVisitor([&](const std::string&, const Tensor& t, TensorRole role, bool) {
    if (role == TensorRole::Trainable) total += t.size();
  }));
  return total;
}

std::int64_t count_flops(const Model& model, int height, int width) {
  std::int64_t total = 0;
  for (const auto& u : model.units) {
    const std::int64_t h = height >> u.level, w = width >> u.level;
    const std::int64_t k = u.conv.kernel_size();
    total += 2 * k * k * u.conv.in_channels() * u.conv.out_channels() * h * w;
  }
  return total;
}

}  // namespace salsanext

#include <algorithm>

#include "doctest.h"
#include "oracles.hpp"
#include "salsanext/model.hpp"
#include "salsanext/pipeline.hpp"
#include "salsanext/tensor_io.hpp"
#include "salsanext/trainer.hpp"

using namespace salsanext;

namespace {

Tensor random_input(Rng& rng, Index n, Index h, Index w) {
  Tensor x({n, 5, h, w});
  for (Index i = 0; i < x.size(); ++i) x[i] = static_cast<float>(rng.uniform(-1.0, 20.0));
  return x;
}

ConvUnit bare_unit(Index cin, Index cout, Index k, bool bias) {
  ConvUnit u;
  u.name = "single";
  u.conv.kernel = Tensor({cout, cin, k, k});
  if (bias) u.conv.bias = Tensor({cout});
  u.has_bn = false;
  return u;
}

}  // namespace

TEST_CASE("shape contract, softmax and determinism") {
  const Model m = build_model(ModelConfig::micro(4), 3);
  Rng rng(40);
  const Tensor x = random_input(rng, 1, 64, 128);
  const Tensor y = forward(m, x);
  CHECK(y.shape() == Shape{1, 4, 64, 128});
  const Tensor again = forward(m, x);
  CHECK(std::equal(y.data(), y.data() + y.size(), again.data()));
  for (Index p = 0; p < 64 * 128; p += 97) {
    double s = 0;
    for (Index c = 0; c < 4; ++c) s += y[c * 64 * 128 + p];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
  }

  const Tensor a = forward(m, x, Mode::Train, 1), b = forward(m, x, Mode::Train, 2), a2 = forward(m, x, Mode::Train, 1);
  CHECK(a == a2);
  CHECK_FALSE(a == b);

  const Model same = build_model(ModelConfig::micro(4), 3);
  CHECK(save_checkpoint(same) == save_checkpoint(m));
  const Model other = build_model(ModelConfig::micro(4), 4);
  CHECK_FALSE(save_checkpoint(other) == save_checkpoint(m));

  // Default config, zeros input.
  const Model full = build_model(ModelConfig{}, 1);
  const Tensor z = forward(full, Tensor({1, 5, 16, 32}));
  CHECK(z.shape() == Shape{1, 20, 16, 32});
  for (Index p = 0; p < 16 * 32; ++p) {
    double s = 0;
    for (Index c = 0; c < 20; ++c) s += z[c * 16 * 32 + p];
    REQUIRE(s == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("spatial divisibility") {
  const Model m = build_model(ModelConfig::micro(4), 3);
  CHECK_THROWS_AS(forward(m, Tensor({1, 5, 64, 126})), Error);
  CHECK_NOTHROW(forward(m, Tensor({1, 5, 4, 8})));
  const Model full = build_model(ModelConfig{}, 1);
  CHECK(full.config.spatial_divisor() == 16);
  CHECK_THROWS_AS(forward(full, Tensor({1, 5, 16, 24})), Error);
  CHECK_THROWS_AS(forward(full, Tensor({1, 5, 8, 32})), Error);
  // Four halving pools give the 16x per-axis bottleneck, four x2 shuffles restore it.
  const auto pools = std::count_if(full.encoder.begin(), full.encoder.end(), [](const EncoderStage& s) { return s.pool; });
  CHECK((1 << pools) == 16);
  CHECK(full.decoder.size() == 4);
  CHECK(forward(full, Tensor({1, 5, 16, 32})).shape() == Shape{1, 20, 16, 32});
}

TEST_CASE("config validation") {
  ModelConfig c = ModelConfig::micro(4);
  c.num_pool_stages = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  c = ModelConfig::micro(4);
  c.encoder_channels = {16, 8, 32};
  CHECK_THROWS_AS(c.validate(), Error);
  c = ModelConfig::micro(4);
  c.dropout_rate = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(ModelConfig::parse(ModelConfig{}.to_text()) == ModelConfig{});
  CHECK(ModelConfig::parse(ModelConfig::micro(3).to_text()) == ModelConfig::micro(3));
  CHECK_THROWS_AS(ModelConfig::parse("num_classes=abc\n"), Error);
  CHECK_THROWS_AS(ModelConfig::parse("no_such_key=1\n"), Error);
}

TEST_CASE("parameter and FLOP counting") {
  Model single;
  CHECK(count_parameters(single) == 0);
  CHECK(count_flops(single, 64, 2048) == 0);
  single.units.push_back(bare_unit(5, 32, 3, true));
  CHECK(count_parameters(single) == 1472);
  Model one;
  one.units.push_back(bare_unit(1, 1, 1, false));
  CHECK(count_flops(one, 4, 4) == 32);

  // Independent recount: conv k^2 Cin Cout + Cout, batch norm 2C.
  const Model full = build_model(ModelConfig{}, 1);
  std::int64_t expected = 0;
  for (const auto& u : full.units) {
    expected += u.conv.kernel.size() + u.conv.bias.size();
    if (u.has_bn) expected += 2 * u.conv.kernel.shape()[0];
  }
  CHECK(count_parameters(full) == expected);
  CHECK(count_parameters(full) == 6200148);
  CHECK(std::abs(count_parameters(full) - 6.73e6) / 6.73e6 <= 0.15);
  CHECK(count_flops(full, 64, 2048) == 135031422976LL);
}

TEST_CASE("dropout placement audit") {
  for (const auto& cfg : {ModelConfig{}, ModelConfig::micro(4)}) {
    const auto blocks = build_model(cfg, 1).blocks();
    REQUIRE(blocks.size() >= 4);
    CHECK_FALSE(blocks.front().dropout);
    CHECK_FALSE(blocks.back().dropout);
    for (const auto& b : blocks) {
      const bool edge = b.name.rfind("context", 0) == 0 || b.name == "encoder1" || b.name == "decoder1" || b.name == "head";
      CHECK_MESSAGE(b.dropout == !edge, b.name);
    }
  }
}

TEST_CASE("checkpoint round trip and errors") {
  Model m = build_model(ModelConfig::micro(4), 9);
  // Move running statistics away from their defaults.
  Rng rng(41);
  Tape tape;
  forward_train(m, random_input(rng, 2, 16, 32), 5, tape);
  const auto blob = save_checkpoint(m);
  const Model back = load_checkpoint(blob);
  CHECK(back.config == m.config);
  CHECK(save_checkpoint(back) == blob);
  const Tensor x = random_input(rng, 1, 16, 32);
  CHECK(forward(back, x) == forward(m, x));

  auto expect = [](std::vector<std::uint8_t> bytes, ErrorCode code) {
    try {
      load_checkpoint(bytes);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == code);
    }
  };
  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, blob.size() / 2, blob.size() - 1})
    expect(std::vector<std::uint8_t>(blob.begin(), blob.begin() + static_cast<std::ptrdiff_t>(cut)),
           ErrorCode::CorruptCheckpoint);
  auto newer = blob;
  newer[4] = static_cast<std::uint8_t>(kCheckpointVersion + 1);
  expect(newer, ErrorCode::IncompatibleCheckpoint);
  auto magic = blob;
  magic[0] = 'X';
  expect(magic, ErrorCode::IncompatibleCheckpoint);
  auto trailing = blob;
  trailing.push_back(0);
  expect(trailing, ErrorCode::CorruptCheckpoint);

  NamedTensors named{{"a", Tensor({2, 3}, 1.5f)}, {"b", Tensor({4})}};
  const auto t = load_tensors(save_tensors(named));
  REQUIRE(t.size() == 2);
  CHECK(t[0].first == "a");
  CHECK(t[0].second == named[0].second);
}

TEST_CASE("every trainable tensor receives gradient") {
  Model m = build_model(ModelConfig::micro(4), 11);
  Rng rng(42);
  const Tensor x = random_input(rng, 1, 16, 32);
  Tape tape;
  const Tensor probs = forward_train(m, x, 3, tape);
  std::vector<ClassId> labels(16 * 32);
  for (auto& l : labels) l = static_cast<ClassId>(rng.below(4));
  const auto loss = total_loss(probs, labels, std::vector<double>(4, 1.0));
  const Gradients g = backward(m, tape, loss.gradient);
  REQUIRE(g.units.size() == m.units.size());
  for (std::size_t i = 0; i < m.units.size(); ++i) {
    CHECK_MESSAGE(g.units[i].kernel.array().abs().maxCoeff() > 0, m.units[i].name);
    if (m.units[i].conv.bias.size()) CHECK_MESSAGE(g.units[i].bias.array().abs().maxCoeff() > 0, m.units[i].name);
    if (m.units[i].has_bn) {
      CHECK_MESSAGE(g.units[i].gamma.array().abs().maxCoeff() > 0, m.units[i].name);
      CHECK_MESSAGE(g.units[i].beta.array().abs().maxCoeff() > 0, m.units[i].name);
    }
  }
}

TEST_CASE("micro model overfits one synthetic image") {
  auto spec = SceneSpec::four_class();
  spec.scanner.rows = 32;
  spec.scanner.cols = 128;
  const LidarScan scan = generate_synthetic_scene(5, spec);
  const auto projection = ProjectionConfig::from_degrees(128, 32, spec.scanner.fov_up_deg, spec.scanner.fov_down_deg);
  const auto batch = make_batch(std::span(&scan, 1), projection);
  Model m = build_model(ModelConfig::micro(4), 12);
  TrainConfig cfg;
  cfg.batch_size = 1;
  SgdState state;
  const auto weights = training_class_weights(std::span(&scan, 1), 4, true);
  double accuracy = 0;
  for (int step = 0; step < 300 && accuracy < 0.995; ++step) {
    train_step(m, batch, weights, state, cfg, 0.01, derive_seed(1, step));
    if (step % 20 != 19) continue;
    const auto pred = argmax_labels(forward(m, batch.input));
    std::size_t ok = 0, n = 0;
    for (std::size_t p = 0; p < pred.size(); ++p)
      if (batch.valid[p]) {
        ++n;
        ok += pred[p] == batch.labels[p];
      }
    accuracy = double(ok) / double(n);
    MESSAGE("step " << step + 1 << " pixel accuracy " << accuracy);
  }
  CHECK(accuracy >= 0.99);
}

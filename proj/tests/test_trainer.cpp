#include "doctest.h"
#include "oracles.hpp"
#include "salsanext/trainer.hpp"

using namespace salsanext;

namespace {

std::vector<LidarScan> tiny_dataset(int count) {
  auto spec = SceneSpec::four_class();
  spec.scanner.rows = 16;
  spec.scanner.cols = 64;
  std::vector<LidarScan> scans;
  for (int i = 0; i < count; ++i) scans.push_back(generate_synthetic_scene(derive_seed(3, i), spec));
  return scans;
}

ProjectionConfig tiny_projection() { return ProjectionConfig::from_degrees(64, 16, 3.0, -25.0); }

double squared_norm(const Model& m) {
  double s = 0;
  m.for_each_tensor(Model::ConstVisitor([&](const std::string&, const Tensor& t, TensorRole role, bool) {
    if (role == TensorRole::Trainable) s += t.array().cast<double>().square().sum();
  }));
  return s;
}

}  // namespace

TEST_CASE("sgd update examples") {
  Tensor p({3}, 1.0f), buf({3}), g({3});
  g[0] = 0.5f;
  g[1] = -2.0f;
  g[2] = 0.0f;
  sgd_update(p, g, buf, 0.1, 0.0, 0.0);
  CHECK(p[0] == doctest::Approx(1.0 - 0.05));
  CHECK(p[1] == doctest::Approx(1.0 + 0.2));
  CHECK(p[2] == 1.0f);

  Tensor q({1}, 0.0f), b2({1}), c({1}, 1.0f);
  sgd_update(q, c, b2, 1.0, 0.9, 0.0);
  sgd_update(q, c, b2, 1.0, 0.9, 0.0);
  CHECK(q[0] == doctest::Approx(-2.9));

  Tensor r({2}, 3.0f), b3({2});
  sgd_update(r, Tensor({2}), b3, 0.5, 0.0, 0.0);
  CHECK(r[0] == 3.0f);
  sgd_update(r, Tensor({2}), b3, 0.5, 0.0, 0.1);
  CHECK(r[0] == doctest::Approx(3.0 - 0.5 * 0.3));

  CHECK_THROWS_AS(sgd_update(r, Tensor({3}), b3, 0.1, 0.9, 0.0), Error);
}

TEST_CASE("train config") {
  CHECK_NOTHROW(TrainConfig{}.validate());
  TrainConfig c;
  c.momentum = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.learning_rate = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  const auto parsed = TrainConfig::parse("learning_rate=0.02\nbatch_size=4\nepochs=3\n");
  CHECK(parsed.learning_rate == 0.02);
  CHECK(parsed.batch_size == 4);
  CHECK(parsed.epochs == 3);
  CHECK(parsed.momentum == 0.9);
  CHECK_THROWS_AS(TrainConfig::parse("weight_decay=-1\n"), Error);
}

TEST_CASE("class weights follow inverse square-root frequency") {
  const auto scans = tiny_dataset(3);
  std::vector<double> counts(4, 0.0);
  for (const auto& s : scans)
    for (auto l : *s.labels) counts[l] += 1;
  const auto raw = training_class_weights(scans, 4, false);
  const auto norm = training_class_weights(scans, 4, true);
  double total = 0, weighted = 0;
  for (int c = 0; c < 4; ++c) {
    if (counts[c] == 0) continue;
    // f_i is the per-class point count.
    CHECK(raw[c] == doctest::Approx(1.0 / std::sqrt(counts[c])));
    CHECK(norm[c] / norm[0] == doctest::Approx(raw[c] / raw[0]));
    total += counts[c];
    weighted += counts[c] * norm[c];
  }
  CHECK(weighted / total == doctest::Approx(1.0));
}

TEST_CASE("loss decreases, decay and determinism") {
  const auto scans = tiny_dataset(4);
  const auto batch = make_batch(std::span(scans).first(2), tiny_projection());
  CHECK(batch.input.shape() == Shape{2, 5, 16, 64});
  const auto weights = training_class_weights(scans, 4, true);

  Model m = build_model(ModelConfig::micro(4), 21);
  TrainConfig cfg;
  SgdState state;
  double last = evaluate_batch_loss(m, batch, weights, 99).total;
  for (int step = 0; step < 5; ++step) {
    train_step(m, batch, weights, state, cfg, 0.01, derive_seed(5, step));
    const double now = evaluate_batch_loss(m, batch, weights, 99).total;
    CHECK(now < last);
    last = now;
  }

  cfg.batch_size = 2;
  cfg.epochs = 1;
  cfg.seed = 8;
  Model a = build_model(ModelConfig::micro(4), 21), b = build_model(ModelConfig::micro(4), 21);
  const auto log = train(a, scans, tiny_projection(), cfg);
  REQUIRE(log.size() == 1);
  CHECK(log[0].lr == doctest::Approx(0.0099).epsilon(1e-12));
  CHECK(std::isfinite(log[0].loss_total));
  CHECK(log[0].loss_total == doctest::Approx(log[0].loss_wce + log[0].loss_ls));
  CHECK(log[0].train_miou >= 0.0);
  CHECK(log[0].train_miou <= 1.0);
  train(b, scans, tiny_projection(), cfg);
  CHECK(save_checkpoint(a) == save_checkpoint(b));

  cfg.epochs = 3;
  Model c = build_model(ModelConfig::micro(4), 21);
  const auto log3 = train(c, scans, tiny_projection(), cfg);
  CHECK(log3[2].lr == doctest::Approx(0.01 * 0.99 * 0.99 * 0.99));
  const auto line = log3[0].to_json();
  for (const char* key : {"\"epoch\"", "\"lr\"", "\"loss_total\"", "\"loss_wce\"", "\"loss_ls\"", "\"train_miou\""})
    CHECK(line.find(key) != std::string::npos);

  CHECK_THROWS_AS(train(c, std::span<const LidarScan>{}, tiny_projection(), cfg), Error);
}

TEST_CASE("weight decay shrinks parameter norms under zero gradients") {
  Model m = build_model(ModelConfig::micro(4), 22);
  TrainConfig cfg;
  cfg.weight_decay = 1e-2;
  SgdState state;
  const Gradients zero = zero_gradients(m);
  double before = squared_norm(m);
  for (int step = 0; step < 3; ++step) {
    sgd_step(m, zero, state, cfg, 0.1);
    const double after = squared_norm(m);
    CHECK(after < before);
    before = after;
  }
  // Batch-norm scale is not decayed.
  for (const auto& u : m.units)
    if (u.has_bn) CHECK((u.bn.gamma.array() == 1.0f).all());
}

#include "doctest.h"
#include "oracles.hpp"
#include "salsanext/knn.hpp"

using namespace salsanext;

namespace {

struct Fixture {
  LidarScan scan;
  RangeImage img;
  std::vector<ClassId> pixel_labels;
  std::vector<ClassId> point_labels;
};

/// Random points on a 16x32 grid; about 1/3 of the pixels have a second, farther point.
Fixture random_fixture(std::uint64_t seed, ClassId classes) {
  Rng rng(seed);
  Fixture f;
  const auto cfg = ProjectionConfig::from_degrees(32, 16, 3.0, -25.0);
  for (int v = 0; v < 16; ++v)
    for (int u = 0; u < 32; ++u) {
      if (rng.bernoulli(0.1)) continue;
      const int copies = rng.bernoulli(0.3) ? 2 : 1;
      for (int c = 0; c < copies; ++c) {
        const double yaw = M_PI * (1.0 - 2.0 * (u + rng.uniform(0.2, 0.8)) / 32);
        const double pitch = (3.0 - (v + rng.uniform(0.2, 0.8)) * 28.0 / 16) * M_PI / 180;
        const double r = rng.uniform(2.0, 6.0);
        f.scan.points.push_back({static_cast<float>(r * std::cos(pitch) * std::cos(yaw)),
                                 static_cast<float>(r * std::cos(pitch) * std::sin(yaw)),
                                 static_cast<float>(r * std::sin(pitch)), 0.f});
      }
    }
  f.img = build_range_image(f.scan, cfg);
  f.pixel_labels.resize(static_cast<std::size_t>(f.img.plane()));
  for (auto& l : f.pixel_labels) l = static_cast<ClassId>(rng.below(classes));
  f.point_labels = back_project(f.pixel_labels, f.img);
  return f;
}

}  // namespace

TEST_CASE("kNN equals the brute-force oracle") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto f = random_fixture(seed, 4);
    for (int window : {3, 5})
      for (int k : {1, 3, 5})
        for (double cutoff : {0.5, 1.0, 10.0})
          for (auto w : {KnnWeighting::Uniform, KnnWeighting::InverseRangeGap}) {
            KnnConfig cfg;
            cfg.window = window;
            cfg.k = k;
            cfg.cutoff = cutoff;
            cfg.weighting = w;
            const auto got = knn_filter(f.img, f.pixel_labels, f.point_labels, f.scan.points, cfg);
            const auto want = oracle::knn_brute_force(f.img, f.pixel_labels, f.point_labels, f.scan.points, cfg, 4);
            REQUIRE(got == want);
          }
  }
}

TEST_CASE("kNN examples") {
  const auto cfg = ProjectionConfig::from_degrees(16, 8, 3.0, -25.0);
  LidarScan scan;
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 16; ++u) {
      const double yaw = M_PI * (1.0 - 2.0 * (u + 0.5) / 16);
      const double pitch = (3.0 - (v + 0.5) * 28.0 / 8) * M_PI / 180;
      const double r = 5.0 / std::cos(pitch);  // equal range along each row is enough here
      scan.points.push_back({static_cast<float>(r * std::cos(pitch) * std::cos(yaw)),
                             static_cast<float>(r * std::cos(pitch) * std::sin(yaw)),
                             static_cast<float>(r * std::sin(pitch)), 0.f});
    }
  const auto img = build_range_image(scan, cfg);
  REQUIRE(img.valid_count() == 128);

  SUBCASE("uniform window stays put") {
    const std::vector<ClassId> pixels(128, 2);
    const auto out = knn_filter(img, pixels, back_project(pixels, img), scan.points);
    CHECK(out == std::vector<ClassId>(scan.size(), 2));
  }
  SUBCASE("lone mislabeled pixel is outvoted") {
    std::vector<ClassId> pixels(128, 1);
    const std::size_t center = img.pixel_index(8, 4);
    pixels[center] = 3;
    KnnConfig k;
    k.window = 3;
    k.k = 5;
    k.cutoff = 100.0;
    k.weighting = KnnWeighting::Uniform;
    const auto out = knn_filter(img, pixels, back_project(pixels, img), scan.points, k);
    CHECK(out[static_cast<std::size_t>(img.point_of_pixel[center])] == 1);
  }
  SUBCASE("cutoff keeps the input label") {
    std::vector<ClassId> pixels(128, 1);
    LidarScan far = scan;
    const std::size_t center = img.pixel_index(8, 4);
    const auto idx = static_cast<std::size_t>(img.point_of_pixel[center]);
    far.points[idx].x *= 10;
    far.points[idx].y *= 10;
    far.points[idx].z *= 10;
    const auto img2 = build_range_image(far, cfg);
    pixels[center] = 3;
    KnnConfig k;
    k.window = 3;
    k.k = 9;
    const auto labels_in = back_project(pixels, img2);
    const auto out = knn_filter(img2, pixels, labels_in, far.points, k);
    // Its own pixel is the only neighbor within the cutoff.
    CHECK(out[idx] == 3);
  }
  SUBCASE("fixed point on locally constant maps and no mutation") {
    std::vector<ClassId> pixels(128);
    for (int v = 0; v < 8; ++v)
      for (int u = 0; u < 16; ++u) pixels[img.pixel_index(u, v)] = u < 8 ? 0 : 1;
    KnnConfig k;
    k.window = 1;
    k.k = 1;
    const auto before = img.channels;
    const auto in = back_project(pixels, img);
    CHECK(knn_filter(img, pixels, in, scan.points, k) == in);
    CHECK(img.channels == before);
  }
  SUBCASE("config validation") {
    KnnConfig k;
    k.window = 4;
    CHECK_THROWS_AS(k.validate(), Error);
    k.window = 3;
    k.k = 10;
    CHECK_THROWS_AS(k.validate(), Error);
    k.k = 3;
    k.cutoff = 0;
    CHECK_THROWS_AS(k.validate(), Error);
    CHECK(parse_knn_weighting("uniform") == KnnWeighting::Uniform);
    CHECK(to_string(KnnWeighting::InverseRangeGap) == "inverse-range-gap");
    CHECK_THROWS_AS(parse_knn_weighting("gaussian"), Error);
    CHECK_THROWS_AS(knn_filter(img, std::vector<ClassId>(3), back_project(std::vector<ClassId>(128), img), scan.points), Error);
  }
}

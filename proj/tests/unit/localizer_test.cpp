#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "cascade/common/error.hpp"
#include "cascade/localizer/localizer.hpp"
#include "cascade/neuralkit/ops.hpp"

namespace cascade {
namespace {

baselines::ThermalClassifier small_thermal(std::uint64_t seed) {
  baselines::ThermalClassifier::Config c;
  c.encoder.channels = {3, 4, 5};
  return baselines::ThermalClassifier(c, seed);
}

ThermalFrame random_frame(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ThermalFrame f(h, w);
  for (auto& p : f.pixels) p = u(rng);
  return f;
}

Heatmap indicator(int h, int w, const HotspotBox& region, double inside = 1.0) {
  Heatmap m;
  m.height = h;
  m.width = w;
  m.values.assign(static_cast<std::size_t>(h) * w, 0.0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (region.contains(r, c)) m.values[static_cast<std::size_t>(r) * w + c] = inside;
  return m;
}

TEST(Resize, ConstantAndIdentity) {
  std::vector<double> c(12, 0.25);
  for (double v : bilinear_resize(c, 3, 4, 17, 9)) EXPECT_DOUBLE_EQ(v, 0.25);
  std::vector<double> src{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  EXPECT_EQ(bilinear_resize(src, 2, 3, 2, 3), src);
}

TEST(Resize, HalfPixelTwoX) {
  // 1x2 -> 1x4 with half-pixel centres: x = (j + 0.5) / 2 - 0.5 -> clamp.
  std::vector<double> src{0.0, 1.0};
  auto out = bilinear_resize(src, 1, 2, 1, 4);
  EXPECT_DOUBLE_EQ(out[0], 0.0);
  EXPECT_DOUBLE_EQ(out[1], 0.25);
  EXPECT_DOUBLE_EQ(out[2], 0.75);
  EXPECT_DOUBLE_EQ(out[3], 1.0);
}

TEST(GradCam, SingleChannelUniformGradientIsActivation) {
  std::vector<double> f{0.0, 1.0, 3.0, 2.0, 4.0, 0.5};
  std::vector<double> g(6, 0.7);
  auto map = gradcam_from_maps(f, g, 1, 2, 3);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(map[i], f[i] / 4.0, 1e-12);
}

TEST(GradCam, NegativeWeightedSumIsZero) {
  std::vector<double> f{1.0, 2.0, 3.0, 4.0};
  std::vector<double> g(4, -1.0);
  for (double v : gradcam_from_maps(f, g, 1, 2, 2)) EXPECT_EQ(v, 0.0);
}

TEST(GradCam, HandEvaluatedTwoChannels) {
  // alpha = (0.5, -0.25); map = relu(0.5 f0 - 0.25 f1) = (0.5, 0, 1.5, 0) -> /1.5
  std::vector<double> f{1.0, 0.0, 3.0, 0.0, 0.0, 4.0, 0.0, 2.0};
  std::vector<double> g{0.5, 0.5, 0.5, 0.5, -1.0, 0.0, 0.0, 0.0};
  auto map = gradcam_from_maps(f, g, 2, 2, 2);
  EXPECT_NEAR(map[0], 1.0 / 3.0, 1e-12);
  EXPECT_EQ(map[1], 0.0);
  EXPECT_NEAR(map[2], 1.0, 1e-12);
  EXPECT_EQ(map[3], 0.0);
}

TEST(GradCam, RescalingKeepsArgmax) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(30);
    for (auto& x : v) x = u(rng) * 5.0 + 1.0;
    auto r = minmax_rescale(v);
    EXPECT_EQ(std::max_element(v.begin(), v.end()) - v.begin(),
              std::max_element(r.begin(), r.end()) - r.begin());
    EXPECT_DOUBLE_EQ(*std::max_element(r.begin(), r.end()), 1.0);
    EXPECT_DOUBLE_EQ(*std::min_element(r.begin(), r.end()), 0.0);
  }
}

TEST(Maps, ModelHeatmapsHaveFrameShapeAndRange) {
  auto model = small_thermal(1);
  auto frame = random_frame(20, 18, 2);
  auto a = spatial_attention_map(model, frame);
  EXPECT_EQ(a.height, 20);
  EXPECT_EQ(a.width, 18);
  for (double v : a.values) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  for (int cls = 0; cls < kNumClasses; ++cls) {
    auto g = gradcam(model, frame, cls);
    ASSERT_EQ(g.values.size(), frame.pixels.size());
    for (double v : g.values) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  for (const auto& p : model.parameters()) EXPECT_FALSE(p.tensor.has_grad()) << p.name;
  EXPECT_THROW(gradcam(model, frame, 4), InvalidArgument);
}

TEST(Maps, ZeroProjectionGivesUniformHalf) {
  auto model = small_thermal(2);
  for (auto& p : model.parameters()) {
    if (p.name.rfind("thermal.spatial_attn", 0) == 0)
      std::fill(p.tensor.values().begin(), p.tensor.values().end(), 0.0);
  }
  auto a = spatial_attention_map(model, random_frame(16, 16, 3));
  for (double v : a.values) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Maps, Deterministic) {
  auto model = small_thermal(3);
  auto frame = random_frame(16, 16, 4);
  auto c1 = combine(spatial_attention_map(model, frame), gradcam(model, frame, 2));
  auto c2 = combine(spatial_attention_map(model, frame), gradcam(model, frame, 2));
  EXPECT_EQ(c1.values, c2.values);
}

TEST(Maps, GradCamNeedsGradMode) {
  auto model = small_thermal(3);
  nk::NoGradGuard guard;
  EXPECT_THROW(gradcam(model, random_frame(16, 16, 1), 0), Error);
}

TEST(Combine, UninformativeAttentionKeepsGradCam) {
  Heatmap a = indicator(4, 4, {0, 0, 4, 4}, 0.5);
  Heatmap g = indicator(4, 4, {1, 1, 3, 3}, 0.8);
  auto c = combine(a, g);
  for (std::size_t i = 0; i < c.values.size(); ++i) EXPECT_DOUBLE_EQ(c.values[i], g.values[i] / 0.8);
  EXPECT_EQ(c.source, HeatmapSource::Combined);
}

TEST(Iou, ReferenceCases) {
  const HotspotBox box{2, 2, 6, 7};  // 4 x 5 = 20 px in a 10 x 10 frame
  EXPECT_DOUBLE_EQ(localization_iou(indicator(10, 10, box), box), 1.0);
  EXPECT_DOUBLE_EQ(localization_iou(indicator(10, 10, {7, 0, 9, 10}), box), 0.0);
  // Box dilated to 8 x 5 rows: 40 px, contains the box.
  EXPECT_DOUBLE_EQ(localization_iou(indicator(10, 10, {0, 2, 8, 7}), box), 0.5);
  EXPECT_THROW(localization_iou(indicator(10, 10, box), HotspotBox{1, 1, 1, 4}), InvalidArgument);
}

Forest constant_forest(LabelClass cls, std::size_t n_features) {
  TreeNode leaf;
  leaf.prediction = cls;
  leaf.probability[to_index(cls)] = 1.0;
  DecisionTree tree;
  tree.nodes.push_back(leaf);
  Forest f;
  f.trees.push_back(tree);
  f.n_features = n_features;
  return f;
}

SensorWindow window() {
  SensorWindow w(6, 2, {"a", "b"});
  for (std::size_t i = 0; i < w.values.size(); ++i) w.values[i] = std::sin(static_cast<double>(i));
  return w;
}

TEST(Cascade, NormalPredictionsNeverReachStageTwo) {
  auto model = small_thermal(5);
  Forest normal = constant_forest(LabelClass::Normal, 8);
  for (int i = 0; i < 10; ++i) {
    auto out = cascade_localize(normal, model, window(), random_frame(16, 16, i), i);
    EXPECT_FALSE(out.has_value());
  }
  EXPECT_EQ(model.forward_calls(), 0u);
}

TEST(Cascade, AnomalyEmitsHeatmapWithStageOneClass) {
  auto model = small_thermal(6);
  Forest danger = constant_forest(LabelClass::Danger, 8);
  auto frame = random_frame(16, 16, 9);
  auto out = cascade_localize(danger, model, window(), frame, 42);
  ASSERT_TRUE(out.has_value());
  EXPECT_EQ(out->predicted, LabelClass::Danger);
  EXPECT_EQ(out->sample_id, 42u);
  EXPECT_EQ(out->height, 16);
  EXPECT_GT(model.forward_calls(), 0u);
}

TEST(Export, PgmAndIndex) {
  auto dir = std::filesystem::temp_directory_path() / "cascade_localizer_test";
  std::filesystem::create_directories(dir);
  Heatmap h = indicator(3, 4, {0, 0, 1, 2});
  write_pgm(dir / "h.pgm", h);
  std::ifstream in(dir / "h.pgm");
  std::string magic;
  int w = 0, hh = 0, maxval = 0, first = 0;
  in >> magic >> w >> hh >> maxval >> first;
  EXPECT_EQ(magic, "P2");
  EXPECT_EQ(w, 4);
  EXPECT_EQ(hh, 3);
  EXPECT_EQ(maxval, 255);
  EXPECT_EQ(first, 255);
  std::vector<LocalizationRecord> recs{{7, LabelClass::Danger, LabelClass::Danger, 0.6, true, "h.pgm"},
                                       {8, LabelClass::Normal, std::nullopt, std::nullopt, false, ""}};
  auto j = localization_index_json(recs);
  EXPECT_EQ(j[0]["predicted_class"], "Danger");
  EXPECT_TRUE(j[1]["iou"].is_null());
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace cascade

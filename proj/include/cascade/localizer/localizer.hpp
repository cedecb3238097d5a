#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascade/baselines/models.hpp"
#include "cascade/core/types.hpp"
#include "cascade/forest/forest.hpp"

namespace cascade {

enum class HeatmapSource { SpatialAttention, GradCam, Combined };
std::string heatmap_source_name(HeatmapSource s);

// Row-major [height x width] map with values in [0, 1].
struct Heatmap {
  int height = 0;
  int width = 0;
  std::vector<double> values;
  HeatmapSource source = HeatmapSource::Combined;
  std::size_t sample_id = 0;
  std::optional<LabelClass> predicted;

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
  // Row-major index of the first maximum.
  std::pair<int, int> argmax() const;
};

// Bilinear resize with half-pixel centres (edge samples clamp).
std::vector<double> bilinear_resize(std::span<const double> src, int src_h, int src_w, int dst_h,
                                    int dst_w);

// (v - min) / (max - min); a constant map becomes `constant_value` everywhere.
std::vector<double> minmax_rescale(std::span<const double> v, double constant_value = 0.0);

// Grad-CAM on one feature map stack: alpha_k = spatial mean of grads[k],
// map = ReLU(sum_k alpha_k features[k]), min-max rescaled. Inputs are
// [channels x h x w]; the result is [h x w].
std::vector<double> gradcam_from_maps(std::span<const double> features,
                                      std::span<const double> grads, std::size_t channels,
                                      std::size_t h, std::size_t w);

// `frame` is in model space ([0, 1] normalized).
Heatmap spatial_attention_map(const baselines::ThermalClassifier& model, const ThermalFrame& frame);
// Gradient of the target logit with respect to the last convolution's
// output. Needs gradient recording enabled; parameter gradients are cleared
// afterwards.
Heatmap gradcam(const baselines::ThermalClassifier& model, const ThermalFrame& frame,
                int target_class);
// Product of min-max normalized attention (a constant attention map counts
// as all ones) and Grad-CAM, rescaled again.
Heatmap combine(const Heatmap& attention, const Heatmap& cam);

// Binary mask {value >= type-7 quantile} against the box mask. Throws
// InvalidArgument when the box is empty.
double localization_iou(const Heatmap& heatmap, const HotspotBox& box, double quantile = 0.9);

// Stage 1 classifies the window's statistical features. Normal predictions
// return nothing and never touch Stage 2; otherwise the combined map for the
// Stage-1 class is returned.
std::optional<Heatmap> cascade_localize(const Forest& stage1,
                                        const baselines::ThermalClassifier& stage2,
                                        const SensorWindow& window, const ThermalFrame& frame,
                                        std::size_t sample_id = 0);

// Plain-text greymap, maxval 255.
void write_pgm(const std::filesystem::path& path, const Heatmap& heatmap);

struct LocalizationRecord {
  std::size_t sample_id = 0;
  LabelClass true_class = LabelClass::Normal;
  std::optional<LabelClass> predicted;
  std::optional<double> iou;
  bool argmax_in_box = false;
  std::string file;
};

nlohmann::json localization_index_json(std::span<const LocalizationRecord> records);

}  // namespace cascade

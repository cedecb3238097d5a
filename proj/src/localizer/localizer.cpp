#include "cascade/localizer/localizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cascade/common/error.hpp"
#include "cascade/common/math.hpp"
#include "cascade/features/features.hpp"
#include "cascade/neuralkit/ops.hpp"

namespace cascade {

using nk::Tensor;

std::string heatmap_source_name(HeatmapSource s) {
  switch (s) {
    case HeatmapSource::SpatialAttention: return "spatial_attention";
    case HeatmapSource::GradCam: return "gradcam";
    case HeatmapSource::Combined: return "combined";
  }
  return "unknown";
}

std::pair<int, int> Heatmap::argmax() const {
  if (values.empty()) throw InvalidArgument("empty heatmap");
  auto it = std::max_element(values.begin(), values.end());
  const auto i = static_cast<int>(it - values.begin());
  return {i / width, i % width};
}

std::vector<double> bilinear_resize(std::span<const double> src, int src_h, int src_w, int dst_h,
                                    int dst_w) {
  if (src_h <= 0 || src_w <= 0 || dst_h <= 0 || dst_w <= 0)
    throw InvalidArgument("resize needs positive sizes");
  if (src.size() != static_cast<std::size_t>(src_h) * src_w)
    throw DimensionError("resize source size mismatch");
  auto coord = [](int dst, int in, int out) {
    double s = (dst + 0.5) * static_cast<double>(in) / out - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  std::vector<double> out(static_cast<std::size_t>(dst_h) * dst_w);
  for (int r = 0; r < dst_h; ++r) {
    const double sr = coord(r, src_h, dst_h);
    const int r0 = static_cast<int>(sr), r1 = std::min(r0 + 1, src_h - 1);
    const double fr = sr - r0;
    for (int c = 0; c < dst_w; ++c) {
      const double sc = coord(c, src_w, dst_w);
      const int c0 = static_cast<int>(sc), c1 = std::min(c0 + 1, src_w - 1);
      const double fc = sc - c0;
      auto px = [&](int rr, int cc) { return src[static_cast<std::size_t>(rr) * src_w + cc]; };
      const double top = px(r0, c0) * (1.0 - fc) + px(r0, c1) * fc;
      const double bottom = px(r1, c0) * (1.0 - fc) + px(r1, c1) * fc;
      out[static_cast<std::size_t>(r) * dst_w + c] = top * (1.0 - fr) + bottom * fr;
    }
  }
  return out;
}

std::vector<double> minmax_rescale(std::span<const double> v, double constant_value) {
  if (v.empty()) return {};
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double min = *lo, max = *hi;
  std::vector<double> out(v.size(), constant_value);
  if (max > min) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - min) / (max - min);
  }
  return out;
}

std::vector<double> gradcam_from_maps(std::span<const double> features,
                                      std::span<const double> grads, std::size_t channels,
                                      std::size_t h, std::size_t w) {
  const std::size_t plane = h * w;
  if (features.size() != channels * plane || grads.size() != channels * plane)
    throw DimensionError("gradcam map size mismatch");
  std::vector<double> map(plane, 0.0);
  for (std::size_t k = 0; k < channels; ++k) {
    double alpha = 0.0;
    for (std::size_t p = 0; p < plane; ++p) alpha += grads[k * plane + p];
    alpha /= static_cast<double>(plane);
    for (std::size_t p = 0; p < plane; ++p) map[p] += alpha * features[k * plane + p];
  }
  for (auto& v : map) v = std::max(v, 0.0);
  return minmax_rescale(map);
}

namespace {

Tensor frame_tensor(const ThermalFrame& frame) {
  return Tensor::from({1, 1, static_cast<std::size_t>(frame.height),
                       static_cast<std::size_t>(frame.width)},
                      frame.pixels);
}

Heatmap make_heatmap(std::vector<double> values, const ThermalFrame& frame, HeatmapSource source) {
  Heatmap h;
  h.height = frame.height;
  h.width = frame.width;
  h.values = std::move(values);
  h.source = source;
  return h;
}

}  // namespace

Heatmap spatial_attention_map(const baselines::ThermalClassifier& model, const ThermalFrame& frame) {
  nk::NoGradGuard guard;
  auto fwd = model.forward(frame_tensor(frame));
  const auto& a = fwd.encoder.attention;
  auto up = bilinear_resize(a.values(), static_cast<int>(a.dim(2)), static_cast<int>(a.dim(3)),
                            frame.height, frame.width);
  return make_heatmap(std::move(up), frame, HeatmapSource::SpatialAttention);
}

Heatmap gradcam(const baselines::ThermalClassifier& model, const ThermalFrame& frame,
                int target_class) {
  if (target_class < 0 || target_class >= kNumClasses)
    throw InvalidArgument("gradcam target class out of range");
  if (!nk::grad_enabled()) throw Error("gradcam needs gradient recording enabled");
  auto params = model.parameters();
  auto fwd = model.forward(frame_tensor(frame));
  Tensor target = nk::sum(nk::select_column(fwd.logits, static_cast<std::size_t>(target_class)));
  target.backward();
  const Tensor& f = fwd.encoder.features;
  auto grads = f.grad();
  auto small = gradcam_from_maps(f.values(), grads, f.dim(1), f.dim(2), f.dim(3));
  nk::zero_grads(params);
  auto up = bilinear_resize(small, static_cast<int>(f.dim(2)), static_cast<int>(f.dim(3)),
                            frame.height, frame.width);
  // Bilinear interpolation stays inside the source range, so the map is
  // already in [0, 1].
  return make_heatmap(std::move(up), frame, HeatmapSource::GradCam);
}

Heatmap combine(const Heatmap& attention, const Heatmap& cam) {
  if (attention.height != cam.height || attention.width != cam.width)
    throw DimensionError("heatmaps differ in size");
  auto a = minmax_rescale(attention.values, 1.0);
  std::vector<double> prod(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) prod[i] = a[i] * cam.values[i];
  Heatmap out = cam;
  out.values = minmax_rescale(prod);
  out.source = HeatmapSource::Combined;
  return out;
}

double localization_iou(const Heatmap& heatmap, const HotspotBox& box, double quantile) {
  if (box.area() <= 0) throw InvalidArgument("hotspot box is empty");
  if (quantile < 0.0 || quantile > 1.0) throw InvalidArgument("quantile must lie in [0, 1]");
  const double threshold = quantile_of(heatmap.values, quantile);
  std::size_t inter = 0, uni = 0;
  for (int r = 0; r < heatmap.height; ++r) {
    for (int c = 0; c < heatmap.width; ++c) {
      const bool m = heatmap.at(r, c) >= threshold;
      const bool b = box.contains(r, c);
      inter += (m && b) ? 1 : 0;
      uni += (m || b) ? 1 : 0;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<Heatmap> cascade_localize(const Forest& stage1,
                                        const baselines::ThermalClassifier& stage2,
                                        const SensorWindow& window, const ThermalFrame& frame,
                                        std::size_t sample_id) {
  const auto features = extract_statistical(window);
  const LabelClass predicted = stage1.predict(features.values);
  if (predicted == LabelClass::Normal) return std::nullopt;
  Heatmap out = combine(spatial_attention_map(stage2, frame), gradcam(stage2, frame, to_index(predicted)));
  out.sample_id = sample_id;
  out.predicted = predicted;
  return out;
}

void write_pgm(const std::filesystem::path& path, const Heatmap& heatmap) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string());
  out << "P2\n" << heatmap.width << ' ' << heatmap.height << "\n255\n";
  for (int r = 0; r < heatmap.height; ++r) {
    for (int c = 0; c < heatmap.width; ++c) {
      const double v = std::clamp(heatmap.at(r, c), 0.0, 1.0);
      out << static_cast<int>(std::lround(v * 255.0)) << (c + 1 < heatmap.width ? ' ' : '\n');
    }
  }
}

nlohmann::json localization_index_json(std::span<const LocalizationRecord> records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json j;
    j["sample_id"] = r.sample_id;
    j["true_class"] = std::string(label_name(r.true_class));
    j["predicted_class"] = r.predicted ? nlohmann::json(std::string(label_name(*r.predicted)))
                                       : nlohmann::json(nullptr);
    j["iou"] = r.iou ? nlohmann::json(*r.iou) : nlohmann::json(nullptr);
    j["argmax_in_box"] = r.argmax_in_box;
    j["file"] = r.file;
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace cascade

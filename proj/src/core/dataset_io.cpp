#include "cascade/core/dataset_io.hpp"

#include <json.hpp>

#include "cascade/common/binary_io.hpp"
#include "cascade/common/error.hpp"
#include "cascade/core/config_json.hpp"

namespace cascade {

using nlohmann::json;

void to_json(json& j, const GeneratorConfig& c) {
  j = json{{"n_samples", c.n_samples},
           {"class_priors", c.class_priors},
           {"timesteps", c.timesteps},
           {"channels", c.channels},
           {"height", c.height},
           {"width", c.width},
           {"sensor_signal_strength", c.sensor_signal_strength},
           {"thermal_signal_strength", c.thermal_signal_strength},
           {"thermal_variance_inflation", c.thermal_variance_inflation},
           {"danger_spike_rate", c.danger_spike_rate},
           {"train_fraction", c.train_fraction},
           {"seed", c.seed}};
}

void from_json(const json& j, GeneratorConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("n_samples", c.n_samples);
  get("class_priors", c.class_priors);
  get("timesteps", c.timesteps);
  get("channels", c.channels);
  get("height", c.height);
  get("width", c.width);
  get("sensor_signal_strength", c.sensor_signal_strength);
  get("thermal_signal_strength", c.thermal_signal_strength);
  get("thermal_variance_inflation", c.thermal_variance_inflation);
  get("danger_spike_rate", c.danger_spike_rate);
  get("train_fraction", c.train_fraction);
  get("seed", c.seed);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  if (ds.samples.empty()) throw InvalidArgument("cannot save an empty dataset");
  const auto& first = ds.samples.front();
  const int T = first.sensors.timesteps;
  const int D = first.sensors.channels;
  const int H = first.thermal.height;
  const int W = first.thermal.width;
  const std::size_t n = ds.samples.size();

  std::vector<float> sensors;
  std::vector<float> thermal;
  std::vector<float> labels;
  std::vector<float> hotspots;
  sensors.reserve(n * T * D);
  thermal.reserve(n * H * W);
  for (const auto& s : ds.samples) {
    if (s.sensors.timesteps != T || s.sensors.channels != D || s.thermal.height != H ||
        s.thermal.width != W) {
      throw DimensionError("samples in a dataset must share dimensions");
    }
    for (double v : s.sensors.values) sensors.push_back(static_cast<float>(v));
    for (double v : s.thermal.pixels) thermal.push_back(static_cast<float>(v));
    labels.push_back(static_cast<float>(to_index(s.label)));
    if (s.thermal.hotspot) {
      const auto& b = *s.thermal.hotspot;
      hotspots.insert(hotspots.end(), {static_cast<float>(b.row0), static_cast<float>(b.col0),
                                       static_cast<float>(b.row1), static_cast<float>(b.col1)});
    } else {
      hotspots.insert(hotspots.end(), {-1.f, -1.f, -1.f, -1.f});
    }
  }

  std::vector<int> split;
  split.reserve(ds.split.size());
  for (Split s : ds.split) split.push_back(static_cast<int>(s));

  json manifest{{"format_version", kDatasetFormatVersion},
                {"n_samples", n},
                {"timesteps", T},
                {"channels", D},
                {"height", H},
                {"width", W},
                {"seed", ds.seed},
                {"channel_names", ds.channel_names},
                {"class_priors", ds.config.class_priors},
                {"generator", ds.config},
                {"split", split}};

  std::filesystem::create_directories(dir);
  io::write_f32(dir / "sensors.bin", sensors);
  io::write_f32(dir / "thermal.bin", thermal);
  io::write_f32(dir / "labels.bin", labels);
  io::write_f32(dir / "hotspots.bin", hotspots);
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(io::read_text(dir / "manifest.json"));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("manifest.json: ") + e.what(), e.byte);
  }
  const int version = manifest.value("format_version", -1);
  if (version != kDatasetFormatVersion) {
    throw VersionError("dataset format version " + std::to_string(version) +
                       " is not supported (expected " +
                       std::to_string(kDatasetFormatVersion) + ")");
  }

  Dataset ds;
  std::size_t n = 0;
  int T = 0, D = 0, H = 0, W = 0;
  try {
    n = manifest.at("n_samples").get<std::size_t>();
    T = manifest.at("timesteps").get<int>();
    D = manifest.at("channels").get<int>();
    H = manifest.at("height").get<int>();
    W = manifest.at("width").get<int>();
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    ds.channel_names = manifest.at("channel_names").get<std::vector<std::string>>();
    ds.config = manifest.at("generator").get<GeneratorConfig>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest.json: ") + e.what(), 0);
  }
  if (T < 2 || D < 1 || H < 8 || W < 8) {
    throw DimensionError("manifest declares invalid dimensions");
  }
  if (ds.channel_names.size() != static_cast<std::size_t>(D)) {
    throw DimensionError("manifest declares D = " + std::to_string(D) + " but lists " +
                         std::to_string(ds.channel_names.size()) + " channel names");
  }

  const auto sensors = io::read_f32(dir / "sensors.bin", n * T * D);
  const auto thermal = io::read_f32(dir / "thermal.bin", n * H * W);
  const auto labels = io::read_f32(dir / "labels.bin", n);
  const auto hotspots = io::read_f32(dir / "hotspots.bin", n * 4);

  const auto split = manifest.value("split", std::vector<int>{});
  if (!split.empty() && split.size() != n) {
    throw DimensionError("split list length does not match n_samples");
  }

  ds.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = ds.samples[i];
    s.sensors = SensorWindow(T, D, ds.channel_names);
    for (std::size_t k = 0; k < static_cast<std::size_t>(T * D); ++k) {
      s.sensors.values[k] = sensors[i * T * D + k];
    }
    s.thermal = ThermalFrame(H, W);
    for (std::size_t k = 0; k < static_cast<std::size_t>(H * W); ++k) {
      s.thermal.pixels[k] = thermal[i * H * W + k];
    }
    const float label = labels[i];
    if (label < 0.f || label >= static_cast<float>(kNumClasses) || label != std::floor(label)) {
      throw ParseError("labels.bin holds an invalid class value", i * sizeof(float));
    }
    s.label = static_cast<LabelClass>(static_cast<int>(label));
    const float* h = &hotspots[i * 4];
    if (h[0] >= 0.f) {
      s.thermal.hotspot = HotspotBox{static_cast<int>(h[0]), static_cast<int>(h[1]),
                                     static_cast<int>(h[2]), static_cast<int>(h[3])};
    }
  }
  ds.split.reserve(split.size());
  for (int tag : split) {
    if (tag != 0 && tag != 1) throw ParseError("manifest split tag must be 0 or 1", 0);
    ds.split.push_back(static_cast<Split>(tag));
  }
  return ds;
}

}  // namespace cascade

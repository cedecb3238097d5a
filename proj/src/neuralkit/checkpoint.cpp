#include "cascade/neuralkit/checkpoint.hpp"

#include "cascade/common/binary_io.hpp"
#include "cascade/common/error.hpp"

namespace cascade::nk {

using nlohmann::json;

void save_checkpoint(const std::filesystem::path& dir, const ParameterList& params,
                     const json& metadata) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["metadata"] = metadata;
  json entries = json::array();
  std::vector<double> blob;
  for (const auto& p : params) {
    entries.push_back({{"name", p.name},
                       {"shape", p.tensor.shape()},
                       {"offset", blob.size()},
                       {"count", p.tensor.size()}});
    blob.insert(blob.end(), p.tensor.values().begin(), p.tensor.values().end());
  }
  manifest["parameters"] = entries;
  manifest["total_values"] = blob.size();
  io::write_text(dir / "manifest.json", manifest.dump(2));
  io::write_f64(dir / "params.bin", blob);
}

json load_checkpoint(const std::filesystem::path& dir, const ParameterList& params) {
  std::string text = io::read_text(dir / "manifest.json");
  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what(), e.byte);
  }
  int version = manifest.value("format_version", -1);
  if (version != kCheckpointFormatVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) +
                       " is not supported (expected " +
                       std::to_string(kCheckpointFormatVersion) + ")");
  }
  const auto& entries = manifest.at("parameters");
  if (entries.size() != params.size()) {
    throw DimensionError("checkpoint holds " + std::to_string(entries.size()) +
                         " parameters, model has " + std::to_string(params.size()));
  }
  auto blob = io::read_f64(dir / "params.bin", manifest.at("total_values").get<std::size_t>());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = entries[i];
    Tensor t = params[i].tensor;
    if (e.at("name").get<std::string>() != params[i].name ||
        e.at("shape").get<Shape>() != t.shape()) {
      throw DimensionError("checkpoint parameter " + e.at("name").get<std::string>() + " " +
                           shape_string(e.at("shape").get<Shape>()) + " does not match " +
                           params[i].name + " " + shape_string(t.shape()));
    }
    auto offset = e.at("offset").get<std::size_t>();
    if (offset + t.size() > blob.size()) {
      throw DimensionError("checkpoint parameter " + params[i].name + " runs past the blob");
    }
    std::copy_n(blob.begin() + static_cast<long>(offset), t.size(), t.values().begin());
  }
  return manifest.value("metadata", json::object());
}

}  // namespace cascade::nk

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cascade::io {

static_assert(std::endian::native == std::endian::little,
              "binary blobs are written in host order, which must be little-endian");

// Writes a flat array of float32 values.
void write_f32(const std::filesystem::path& path, std::span<const float> values);
// Writes a flat array of float64 values.
void write_f64(const std::filesystem::path& path, std::span<const double> values);

// Reads exactly `count` values. Throws ParseError naming the byte offset at
// which the file ended (truncation) or at which unexpected trailing bytes
// start.
std::vector<float> read_f32(const std::filesystem::path& path, std::size_t count);
std::vector<double> read_f64(const std::filesystem::path& path, std::size_t count);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cascade::io

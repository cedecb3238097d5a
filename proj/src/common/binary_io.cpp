#include "cascade/common/binary_io.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "cascade/common/error.hpp"

namespace cascade::io {
namespace {

template <typename T>
void write_blob(const std::filesystem::path& path, std::span<const T> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
  if (!out) throw Error("write failed: " + path.string());
}

template <typename T>
std::vector<T> read_blob(const std::filesystem::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t expected = count * sizeof(T);
  if (bytes.size() < expected) {
    // Report the first byte that should have been present but was not.
    throw ParseError(path.filename().string() + " is truncated: expected " +
                         std::to_string(expected) + " bytes, found " +
                         std::to_string(bytes.size()),
                     bytes.size());
  }
  if (bytes.size() > expected) {
    throw ParseError(path.filename().string() + " has " +
                         std::to_string(bytes.size() - expected) + " unexpected trailing bytes",
                     expected);
  }
  std::vector<T> values(count);
  std::memcpy(values.data(), bytes.data(), expected);
  return values;
}

}  // namespace

void write_f32(const std::filesystem::path& path, std::span<const float> values) {
  write_blob(path, values);
}

void write_f64(const std::filesystem::path& path, std::span<const double> values) {
  write_blob(path, values);
}

std::vector<float> read_f32(const std::filesystem::path& path, std::size_t count) {
  return read_blob<float>(path, count);
}

std::vector<double> read_f64(const std::filesystem::path& path, std::size_t count) {
  return read_blob<double>(path, count);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace cascade::io

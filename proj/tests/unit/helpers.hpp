#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <random>
#include <unistd.h>
#include <string>
#include <vector>

#include "json.hpp"
#include "visa/autoencoder.hpp"
#include "visa/errors.hpp"
#include "visa/frame.hpp"

namespace test {

inline std::filesystem::path data_path(const std::string& name) { return std::filesystem::path(VISA_TEST_DATA) / name; }

inline std::vector<uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline nlohmann::json reference_values() {
  std::ifstream in(data_path("reference_values.json"));
  return nlohmann::json::parse(in);
}

// Named float32 blocks in the weight-blob layout.
inline std::map<std::string, std::vector<float>> read_blocks(const uint8_t* p, size_t size) {
  std::map<std::string, std::vector<float>> out;
  uint32_t count = 0;  // after the magic and version
  std::memcpy(&count, p + 8, 4);
  size_t pos = 12;
  for (uint32_t i = 0; i < count && pos < size; ++i) {
    uint16_t len = 0;
    std::memcpy(&len, p + pos, 2);
    pos += 2;
    std::string name(reinterpret_cast<const char*>(p + pos), len);
    pos += len;
    uint64_t n = 0;
    std::memcpy(&n, p + pos, 8);
    pos += 8;
    std::vector<float> v(n);
    std::memcpy(v.data(), p + pos, n * 4);
    pos += n * 4;
    out[name] = std::move(v);
  }
  return out;
}

inline visa::Frame frame_from(const std::vector<float>& chw, int h, int w) {
  visa::Frame f(h, w);
  f.pixels = chw;
  return f;
}

inline visa::Frame random_frame(int h, int w, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  visa::Frame f(h, w);
  for (auto& v : f.pixels) v = u(rng);
  return f;
}

// Same formulas as the reference generator.
inline void pattern_pair(int h, int w, visa::Frame& a, visa::Frame& b) {
  a = visa::Frame(h, w);
  b = visa::Frame(h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double va = 0.5 + 0.4 * std::sin(0.31 * x + 0.17 * y + 1.3 * c);
        const double vb = va + 0.08 * std::cos(0.53 * x - 0.29 * y + 0.7 * c) * std::sin(0.11 * x * y / 7.0);
        a.at(c, y, x) = static_cast<float>(va);
        b.at(c, y, x) = static_cast<float>(std::clamp(vb, 0.0, 1.0));
      }
}

inline visa::Frame ramp(int h, int w) {
  visa::Frame f(h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) f.at(c, y, x) = static_cast<float>(std::fmod(0.013 * (c + 1) * x + 0.021 * y + 0.1 * c, 1.0));
  return f;
}

inline double max_abs_diff(const std::vector<float>& a, const std::vector<double>& b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

// Error code raised by f, or nullopt when it returns normally.
template <typename F>
std::optional<visa::ErrorCode> error_of(F&& f) {
  try {
    f();
  } catch (const visa::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// Codec whose code is the image itself: every projection is the identity.
struct IdentityCodec : visa::FrameCodec {
  visa::LatentCode encode(const visa::Frame& f) const override {
    visa::LatentCode c;
    c.channels = 3;
    c.height = f.height;
    c.width = f.width;
    c.values = f.pixels;
    c.source_shape = {f.height, f.width};
    return c;
  }
  visa::Frame decode(const visa::LatentCode& c) const override {
    visa::Frame f(c.height, c.width);
    f.pixels = c.values;
    return f;
  }
};

// Scratch directory removed at scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("visa_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace test

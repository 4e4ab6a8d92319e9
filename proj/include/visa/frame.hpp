#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace visa {

/// RGB image with planar storage: channel c, row y, column x lives at
/// pixels[(c * height + y) * width + x]. Values are expected in [0, 1].
struct Frame {
  static constexpr int kChannels = 3;

  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Frame() = default;
  Frame(int h, int w, float fill = 0.0f)
      : height(h), width(w), pixels(static_cast<size_t>(kChannels) * h * w, fill) {}

  size_t plane_size() const { return static_cast<size_t>(height) * width; }
  size_t size() const { return pixels.size(); }
  bool empty() const { return pixels.empty(); }

  float& at(int c, int y, int x) { return pixels[(static_cast<size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const {
    return pixels[(static_cast<size_t>(c) * height + y) * width + x];
  }

  bool same_shape(const Frame& other) const {
    return height == other.height && width == other.width;
  }
  bool operator==(const Frame& other) const = default;
};

/// Ordered frames of one or more videos. All frames share one size and
/// frame_ids are strictly increasing.
struct FrameSequence {
  std::vector<Frame> frames;
  std::vector<int> frame_ids;
  std::string source_label;
  std::optional<double> fps_hint;

  size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }

  // Throws ResolutionMismatch / ShapeError when the invariants do not hold.
  void validate() const;

  static FrameSequence from_frames(std::vector<Frame> frames, std::string label = {});
};

/// Integer label map (instance masks). 0 is background.
struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<int32_t> labels;

  LabelMap() = default;
  LabelMap(int h, int w, int32_t fill = 0)
      : height(h), width(w), labels(static_cast<size_t>(h) * w, fill) {}

  int32_t& at(int y, int x) { return labels[static_cast<size_t>(y) * width + x]; }
  int32_t at(int y, int x) const { return labels[static_cast<size_t>(y) * width + x]; }
  bool operator==(const LabelMap& other) const = default;
};

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool inside(int height, int width) const {
    return w > 0 && h > 0 && x >= 0 && y >= 0 && x + w <= width && y + h <= height;
  }
  bool operator==(const Rect&) const = default;
};

enum class Axis { Horizontal, Vertical };

// Pixel-level image operations. All return new frames.
Frame resize_bilinear(const Frame& frame, int target_h, int target_w);
Frame box_downsample(const Frame& frame, int factor);
Frame pad_mirror(const Frame& frame, int target_h, int target_w);
Frame pad_zero(const Frame& frame, int target_h, int target_w);
Frame crop(const Frame& frame, const Rect& rect);
Frame hflip(const Frame& frame);
Frame concat(std::span<const Frame> frames, Axis axis);
Frame clamp01(Frame frame);
Frame lerp(const Frame& a, const Frame& b, float alpha);  // alpha * a + (1 - alpha) * b
Frame pixel_mean(std::span<const Frame> frames);

double mse(const Frame& a, const Frame& b);
double mean_abs_diff(const Frame& a, const Frame& b);
/// Mean squared magnitude of forward differences, summed over both axes.
double gradient_energy(const Frame& frame);
/// Luma-like grey image (channel mean), row-major height x width.
std::vector<float> grey(const Frame& frame);

}  // namespace visa

#include "visa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace visa::synth {

namespace {

constexpr float kTwoPi = 2.0f * std::numbers::pi_v<float>;

void box_blur_plane(std::vector<float>& plane, int h, int w, int r) {
  std::vector<float> tmp(plane.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      for (int d = -r; d <= r; ++d) acc += plane[y * w + ((x + d) % w + w) % w];
      tmp[y * w + x] = acc / (2 * r + 1);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      for (int d = -r; d <= r; ++d) acc += tmp[((y + d) % h + h) % h * w + x];
      plane[y * w + x] = acc / (2 * r + 1);
    }
}

}  // namespace

Frame smooth_background(int h, int w, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Frame f(h, w);
  for (int c = 0; c < Frame::kChannels; ++c) {
    const float base = 0.25f + 0.5f * u(rng);
    float fx[3], fy[3], ph[3], amp[3];
    for (int k = 0; k < 3; ++k) {
      fx[k] = (0.5f + 1.5f * u(rng)) / w;
      fy[k] = (0.5f + 1.5f * u(rng)) / h;
      ph[k] = kTwoPi * u(rng);
      amp[k] = 0.06f + 0.08f * u(rng);
    }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float v = base;
        for (int k = 0; k < 3; ++k) v += amp[k] * std::sin(kTwoPi * (fx[k] * x + fy[k] * y) + ph[k]);
        f.at(c, y, x) = std::clamp(v, 0.0f, 1.0f);
      }
  }
  return f;
}

Frame smooth_texture(int h, int w, uint64_t seed, int blur_radius) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Frame f(h, w);
  for (int c = 0; c < Frame::kChannels; ++c) {
    std::vector<float> plane(static_cast<size_t>(h) * w);
    for (auto& v : plane) v = u(rng);
    box_blur_plane(plane, h, w, blur_radius);
    box_blur_plane(plane, h, w, blur_radius);
    float lo = *std::min_element(plane.begin(), plane.end());
    float hi = *std::max_element(plane.begin(), plane.end());
    for (int i = 0; i < h * w; ++i) f.pixels[c * h * w + i] = (plane[i] - lo) / std::max(hi - lo, 1e-6f);
  }
  return f;
}

Frame translate_wrap(const Frame& frame, int dx, int dy) {
  Frame out(frame.height, frame.width);
  for (int c = 0; c < Frame::kChannels; ++c)
    for (int y = 0; y < frame.height; ++y)
      for (int x = 0; x < frame.width; ++x) {
        int sy = ((y - dy) % frame.height + frame.height) % frame.height;
        int sx = ((x - dx) % frame.width + frame.width) % frame.width;
        out.at(c, y, x) = frame.at(c, sy, sx);
      }
  return out;
}

Frame render_sprite(const Frame& background, float cx, float cy, const SpriteStyle& style, LabelMap* mask) {
  Frame out = background;
  if (mask) *mask = LabelMap(background.height, background.width, 0);
  const float reach = style.radius + 2 * style.edge;
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
  const int y1 = std::min(background.height - 1, static_cast<int>(std::ceil(cy + reach)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
  const int x1 = std::min(background.width - 1, static_cast<int>(std::ceil(cx + reach)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const float dx = x + 0.5f - cx, dy = y + 0.5f - cy;
      const float d = std::sqrt(dx * dx + dy * dy);
      // Soft-edged disc with radial shading.
      const float cover = 1.0f / (1.0f + std::exp((d - style.radius) / (0.35f * style.edge)));
      if (cover < 1e-4f) continue;
      float shade = 0.75f + 0.25f * (1.0f - std::min(1.0f, d / style.radius)) + 0.1f * (dx - dy) / style.radius;
      if (style.stripes > 0) shade *= 1.0f - style.stripes * 0.5f * (1.0f + std::sin(kTwoPi * (dx + 0.5f * dy) / style.stripe_period));
      for (int c = 0; c < Frame::kChannels; ++c) {
        const float sprite = std::clamp(style.color[c] * shade, 0.0f, 1.0f);
        out.at(c, y, x) = cover * sprite + (1 - cover) * background.at(c, y, x);
      }
      if (mask && cover > 0.5f) mask->at(y, x) = 1;
    }
  return out;
}

SynthVideo moving_sprite(int frames, int h, int w, float vx, float vy, uint64_t seed, std::string label) {
  SpriteStyle style;
  style.radius = std::max(6.0f, 0.11f * std::min(h, w));
  return moving_sprite(frames, h, w, vx, vy, seed, style, std::move(label));
}

namespace {

SynthVideo sprite_over(const Frame& bg, int frames, float vx, float vy, const SpriteStyle& style, std::string label) {
  SynthVideo v;
  const int h = bg.height, w = bg.width;
  // Centre the trajectory so the sprite stays fully inside the frame.
  const float cx0 = w / 2.0f - vx * (frames - 1) / 2.0f;
  const float cy0 = h / 2.0f - vy * (frames - 1) / 2.0f;
  std::vector<Frame> out;
  for (int t = 0; t < frames; ++t) {
    LabelMap m;
    out.push_back(render_sprite(bg, cx0 + vx * t, cy0 + vy * t, style, &m));
    v.masks.push_back(std::move(m));
    v.clean.push_back(bg);
  }
  v.sequence = FrameSequence::from_frames(std::move(out), std::move(label));
  return v;
}

}  // namespace

SynthVideo moving_sprite(int frames, int h, int w, float vx, float vy, uint64_t seed, const SpriteStyle& style,
                         std::string label) {
  return sprite_over(smooth_background(h, w, seed), frames, vx, vy, style, std::move(label));
}

Frame add_grating(const Frame& frame, float amplitude, float period_x, float period_y) {
  Frame out = frame;
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) {
      const float g = amplitude * std::sin(kTwoPi * x / period_x) * std::sin(kTwoPi * (y + 0.5f) / period_y);
      for (int c = 0; c < Frame::kChannels; ++c) out.at(c, y, x) = std::clamp(frame.at(c, y, x) + g, 0.0f, 1.0f);
    }
  return out;
}

SynthVideo periodic_motion(int frames, int h, int w, int period, uint64_t seed, std::string label) {
  SynthVideo v;
  const Frame bg = smooth_background(h, w, seed);
  SpriteStyle style;
  style.radius = std::max(6.0f, 0.11f * std::min(h, w));
  style.color[0] = 0.2f, style.color[1] = 0.45f, style.color[2] = 0.95f;
  const float rx = 0.3f * w, ry = 0.25f * h;
  std::vector<Frame> out;
  for (int t = 0; t < frames; ++t) {
    const float a = kTwoPi * static_cast<float>(t) / static_cast<float>(period);
    LabelMap m;
    out.push_back(render_sprite(bg, w / 2.0f + rx * std::cos(a), h / 2.0f + ry * std::sin(a), style, &m));
    v.masks.push_back(std::move(m));
    v.clean.push_back(bg);
  }
  v.sequence = FrameSequence::from_frames(std::move(out), std::move(label));
  return v;
}

SynthVideo two_shot(int frames, int h, int w, uint64_t seed, std::string label) {
  SynthVideo v;
  const Frame bg_a = smooth_background(h, w, seed);
  const Frame bg_b = smooth_background(h, w, seed + 7919);
  SpriteStyle a, b;
  a.radius = b.radius = std::max(6.0f, 0.11f * std::min(h, w));
  b.color[0] = 0.15f, b.color[1] = 0.8f, b.color[2] = 0.3f;
  const int cut = frames / 2;
  std::vector<Frame> out;
  for (int t = 0; t < frames; ++t) {
    const bool first = t < cut;
    const int local = first ? t : t - cut;
    const int span = std::max(1, (first ? cut : frames - cut) - 1);
    const float s = static_cast<float>(local) / static_cast<float>(span);
    // Shot A moves left to right across the upper half, shot B right to left along the bottom.
    const float cx = first ? w * (0.25f + 0.5f * s) : w * (0.75f - 0.5f * s);
    const float cy = first ? h * 0.35f : h * 0.65f;
    LabelMap m;
    out.push_back(render_sprite(first ? bg_a : bg_b, cx, cy, first ? a : b, &m));
    v.masks.push_back(std::move(m));
    v.clean.push_back(first ? bg_a : bg_b);
  }
  v.sequence = FrameSequence::from_frames(std::move(out), std::move(label));
  return v;
}

SpriteStyle desk_style() {
  SpriteStyle s;
  s.radius = 22.0f;
  s.stripes = 0.3f;
  s.stripe_period = 12.0f;
  return s;
}

SynthVideo desk_clip(int frames, uint64_t seed) {
  return moving_sprite(frames, 128, 192, 3.0f, 1.2f, seed, desk_style(), "desk");
}

SynthVideo detail_clip(int frames, uint64_t seed) {
  const Frame bg = add_grating(smooth_background(128, 192, seed), 0.12f, 4.0f, 6.0f);
  return sprite_over(bg, frames, 3.0f, 1.2f, desk_style(), "detail");
}

}  // namespace visa::synth

#pragma once

// Procedural test videos with known ground truth (sprite masks, clean
// backgrounds, exact motion). Used by the evaluation subcommands and tests.

#include <cstdint>
#include <string>
#include <vector>

#include "visa/frame.hpp"

namespace visa::synth {

struct SynthVideo {
  FrameSequence sequence;
  std::vector<LabelMap> masks;   // sprite label (1) per frame
  std::vector<Frame> clean;      // the frame with the sprite removed
};

struct SpriteStyle {
  float radius = 14.0f;
  float edge = 2.0f;  // soft edge width in px
  float color[3] = {0.9f, 0.35f, 0.2f};
  float stripes = 0.0f;  // amplitude of a smooth stripe pattern painted on the sprite
  float stripe_period = 10.0f;
};

/// Smooth colour field built from a few low-frequency sinusoids.
Frame smooth_background(int h, int w, uint64_t seed);
/// Band-limited random texture (blurred noise), for correspondence tests.
Frame smooth_texture(int h, int w, uint64_t seed, int blur_radius = 3);
/// Integer translation with wrap-around.
Frame translate_wrap(const Frame& frame, int dx, int dy);

/// Sprite translating at constant velocity (px/frame) over a static background.
SynthVideo moving_sprite(int frames, int h, int w, float vx, float vy, uint64_t seed, std::string label = "sprite");
SynthVideo moving_sprite(int frames, int h, int w, float vx, float vy, uint64_t seed, const SpriteStyle& style,
                         std::string label = "sprite");
/// Sprite circling with the given period in frames.
SynthVideo periodic_motion(int frames, int h, int w, int period, uint64_t seed, std::string label = "periodic");
/// Two distinct shots back to back (background and sprite change at the cut).
SynthVideo two_shot(int frames, int h, int w, uint64_t seed, std::string label = "two_shot");

/// The evaluation clip: a striped sprite (radius 22) crossing a 128x192 frame at
/// (3, 1.2) px/frame.
SpriteStyle desk_style();
SynthVideo desk_clip(int frames = 40, uint64_t seed = 11);
/// The same motion over a background carrying a fine grating (periods 4 and 6 px)
/// that 4x downsampling removes.
SynthVideo detail_clip(int frames = 40, uint64_t seed = 11);
/// Adds amplitude * sin(2 pi x / px) * sin(2 pi (y + 0.5) / py) to every channel, clamped.
Frame add_grating(const Frame& frame, float amplitude, float period_x, float period_y);
/// Renders one frame of a sprite at (cx, cy) over a background; mask receives label 1 where the
/// sprite covers more than half of a pixel.
Frame render_sprite(const Frame& background, float cx, float cy, const SpriteStyle& style, LabelMap* mask = nullptr);

}  // namespace visa::synth

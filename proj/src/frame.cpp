#include "visa/frame.hpp"

#include <algorithm>
#include <cmath>

#include "visa/errors.hpp"

namespace visa {

void FrameSequence::validate() const {
  if (frames.empty()) fail(ErrorCode::NoFrames, "frame sequence is empty");
  if (frame_ids.size() != frames.size())
    fail(ErrorCode::ShapeError, "frame_ids and frames differ in length");
  for (size_t i = 0; i < frames.size(); ++i) {
    if (!frames[i].same_shape(frames.front()))
      fail(ErrorCode::ResolutionMismatch,
           "frame " + std::to_string(i) + " is " + std::to_string(frames[i].height) + "x" +
               std::to_string(frames[i].width) + ", expected " +
               std::to_string(frames.front().height) + "x" + std::to_string(frames.front().width));
    if (i > 0 && frame_ids[i] <= frame_ids[i - 1])
      fail(ErrorCode::ShapeError, "frame_ids must be strictly increasing");
  }
}

FrameSequence FrameSequence::from_frames(std::vector<Frame> frames, std::string label) {
  FrameSequence seq;
  seq.frames = std::move(frames);
  seq.frame_ids.resize(seq.frames.size());
  for (size_t i = 0; i < seq.frame_ids.size(); ++i) seq.frame_ids[i] = static_cast<int>(i);
  seq.source_label = std::move(label);
  return seq;
}

Frame resize_bilinear(const Frame& frame, int target_h, int target_w) {
  if (target_h <= 0 || target_w <= 0) fail(ErrorCode::InvalidTarget, "resize target must be positive");
  if (target_h == frame.height && target_w == frame.width) return frame;
  Frame out(target_h, target_w);
  const double sy = static_cast<double>(frame.height) / target_h;
  const double sx = static_cast<double>(frame.width) / target_w;

  // Half-pixel centres, edge clamped.
  std::vector<int> x0(target_w), x1(target_w);
  std::vector<float> fx(target_w);
  for (int x = 0; x < target_w; ++x) {
    double src = std::max(0.0, (x + 0.5) * sx - 0.5);
    int i0 = std::min(static_cast<int>(src), frame.width - 1);
    x0[x] = i0;
    x1[x] = std::min(i0 + 1, frame.width - 1);
    fx[x] = static_cast<float>(src - i0);
  }
  for (int c = 0; c < Frame::kChannels; ++c) {
    for (int y = 0; y < target_h; ++y) {
      double src = std::max(0.0, (y + 0.5) * sy - 0.5);
      int y0 = std::min(static_cast<int>(src), frame.height - 1);
      int y1 = std::min(y0 + 1, frame.height - 1);
      float fy = static_cast<float>(src - y0);
      for (int x = 0; x < target_w; ++x) {
        float top = frame.at(c, y0, x0[x]) * (1 - fx[x]) + frame.at(c, y0, x1[x]) * fx[x];
        float bot = frame.at(c, y1, x0[x]) * (1 - fx[x]) + frame.at(c, y1, x1[x]) * fx[x];
        out.at(c, y, x) = top * (1 - fy) + bot * fy;
      }
    }
  }
  return out;
}

Frame box_downsample(const Frame& frame, int factor) {
  if (factor < 1) fail(ErrorCode::InvalidFactor, "downsample factor must be >= 1");
  if (factor == 1) return frame;
  if (frame.height % factor != 0 || frame.width % factor != 0)
    fail(ErrorCode::ShapeError, "frame dims not divisible by downsample factor");
  Frame out(frame.height / factor, frame.width / factor);
  const float norm = 1.0f / static_cast<float>(factor * factor);
  for (int c = 0; c < Frame::kChannels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        float acc = 0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx) acc += frame.at(c, y * factor + dy, x * factor + dx);
        out.at(c, y, x) = acc * norm;
      }
  return out;
}

namespace {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

void check_pad_target(const Frame& frame, int target_h, int target_w) {
  if (target_h < frame.height || target_w < frame.width)
    fail(ErrorCode::InvalidTarget, "pad target " + std::to_string(target_h) + "x" +
                                       std::to_string(target_w) + " smaller than source");
}

}  // namespace

Frame pad_mirror(const Frame& frame, int target_h, int target_w) {
  check_pad_target(frame, target_h, target_w);
  Frame out(target_h, target_w);
  const int top = (target_h - frame.height) / 2;
  const int left = (target_w - frame.width) / 2;
  for (int c = 0; c < Frame::kChannels; ++c)
    for (int y = 0; y < target_h; ++y) {
      int sy = reflect_index(y - top, frame.height);
      for (int x = 0; x < target_w; ++x) out.at(c, y, x) = frame.at(c, sy, reflect_index(x - left, frame.width));
    }
  return out;
}

Frame pad_zero(const Frame& frame, int target_h, int target_w) {
  check_pad_target(frame, target_h, target_w);
  Frame out(target_h, target_w, 0.0f);
  const int top = (target_h - frame.height) / 2;
  const int left = (target_w - frame.width) / 2;
  for (int c = 0; c < Frame::kChannels; ++c)
    for (int y = 0; y < frame.height; ++y)
      std::copy_n(&frame.pixels[(static_cast<size_t>(c) * frame.height + y) * frame.width], frame.width,
                  &out.at(c, y + top, left));
  return out;
}

Frame crop(const Frame& frame, const Rect& rect) {
  if (!rect.inside(frame.height, frame.width)) fail(ErrorCode::InvalidRect, "crop rectangle out of bounds");
  Frame out(rect.h, rect.w);
  for (int c = 0; c < Frame::kChannels; ++c)
    for (int y = 0; y < rect.h; ++y)
      for (int x = 0; x < rect.w; ++x) out.at(c, y, x) = frame.at(c, rect.y + y, rect.x + x);
  return out;
}

Frame hflip(const Frame& frame) {
  Frame out(frame.height, frame.width);
  for (int c = 0; c < Frame::kChannels; ++c)
    for (int y = 0; y < frame.height; ++y)
      for (int x = 0; x < frame.width; ++x) out.at(c, y, x) = frame.at(c, y, frame.width - 1 - x);
  return out;
}

Frame concat(std::span<const Frame> frames, Axis axis) {
  if (frames.empty()) fail(ErrorCode::NoFrames, "nothing to concatenate");
  int h = 0, w = 0;
  for (const auto& f : frames) {
    if (axis == Axis::Horizontal) {
      if (f.height != frames[0].height) fail(ErrorCode::ShapeError, "heights differ for horizontal concat");
      w += f.width;
      h = f.height;
    } else {
      if (f.width != frames[0].width) fail(ErrorCode::ShapeError, "widths differ for vertical concat");
      h += f.height;
      w = f.width;
    }
  }
  Frame out(h, w);
  int offset = 0;
  for (const auto& f : frames) {
    for (int c = 0; c < Frame::kChannels; ++c)
      for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) {
          if (axis == Axis::Horizontal)
            out.at(c, y, x + offset) = f.at(c, y, x);
          else
            out.at(c, y + offset, x) = f.at(c, y, x);
        }
    offset += axis == Axis::Horizontal ? f.width : f.height;
  }
  return out;
}

Frame clamp01(Frame frame) {
  for (auto& v : frame.pixels) v = std::clamp(v, 0.0f, 1.0f);
  return frame;
}

Frame lerp(const Frame& a, const Frame& b, float alpha) {
  if (!a.same_shape(b)) fail(ErrorCode::ShapeError, "lerp of differently sized frames");
  Frame out(a.height, a.width);
  for (size_t i = 0; i < a.size(); ++i) out.pixels[i] = alpha * a.pixels[i] + (1.0f - alpha) * b.pixels[i];
  return out;
}

Frame pixel_mean(std::span<const Frame> frames) {
  if (frames.empty()) fail(ErrorCode::EmptySelection, "mean of zero frames");
  Frame out(frames[0].height, frames[0].width);
  std::vector<double> acc(out.size(), 0.0);
  for (const auto& f : frames) {
    if (!f.same_shape(out)) fail(ErrorCode::ShapeError, "mean of differently sized frames");
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += f.pixels[i];
  }
  for (size_t i = 0; i < acc.size(); ++i) out.pixels[i] = static_cast<float>(acc[i] / frames.size());
  return out;
}

double mse(const Frame& a, const Frame& b) {
  if (!a.same_shape(b)) fail(ErrorCode::ShapeError, "mse of differently sized frames");
  double acc = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    acc += d * d;
  }
  return a.empty() ? 0.0 : acc / static_cast<double>(a.size());
}

double mean_abs_diff(const Frame& a, const Frame& b) {
  if (!a.same_shape(b)) fail(ErrorCode::ShapeError, "difference of differently sized frames");
  double acc = 0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::abs(static_cast<double>(a.pixels[i]) - b.pixels[i]);
  return a.empty() ? 0.0 : acc / static_cast<double>(a.size());
}

double gradient_energy(const Frame& frame) {
  double acc = 0;
  size_t count = 0;
  for (int c = 0; c < Frame::kChannels; ++c)
    for (int y = 0; y < frame.height; ++y)
      for (int x = 0; x < frame.width; ++x) {
        double g = 0;
        if (x + 1 < frame.width) {
          double d = frame.at(c, y, x + 1) - frame.at(c, y, x);
          g += d * d;
        }
        if (y + 1 < frame.height) {
          double d = frame.at(c, y + 1, x) - frame.at(c, y, x);
          g += d * d;
        }
        acc += g;
        ++count;
      }
  return count ? acc / static_cast<double>(count) : 0.0;
}

std::vector<float> grey(const Frame& frame) {
  std::vector<float> out(frame.plane_size());
  const size_t plane = frame.plane_size();
  for (size_t i = 0; i < plane; ++i)
    out[i] = (frame.pixels[i] + frame.pixels[plane + i] + frame.pixels[2 * plane + i]) / 3.0f;
  return out;
}

}  // namespace visa

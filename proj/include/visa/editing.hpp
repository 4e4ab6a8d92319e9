#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "visa/autoencoder.hpp"
#include "visa/frame.hpp"
#include "visa/latentops.hpp"
#include "visa/projection.hpp"

namespace visa {

inline constexpr int kStretchIterations = 30;

struct Neighbor {
  int id = 0;
  double similarity = 0;
};

/// Cosine similarity over flattened codes, self excluded, best first (ties by
/// smaller id). Frames within exclude_radius of the query are skipped too.
std::vector<Neighbor> nearest_frames(std::span<const LatentCode> codes, int query_id, int top_k,
                                     int exclude_radius = 0);
double code_cosine(const LatentCode& a, const LatentCode& b);

/// A waypoint is either a frame index or a 2D embedding coordinate (snapped to
/// the nearest frame).
struct Waypoint {
  std::optional<int> frame_id;
  std::optional<std::pair<double, double>> point;
};

/// Waypoints pair up into segments: (w0, w1), (w2, w3), ... Each segment plays
/// the original frames from its first to its second waypoint (backwards when
/// the second comes first); an odd trailing waypoint is a one-frame segment.
/// Every jump between segments gets bridge_frames latent interpolations, and
/// loop adds one more jump from the last frame back to the first.
struct PathSpec {
  std::vector<Waypoint> waypoints;
  int bridge_frames = 1;
  bool loop = false;

  static PathSpec from_json(const std::string& text);
  std::string to_json() const;
};

struct TextureResult {
  FrameSequence frames;
  /// Per output frame: the source frame index, or -1 for bridge frames.
  std::vector<int> sources;
};

TextureResult make_texture(const FrameCodec& codec, std::span<const LatentCode> codes, const PathSpec& path,
                           const std::function<void(double)>& progress = {});
/// Expected output length of make_texture for a resolved list of frame ids.
size_t texture_length(std::span<const int> ids, int bridge_frames, bool loop);
/// Snaps waypoints to frame indices.
std::vector<int> resolve_waypoints(std::span<const LatentCode> codes, std::span<const Waypoint> waypoints);

struct PatchEdit {
  Rect src_rect;
  Rect dst_rect;
  int src_frame_id = -1;  // -1: the edited frame itself

  static std::vector<PatchEdit> list_from_json(const std::string& text);
};

/// Copies each source patch onto its destination (in order), then reprojects n times.
/// Source frames are looked up in `video` by index.
Frame patch_edit_project(const FrameCodec& codec, const Frame& frame, std::span<const PatchEdit> edits, int n,
                         std::span<const Frame> video = {});
/// The raw paste without reprojection.
Frame apply_patches(const Frame& frame, std::span<const PatchEdit> edits, std::span<const Frame> video = {});

Frame stitch(const FrameCodec& codec, std::span<const Frame> frames, Axis axis, int n = 1);
Frame stretch(const FrameCodec& codec, const Frame& frame, int target_w, int n = kStretchIterations);
enum class PadMode { Mirror, Zero };
Frame extrapolate(const FrameCodec& codec, const Frame& frame, int target_h, int target_w,
                  PadMode pad = PadMode::Mirror, int n = kDefaultIterations);

}  // namespace visa

#include "visa/editing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "visa/errors.hpp"

namespace visa {

using nlohmann::json;

double code_cosine(const LatentCode& a, const LatentCode& b) {
  if (a.size() != b.size()) fail(ErrorCode::ShapeError, "codes differ in size");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a.values[i]) * b.values[i];
    na += static_cast<double>(a.values[i]) * a.values[i];
    nb += static_cast<double>(b.values[i]) * b.values[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / std::sqrt(na * nb);
}

std::vector<Neighbor> nearest_frames(std::span<const LatentCode> codes, int query_id, int top_k,
                                     int exclude_radius) {
  if (top_k <= 0) fail(ErrorCode::InvalidK, "top_k must be positive");
  if (query_id < 0 || static_cast<size_t>(query_id) >= codes.size())
    fail(ErrorCode::InvalidPath, "query frame " + std::to_string(query_id) + " is out of range");
  std::vector<Neighbor> all;
  for (size_t i = 0; i < codes.size(); ++i) {
    const int id = static_cast<int>(i);
    if (std::abs(id - query_id) <= exclude_radius) continue;
    all.push_back({id, code_cosine(codes[query_id], codes[i])});
  }
  std::stable_sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.similarity > b.similarity || (a.similarity == b.similarity && a.id < b.id);
  });
  if (all.size() > static_cast<size_t>(top_k)) all.resize(top_k);
  return all;
}

// ------------------------------------------------------------- textures

PathSpec PathSpec::from_json(const std::string& text) {
  PathSpec p;
  try {
    json j = json::parse(text);
    if (j.contains("path")) j = j.at("path");
    for (const auto& w : j.at("waypoints")) {
      Waypoint wp;
      if (w.is_number_integer())
        wp.frame_id = w.get<int>();
      else if (w.is_object() && w.contains("frame_id"))
        wp.frame_id = w.at("frame_id").get<int>();
      else if (w.is_object() && w.contains("x"))
        wp.point = std::make_pair(w.at("x").get<double>(), w.at("y").get<double>());
      else if (w.is_array() && w.size() == 2)
        wp.point = std::make_pair(w[0].get<double>(), w[1].get<double>());
      else
        fail(ErrorCode::InvalidPath, "waypoint must be a frame id or an {x, y} point");
      p.waypoints.push_back(wp);
    }
    p.bridge_frames = j.value("bridge_frames", 1);
    p.loop = j.value("loop", false);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidPath, std::string("malformed path: ") + e.what());
  }
  return p;
}

std::string PathSpec::to_json() const {
  json wps = json::array();
  for (const auto& w : waypoints) {
    if (w.frame_id)
      wps.push_back(*w.frame_id);
    else if (w.point)
      wps.push_back({{"x", w.point->first}, {"y", w.point->second}});
  }
  return json{{"waypoints", wps}, {"bridge_frames", bridge_frames}, {"loop", loop}}.dump();
}

std::vector<int> resolve_waypoints(std::span<const LatentCode> codes, std::span<const Waypoint> waypoints) {
  std::vector<int> ids;
  std::optional<std::vector<Point2D>> points;
  for (const auto& w : waypoints) {
    if (w.frame_id) {
      if (*w.frame_id < 0 || static_cast<size_t>(*w.frame_id) >= codes.size())
        fail(ErrorCode::InvalidPath, "waypoint frame " + std::to_string(*w.frame_id) + " is out of range");
      ids.push_back(*w.frame_id);
      continue;
    }
    if (!w.point) fail(ErrorCode::InvalidPath, "empty waypoint");
    if (!points) points = embed_all(fit_embedding(codes), codes);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& p : *points) {
      const double d = std::hypot(p.x - w.point->first, p.y - w.point->second);
      if (d < best_d) {
        best_d = d;
        best = p.frame_id;
      }
    }
    ids.push_back(best);
  }
  return ids;
}

namespace {

std::vector<std::vector<int>> segments_of(std::span<const int> ids) {
  std::vector<std::vector<int>> segs;
  for (size_t i = 0; i < ids.size(); i += 2) {
    std::vector<int> seg;
    if (i + 1 < ids.size()) {
      const int a = ids[i], b = ids[i + 1], step = b >= a ? 1 : -1;
      for (int t = a;; t += step) {
        seg.push_back(t);
        if (t == b) break;
      }
    } else {
      seg.push_back(ids[i]);
    }
    segs.push_back(std::move(seg));
  }
  return segs;
}

}  // namespace

size_t texture_length(std::span<const int> ids, int bridge_frames, bool loop) {
  size_t total = 0;
  const auto segs = segments_of(ids);
  for (const auto& s : segs) total += s.size();
  const size_t jumps = (segs.empty() ? 0 : segs.size() - 1) + (loop ? 1 : 0);
  return total + jumps * static_cast<size_t>(bridge_frames);
}

TextureResult make_texture(const FrameCodec& codec, std::span<const LatentCode> codes, const PathSpec& path,
                           const std::function<void(double)>& progress) {
  if (path.waypoints.size() < 2) fail(ErrorCode::InvalidPath, "a path needs at least 2 waypoints");
  if (path.bridge_frames < 0) fail(ErrorCode::InvalidPath, "bridge_frames must be >= 0");
  const auto ids = resolve_waypoints(codes, path.waypoints);
  const auto segs = segments_of(ids);
  const double expected = static_cast<double>(texture_length(ids, path.bridge_frames, path.loop));

  TextureResult out;
  std::vector<Frame> frames;
  auto bridge = [&](int from, int to) {
    const int m = path.bridge_frames;
    for (int j = 1; j <= m; ++j) {
      // Uniform spacing, endpoints excluded; alpha weights the frame we leave.
      const double alpha = 1.0 - static_cast<double>(j) / static_cast<double>(m + 1);
      frames.push_back(interpolate(codec, codes[from], codes[to], alpha));
      out.sources.push_back(-1);
      if (progress) progress(static_cast<double>(frames.size()) / expected);
    }
  };
  for (size_t s = 0; s < segs.size(); ++s) {
    if (s > 0) bridge(segs[s - 1].back(), segs[s].front());
    for (int id : segs[s]) {
      frames.push_back(codec.decode(codes[id]));
      out.sources.push_back(id);
      if (progress) progress(static_cast<double>(frames.size()) / expected);
    }
  }
  if (path.loop) bridge(segs.back().back(), segs.front().front());
  out.frames = FrameSequence::from_frames(std::move(frames), "texture");
  return out;
}

// ------------------------------------------------------------- spatial edits

std::vector<PatchEdit> PatchEdit::list_from_json(const std::string& text) {
  std::vector<PatchEdit> edits;
  auto rect = [](const json& r) {
    Rect out;
    if (r.is_array()) {
      if (r.size() != 4) fail(ErrorCode::InvalidRect, "rect must have 4 entries");
      out = {r[0].get<int>(), r[1].get<int>(), r[2].get<int>(), r[3].get<int>()};
    } else {
      out = {r.at("x").get<int>(), r.at("y").get<int>(), r.at("w").get<int>(), r.at("h").get<int>()};
    }
    return out;
  };
  try {
    json j = json::parse(text);
    if (j.is_object() && j.contains("edits")) j = j.at("edits");
    for (const auto& e : j) {
      PatchEdit pe;
      pe.src_rect = rect(e.at("src_rect"));
      pe.dst_rect = rect(e.at("dst_rect"));
      pe.src_frame_id = e.value("src_frame_id", -1);
      edits.push_back(pe);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidRect, std::string("malformed edit list: ") + e.what());
  }
  return edits;
}

Frame apply_patches(const Frame& frame, std::span<const PatchEdit> edits, std::span<const Frame> video) {
  Frame out = frame;
  for (const auto& e : edits) {
    const Frame* src = &frame;
    if (e.src_frame_id >= 0) {
      if (static_cast<size_t>(e.src_frame_id) >= video.size())
        fail(ErrorCode::InvalidRect, "source frame " + std::to_string(e.src_frame_id) + " is out of range");
      src = &video[e.src_frame_id];
      if (!src->same_shape(frame)) fail(ErrorCode::ShapeError, "source frame differs in size");
    }
    if (!e.src_rect.inside(frame.height, frame.width) || !e.dst_rect.inside(frame.height, frame.width))
      fail(ErrorCode::InvalidRect, "edit rectangle outside the frame");
    if (e.src_rect.w != e.dst_rect.w || e.src_rect.h != e.dst_rect.h)
      fail(ErrorCode::InvalidRect, "source and destination rectangles differ in size");
    // Read from a snapshot so overlapping rectangles within one frame behave like a copy.
    const Frame patch = crop(src == &frame ? out : *src, e.src_rect);
    for (int c = 0; c < Frame::kChannels; ++c)
      for (int y = 0; y < e.dst_rect.h; ++y)
        for (int x = 0; x < e.dst_rect.w; ++x) out.at(c, e.dst_rect.y + y, e.dst_rect.x + x) = patch.at(c, y, x);
  }
  return out;
}

Frame patch_edit_project(const FrameCodec& codec, const Frame& frame, std::span<const PatchEdit> edits, int n,
                         std::span<const Frame> video) {
  if (n < 0) fail(ErrorCode::InvalidIterations, "iteration count must be >= 0");
  return iterate_project(codec, apply_patches(frame, edits, video), n);
}

Frame stitch(const FrameCodec& codec, std::span<const Frame> frames, Axis axis, int n) {
  if (frames.empty()) fail(ErrorCode::NoFrames, "nothing to stitch");
  const Frame joined = concat(frames, axis);
  if (joined.height % kDownsampleFactor != 0 || joined.width % kDownsampleFactor != 0)
    fail(ErrorCode::ShapeError, "stitched size must be divisible by 64");
  return iterate_project(codec, joined, n);
}

Frame stretch(const FrameCodec& codec, const Frame& frame, int target_w, int n) {
  if (target_w < frame.width || target_w % kDownsampleFactor != 0)
    fail(ErrorCode::InvalidTarget, "stretch target width must be >= the frame width and divisible by 64");
  if (frame.height % kDownsampleFactor != 0) fail(ErrorCode::ShapeError, "frame height must be divisible by 64");
  return iterate_project(codec, clamp01(resize_bilinear(frame, frame.height, target_w)), n);
}

Frame extrapolate(const FrameCodec& codec, const Frame& frame, int target_h, int target_w, PadMode pad, int n) {
  if (target_h < frame.height || target_w < frame.width || target_h % kDownsampleFactor != 0 ||
      target_w % kDownsampleFactor != 0)
    fail(ErrorCode::InvalidTarget, "extrapolation target must cover the frame and be divisible by 64");
  const Frame padded =
      pad == PadMode::Mirror ? pad_mirror(frame, target_h, target_w) : pad_zero(frame, target_h, target_w);
  return iterate_project(codec, padded, n);
}

}  // namespace visa

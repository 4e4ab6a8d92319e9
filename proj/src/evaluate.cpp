#include "visa/evaluate.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "json.hpp"
#include "visa/errors.hpp"
#include "visa/projection.hpp"
#include "visa/transmit.hpp"

namespace visa {

using nlohmann::json;

TemporalMode parse_temporal_mode(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::toupper(c); });
  if (n == "ALT") return TemporalMode::Alt;
  if (n == "ALL") return TemporalMode::All;
  fail(ErrorCode::InvalidConfig, "temporal mode must be ALT or ALL, got '" + name + "'");
}

std::string to_string(TemporalMode mode) { return mode == TemporalMode::Alt ? "ALT" : "ALL"; }

std::vector<int> training_indices(size_t frame_count, TemporalMode mode) {
  std::vector<int> ids;
  for (size_t i = 0; i < frame_count; i += (mode == TemporalMode::Alt ? 2 : 1)) ids.push_back(static_cast<int>(i));
  return ids;
}

double TemporalEvaluation::mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string TemporalEvaluation::to_json() const {
  auto block = [](const std::vector<double>& p, const std::vector<double>& s) {
    return json{{"psnr_mean", mean(p)}, {"ssim_mean", mean(s)}, {"psnr", p}, {"ssim", s}};
  };
  return json{{"mode", to_string(mode)},
              {"reprojection_n", reprojection_n},
              {"frame_ids", frame_ids},
              {"interpolated", block(psnr_interp, ssim_interp)},
              {"reprojected", block(psnr_reprojected, ssim_reprojected)},
              {"keyframe_copy", block(psnr_copy, ssim_copy)}}
      .dump(2);
}

TemporalEvaluation evaluate_temporal(const FrameCodec& codec, const FrameSequence& seq, TemporalMode mode,
                                     int reprojection_n) {
  if (seq.size() < 3) fail(ErrorCode::NoFrames, "temporal evaluation needs at least 3 frames");
  if (reprojection_n < 0) fail(ErrorCode::InvalidIterations, "iteration count must be >= 0");
  TemporalEvaluation ev;
  ev.mode = mode;
  ev.reprojection_n = reprojection_n;
  const auto& f = seq.frames;
  for (size_t i = 1; i + 1 < f.size(); i += 2) {
    const Frame mid = interpolate(codec, codec.encode(f[i - 1]), codec.encode(f[i + 1]), 0.5);
    const Frame reproj = iterate_project(codec, mid, reprojection_n);
    ev.frame_ids.push_back(static_cast<int>(i));
    ev.psnr_interp.push_back(psnr(mid, f[i]));
    ev.ssim_interp.push_back(ssim(mid, f[i]));
    ev.psnr_reprojected.push_back(psnr(reproj, f[i]));
    ev.ssim_reprojected.push_back(ssim(reproj, f[i]));
    ev.psnr_copy.push_back(psnr(f[i - 1], f[i]));
    ev.ssim_copy.push_back(ssim(f[i - 1], f[i]));
  }
  return ev;
}

std::string FlipSeparation::to_json() const {
  json pts = json::array();
  for (const auto& p : points) pts.push_back({{"frame_id", p.frame_id}, {"x", p.x}, {"y", p.y}, {"label", p.source_label}});
  return json{{"purity", clusters.purity},
              {"clusters", json::parse(clusters.to_json())},
              {"points", pts}}
      .dump(2);
}

FlipSeparation flip_separation(const FrameCodec& codec, std::span<const Frame> frames, int project_n,
                               uint64_t seed) {
  if (frames.size() < 2) fail(ErrorCode::NoFrames, "flip analysis needs at least 2 frames");
  std::vector<LatentCode> codes;
  std::vector<std::string> labels;
  std::vector<int> ids;
  for (size_t i = 0; i < frames.size(); ++i) {
    codes.push_back(codec.encode(frames[i]));
    labels.emplace_back("original");
    ids.push_back(static_cast<int>(i));
  }
  for (size_t i = 0; i < frames.size(); ++i) {
    codes.push_back(codec.encode(iterate_project(codec, hflip(frames[i]), project_n)));
    labels.emplace_back("flipped");
    ids.push_back(static_cast<int>(i));
  }
  FlipSeparation out;
  out.points = embed_all(fit_embedding(codes), codes, ids, labels);
  std::vector<std::vector<double>> xy;
  for (const auto& p : out.points) xy.push_back({p.x, p.y});
  out.clusters = cluster_vectors(xy, labels, 2, seed);
  return out;
}

}  // namespace visa

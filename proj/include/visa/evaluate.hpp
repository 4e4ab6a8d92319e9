#pragma once

#include <span>
#include <string>
#include <vector>

#include "visa/autoencoder.hpp"
#include "visa/frame.hpp"
#include "visa/latentops.hpp"

namespace visa {

// Temporal super-resolution protocol: a model trained on every other frame (ALT)
// or on all frames (ALL) synthesizes each odd frame from its two neighbours.
enum class TemporalMode { Alt, All };
TemporalMode parse_temporal_mode(const std::string& name);
std::string to_string(TemporalMode mode);

/// Frame indices used for training under the mode.
std::vector<int> training_indices(size_t frame_count, TemporalMode mode);

struct TemporalEvaluation {
  TemporalMode mode = TemporalMode::Alt;
  int reprojection_n = 0;
  std::vector<int> frame_ids;  // the synthesized (odd) frames
  std::vector<double> psnr_interp, ssim_interp;
  std::vector<double> psnr_reprojected, ssim_reprojected;
  std::vector<double> psnr_copy, ssim_copy;  // previous keyframe as the estimate

  static double mean(const std::vector<double>& v);
  std::string to_json() const;
};

/// Midpoint of the neighbours' codes for every odd frame with two neighbours.
/// The reprojected variant applies iterate_project(reprojection_n) to it.
TemporalEvaluation evaluate_temporal(const FrameCodec& codec, const FrameSequence& seq, TemporalMode mode,
                                     int reprojection_n);

struct FlipSeparation {
  std::vector<Point2D> points;  // originals first, labelled "original" / "flipped"
  ClusterResult clusters;       // K = 2 over the 2D points

  std::string to_json() const;
};

/// Embeds the codes of the frames and of their mirror images together and
/// clusters the 2D points into two groups. Flipped frames are reprojected
/// project_n times before encoding (0 = encode the raw mirror image).
FlipSeparation flip_separation(const FrameCodec& codec, std::span<const Frame> frames, int project_n,
                               uint64_t seed = 0);

}  // namespace visa

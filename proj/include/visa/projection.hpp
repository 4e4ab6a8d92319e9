#pragma once

#include <span>
#include <string>
#include <vector>

#include "visa/autoencoder.hpp"
#include "visa/latentops.hpp"

namespace visa {

inline constexpr int kDefaultIterations = 5;
inline constexpr int kForeignIterations = 25;

struct ProjectionStep {
  Frame frame;
  LatentCode code;
  Point2D point;  // meaningful only when an embedding was supplied
};

struct ProjectionTrace {
  std::vector<ProjectionStep> iterations;
  /// Mean squared change between consecutive outputs (the first entry compares
  /// against the input).
  std::vector<double> residuals;

  std::string to_json() const;
};

/// One encode-decode pass.
Frame project(const FrameCodec& codec, const Frame& frame);
/// n-fold composition of project; n = 0 returns the input.
Frame iterate_project(const FrameCodec& codec, const Frame& frame, int n = kDefaultIterations,
                      ProjectionTrace* trace = nullptr, const EmbeddingModel* em = nullptr);

/// Bilinear upsample to the target size, then iterate_project(n).
Frame spatial_superres(const FrameCodec& codec, const Frame& lowres, int target_h, int target_w,
                       int n = kDefaultIterations);
/// Box-downsample by factor, then bilinear back to the original size.
Frame degrade(const Frame& frame, int factor);

/// Decodes back-projected embedding points.
std::vector<Frame> sample_manifold(const FrameCodec& codec, const EmbeddingModel& em,
                                   std::span<const std::pair<double, double>> points);

struct ForeignAlignment {
  FrameSequence outputs;
  std::vector<ProjectionTrace> traces;
};
ForeignAlignment align_foreign(const FrameCodec& codec, const FrameSequence& foreign, int n = kForeignIterations,
                               const EmbeddingModel* em = nullptr);

/// Linear autoencoder: encode = U^T (x - mean), decode = mean + U z, with U the
/// top principal directions of a set of frames. Decoding does not clamp, so the
/// composition is an exact projection.
class LinearAutoencoder : public FrameCodec {
 public:
  LinearAutoencoder(std::span<const Frame> frames, int components);

  LatentCode encode(const Frame& frame) const override;
  Frame decode(const LatentCode& code) const override;
  int components() const { return components_; }

 private:
  int height_ = 0;
  int width_ = 0;
  int components_ = 0;
  std::vector<double> mean_;
  std::vector<double> basis_;  // components x dim, row-major
};

}  // namespace visa

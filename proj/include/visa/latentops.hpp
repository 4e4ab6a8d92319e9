#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "visa/autoencoder.hpp"
#include "visa/frame.hpp"

namespace visa {

// ------------------------------------------------------------- embedding

struct Point2D {
  double x = 0;
  double y = 0;
  int frame_id = 0;
  std::string source_label;
};

/// Top-2 principal directions of a set of flattened codes.
struct EmbeddingModel {
  std::vector<double> mean;
  std::array<std::vector<double>, 2> basis;
  std::array<double, 2> explained_variance{0, 0};
  // Shape of the codes the model was fit on, for back-projection.
  int channels = 0;
  int height = 0;
  int width = 0;
  std::pair<int, int> source_shape{0, 0};

  bool fitted() const { return !mean.empty(); }
};

/// Exact PCA. Each basis vector is oriented so its largest-magnitude entry is positive.
EmbeddingModel fit_embedding(std::span<const LatentCode> codes);
Point2D embed(const EmbeddingModel& em, const LatentCode& code, int frame_id = 0, std::string source_label = {});
std::vector<Point2D> embed_all(const EmbeddingModel& em, std::span<const LatentCode> codes,
                               std::span<const int> frame_ids = {}, std::span<const std::string> labels = {});
/// mean + x * b1 + y * b2, reshaped as a code.
LatentCode back_project(const EmbeddingModel& em, double x, double y);
std::string points_to_json(std::span<const Point2D> points);

// ------------------------------------------------------------- averages and interpolation

LatentCode average_codes(std::span<const LatentCode> codes);
/// Decodes the mean code, then applies `iterations` reprojections.
Frame decode_average(const FrameCodec& codec, std::span<const LatentCode> codes, int iterations);
/// Index of the code nearest (Euclidean) to the mean of the selection.
size_t mediod_index(std::span<const LatentCode> codes);

/// alpha * a + (1 - alpha) * b, elementwise.
LatentCode mix_codes(const LatentCode& a, const LatentCode& b, double alpha);
/// decode(alpha * a + (1 - alpha) * b); alpha = 1 gives decode(a).
Frame interpolate(const FrameCodec& codec, const LatentCode& a, const LatentCode& b, double alpha);
/// Output sample j sits at time j * (N - 1) / (M - 1) with M = round((N - 1) * factor) + 1.
/// factor >= 1 decodes latent interpolations between the bracketing codes; factor < 1
/// subsamples the nearest originals.
FrameSequence resample_timeline(const FrameCodec& codec, std::span<const LatentCode> codes, double factor);

// ------------------------------------------------------------- clustering

struct ClusterResult {
  int K = 0;
  std::vector<int> assignments;
  std::vector<std::vector<double>> centroids;
  std::vector<double> cluster_purity;
  std::vector<int> cluster_size;
  /// Fraction of all codes that carry their cluster's majority label.
  double purity = 0;
  /// (cumulative coverage, purity) with clusters sorted by purity, descending.
  std::vector<std::pair<double, double>> purity_curve;
  double auc = 0;
  double inertia = 0;

  std::string to_json() const;
  std::string curve_csv() const;
};

/// k-means with k-means++ seeding over flattened codes; labels are the ground truth
/// used for purity.
ClusterResult cluster(std::span<const LatentCode> codes, std::span<const std::string> labels, int K,
                      uint64_t seed, int restarts = 8);
ClusterResult cluster_vectors(const std::vector<std::vector<double>>& data, std::span<const std::string> labels,
                              int K, uint64_t seed, int restarts = 8);
/// Purity bookkeeping for a given assignment.
void score_purity(ClusterResult& result, std::span<const std::string> labels);

// ------------------------------------------------------------- pixel codes

/// Per-pixel hypercolumns: every encoder activation map resized (bilinear) to the
/// frame size and concatenated. Stored pixel-major: codes[(y * width + x) * dim + d].
struct PixelCodeField {
  int height = 0;
  int width = 0;
  int dim = 0;
  std::vector<float> codes;
  /// Channels contributed by each encoder layer, in order. Empty means one block.
  std::vector<int> layer_dims;

  const float* at(int y, int x) const { return codes.data() + (static_cast<size_t>(y) * width + x) * dim; }
};

struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<int> dx;
  std::vector<int> dy;
  std::vector<uint8_t> valid;  // 0 where the source vector is zero or nothing matched

  size_t index(int y, int x) const { return static_cast<size_t>(y) * width + x; }
};

PixelCodeField pixel_codes(const VideoAutoencoder& model, const Frame& frame);
/// For each pixel of a, the most similar pixel of b within the square window;
/// near-ties go to the smaller displacement. Similarity is the mean over layers
/// of the per-layer cosine, so coarse layers with many channels do not drown out
/// the fine ones.
FlowField correspond(const PixelCodeField& a, const PixelCodeField& b, int search_radius);
/// masks[0] is mask0; masks[t + 1] pulls labels from masks[t] along correspond(t + 1, t).
std::vector<LabelMap> propagate_mask(const VideoAutoencoder& model, std::span<const Frame> frames,
                                     const LabelMap& mask0, int search_radius = 16,
                                     const std::function<void(double)>& progress = {});

double mask_iou(const LabelMap& a, const LabelMap& b, int32_t label = 1);

/// Flattened code as doubles.
std::vector<double> flatten(const LatentCode& code);

}  // namespace visa

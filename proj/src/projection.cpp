#include "visa/projection.hpp"

#include <Eigen/Dense>
#include <algorithm>

#include "json.hpp"
#include "visa/errors.hpp"

namespace visa {

using nlohmann::json;

std::string ProjectionTrace::to_json() const {
  json steps = json::array();
  for (size_t i = 0; i < iterations.size(); ++i)
    steps.push_back({{"iteration", i + 1}, {"x", iterations[i].point.x}, {"y", iterations[i].point.y}});
  return json{{"residuals", residuals}, {"steps", steps}}.dump();
}

Frame project(const FrameCodec& codec, const Frame& frame) { return codec.decode(codec.encode(frame)); }

Frame iterate_project(const FrameCodec& codec, const Frame& frame, int n, ProjectionTrace* trace,
                      const EmbeddingModel* em) {
  if (n < 0) fail(ErrorCode::InvalidIterations, "iteration count must be >= 0");
  Frame current = frame;
  for (int i = 0; i < n; ++i) {
    LatentCode code = codec.encode(current);
    Frame next = codec.decode(code);
    if (trace) {
      trace->residuals.push_back(next.same_shape(current) ? mse(next, current) : 0.0);
      ProjectionStep step;
      if (em && em->fitted() && code.size() == em->mean.size()) step.point = embed(*em, code, i + 1);
      step.frame = next;
      step.code = std::move(code);
      trace->iterations.push_back(std::move(step));
    }
    current = std::move(next);
  }
  return current;
}

Frame degrade(const Frame& frame, int factor) {
  if (factor < 1) fail(ErrorCode::InvalidFactor, "degradation factor must be >= 1");
  if (factor == 1) return frame;
  return clamp01(resize_bilinear(box_downsample(frame, factor), frame.height, frame.width));
}

Frame spatial_superres(const FrameCodec& codec, const Frame& lowres, int target_h, int target_w, int n) {
  if (target_h <= 0 || target_w <= 0 || target_h % kDownsampleFactor != 0 || target_w % kDownsampleFactor != 0)
    fail(ErrorCode::ShapeError, "super-resolution target must be divisible by 64");
  if (n < 0) fail(ErrorCode::InvalidIterations, "iteration count must be >= 0");
  return iterate_project(codec, clamp01(resize_bilinear(lowres, target_h, target_w)), n);
}

std::vector<Frame> sample_manifold(const FrameCodec& codec, const EmbeddingModel& em,
                                   std::span<const std::pair<double, double>> points) {
  if (!em.fitted()) fail(ErrorCode::NotFitted, "embedding has not been fit");
  std::vector<Frame> out;
  out.reserve(points.size());
  for (const auto& [x, y] : points) out.push_back(codec.decode(back_project(em, x, y)));
  return out;
}

ForeignAlignment align_foreign(const FrameCodec& codec, const FrameSequence& foreign, int n,
                               const EmbeddingModel* em) {
  if (foreign.empty()) fail(ErrorCode::NoFrames, "foreign sequence is empty");
  ForeignAlignment out;
  std::vector<Frame> frames;
  for (const auto& f : foreign.frames) {
    ProjectionTrace trace;
    frames.push_back(iterate_project(codec, f, n, &trace, em));
    out.traces.push_back(std::move(trace));
  }
  out.outputs = FrameSequence::from_frames(std::move(frames), foreign.source_label);
  out.outputs.frame_ids = foreign.frame_ids;
  return out;
}

// ------------------------------------------------------------- linear autoencoder

LinearAutoencoder::LinearAutoencoder(std::span<const Frame> frames, int components) {
  if (frames.size() < 2) fail(ErrorCode::InsufficientData, "linear autoencoder needs at least 2 frames");
  if (components < 1 || static_cast<size_t>(components) >= frames.size())
    fail(ErrorCode::InvalidConfig, "components must lie in [1, frames - 1]");
  height_ = frames.front().height;
  width_ = frames.front().width;
  components_ = components;
  const Eigen::Index n = static_cast<Eigen::Index>(frames.size());
  const Eigen::Index d = static_cast<Eigen::Index>(frames.front().size());
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!frames[i].same_shape(frames.front())) fail(ErrorCode::ResolutionMismatch, "frames differ in size");
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = frames[i].pixels[j];
  }
  const Eigen::RowVectorXd mean = X.colwise().mean();
  X.rowwise() -= mean;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinV);
  mean_.assign(mean.data(), mean.data() + d);
  basis_.resize(static_cast<size_t>(components) * d);
  for (int k = 0; k < components; ++k)
    for (Eigen::Index j = 0; j < d; ++j) basis_[k * d + j] = svd.matrixV()(j, k);
}

LatentCode LinearAutoencoder::encode(const Frame& frame) const {
  if (frame.height != height_ || frame.width != width_)
    fail(ErrorCode::ShapeError, "frame does not match the linear autoencoder");
  const size_t d = mean_.size();
  LatentCode code;
  code.channels = components_;
  code.height = 1;
  code.width = 1;
  code.source_shape = {height_, width_};
  code.values.resize(components_);
  for (int k = 0; k < components_; ++k) {
    double acc = 0;
    for (size_t j = 0; j < d; ++j) acc += basis_[k * d + j] * (frame.pixels[j] - mean_[j]);
    code.values[k] = static_cast<float>(acc);
  }
  return code;
}

Frame LinearAutoencoder::decode(const LatentCode& code) const {
  if (code.channels != components_ || code.size() != static_cast<size_t>(components_))
    fail(ErrorCode::ShapeError, "code does not match the linear autoencoder");
  const size_t d = mean_.size();
  Frame out(height_, width_);
  for (size_t j = 0; j < d; ++j) {
    double acc = mean_[j];
    for (int k = 0; k < components_; ++k) acc += basis_[k * d + j] * code.values[k];
    out.pixels[j] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace visa

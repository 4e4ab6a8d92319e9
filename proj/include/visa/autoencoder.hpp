#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "visa/frame.hpp"
#include "visa/nn.hpp"

namespace visa {

/// Spatial reduction of the encoder: four stride-2 convolutions and two 2x2 max-pools.
inline constexpr int kDownsampleFactor = 64;
inline constexpr int kEncoderLayers = 6;
inline constexpr int kDecoderLayers = 6;

struct AutoencoderConfig {
  int base_channels = 64;
  std::array<int, kEncoderLayers> channel_progression{64, 128, 256, 512, 768, 768};
  int input_h = 256;
  int input_w = 512;
  bool hflip_augmentation = false;
  bool multires_augmentation = false;
  std::vector<double> multires_scales{1.0, 0.5, 0.25, 0.125};

  /// Default progression k, 2k, 4k, 8k, 12k, 12k at the given training size.
  static AutoencoderConfig with_base(int k, int h, int w);

  int latent_channels() const { return channel_progression.back(); }
  int latent_h(int frame_h) const { return frame_h / kDownsampleFactor; }
  int latent_w(int frame_w) const { return frame_w / kDownsampleFactor; }
  /// Throws InvalidConfig when the invariants do not hold.
  void validate() const;
};

struct TrainConfig {
  int batch_size = 6;
  double lr = 0.0002;
  int epochs_constant = 100;
  int epochs_decay = 100;
  int large_video_threshold = 3000;
  int large_video_epochs = 40;
  uint64_t seed = 0;

  void validate() const;
  /// Number of epochs run for a training set of frame_count frames.
  int total_epochs(size_t frame_count) const;
  /// Learning rate during 0-based epoch for a training set of frame_count frames.
  double lr_at(int epoch, size_t frame_count) const;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0;
  double lr = 0;
  double wall_time_s = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int total_epochs = 0;
  size_t frame_count = 0;
  int batch_size = 0;
  bool hflip_augmentation = false;
  bool multires_augmentation = false;
  uint64_t seed = 0;

  std::string to_json() const;
};

/// Encoder output for one frame: channels x height x width, row-major per channel.
struct LatentCode {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> values;
  std::pair<int, int> source_shape{0, 0};

  size_t size() const { return values.size(); }
  bool same_shape(const LatentCode& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  bool operator==(const LatentCode&) const = default;
};

/// Anything that maps frames to codes and back. The projection operators are
/// written against this interface so a linear (PCA) codec can stand in for
/// the convolutional model.
class FrameCodec {
 public:
  virtual ~FrameCodec() = default;
  virtual LatentCode encode(const Frame& frame) const = 0;
  virtual Frame decode(const LatentCode& code) const = 0;
};

/// The convolutional network. T is float for real use; double is used by the
/// gradient check.
template <typename T>
class AutoencoderNet {
 public:
  AutoencoderNet() = default;
  explicit AutoencoderNet(const std::array<int, kEncoderLayers>& progression);

  void init(uint64_t seed);

  // Inference (running batch-norm statistics). Thread-safe.
  nn::Tensor<T> encode(const nn::Tensor<T>& x) const;
  nn::Tensor<T> decode(const nn::Tensor<T>& z) const;
  /// Post-activation output of each encoder convolution (before pooling).
  std::vector<nn::Tensor<T>> encoder_activations(const nn::Tensor<T>& x) const;

  /// Training-mode forward pass, mean squared error against target, and
  /// backward pass. Gradients are accumulated into the parameter grads.
  double train_step(const nn::Tensor<T>& input, const nn::Tensor<T>& target);
  /// Training-mode forward pass only (batch statistics, no parameter updates
  /// other than running statistics).
  nn::Tensor<T> forward_train(const nn::Tensor<T>& input);

  std::vector<nn::ParamRef<T>> params();
  const std::array<int, kEncoderLayers>& progression() const { return progression_; }

 private:
  struct EncoderStage {
    nn::Conv2d<T> conv;
    nn::BatchNorm2d<T> bn;
    nn::ReLU<T> relu;
    nn::MaxPool2<T> pool;
    bool pooled = false;
  };
  struct DecoderStage {
    nn::ConvTranspose2d<T> deconv;
    nn::BatchNorm2d<T> bn;
    nn::ReLU<T> relu;
  };

  std::array<int, kEncoderLayers> progression_{};
  std::vector<EncoderStage> encoder_;
  std::vector<DecoderStage> decoder_;
  nn::Conv2d<T> head_;
  nn::Sigmoid<T> sigmoid_;
};

class VideoAutoencoder : public FrameCodec {
 public:
  VideoAutoencoder() = default;
  VideoAutoencoder(AutoencoderConfig config, uint64_t seed);

  LatentCode encode(const Frame& frame) const override;
  Frame decode(const LatentCode& code) const override;
  std::vector<LatentCode> encode_all(std::span<const Frame> frames) const;
  std::vector<Frame> decode_all(std::span<const LatentCode> codes) const;
  Frame reconstruct(const Frame& frame) const;
  std::vector<nn::Tensor<float>> encoder_activations(const Frame& frame) const;

  const AutoencoderConfig& config() const { return config_; }
  AutoencoderNet<float>& net() { return net_; }
  const AutoencoderNet<float>& net() const { return net_; }

  std::vector<uint8_t> serialize_weights() const;
  /// Throws CorruptBundle on malformed or mismatching weight blobs.
  void load_weights(std::span<const uint8_t> bytes);

 private:
  AutoencoderConfig config_;
  AutoencoderNet<float> net_;
};

/// Builds an untrained model; asserts the encoder/decoder scale bookkeeping.
VideoAutoencoder build_model(const AutoencoderConfig& config, uint64_t seed);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minimizes mean squared reconstruction error over the frames (an unordered
/// set) with Adam. Mutates model in place.
TrainHistory train(VideoAutoencoder& model, const FrameSequence& frames, const TrainConfig& tc,
                   const EpochCallback& on_epoch = {});

/// Mean over frames of the per-frame mean squared pixel error of g(f(x)).
double reconstruction_loss(const VideoAutoencoder& model, std::span<const Frame> frames);

// Batch conversions between frames and the channel-major tensor layout.
template <typename T>
nn::Tensor<T> frames_to_tensor(std::span<const Frame> frames);
template <typename T>
std::vector<Frame> tensor_to_frames(const nn::Tensor<T>& t);
template <typename T>
nn::Tensor<T> codes_to_tensor(std::span<const LatentCode> codes);

void check_frame_dims(const Frame& frame);

}  // namespace visa

#include "visa/autoencoder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "json.hpp"
#include "visa/errors.hpp"

namespace visa {

using nn::Tensor;

// ------------------------------------------------------------ configs

AutoencoderConfig AutoencoderConfig::with_base(int k, int h, int w) {
  AutoencoderConfig c;
  c.base_channels = k;
  c.channel_progression = {k, 2 * k, 4 * k, 8 * k, 12 * k, 12 * k};
  c.input_h = h;
  c.input_w = w;
  return c;
}

void AutoencoderConfig::validate() const {
  if (base_channels <= 0) fail(ErrorCode::InvalidConfig, "base_channels must be positive");
  for (int c : channel_progression)
    if (c <= 0) fail(ErrorCode::InvalidConfig, "channel widths must be positive");
  if (channel_progression.front() != base_channels)
    fail(ErrorCode::InvalidConfig, "first encoder width must equal base_channels");
  if (channel_progression.back() != 12 * base_channels)
    fail(ErrorCode::InvalidConfig, "last encoder width must be 12 * base_channels");
  if (input_h <= 0 || input_w <= 0 || input_h % kDownsampleFactor != 0 || input_w % kDownsampleFactor != 0)
    fail(ErrorCode::InvalidConfig, "input size " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                                       " is not divisible by 64");
  if (multires_augmentation) {
    if (multires_scales.empty()) fail(ErrorCode::InvalidConfig, "multires augmentation needs scales");
    for (double s : multires_scales)
      if (!(s > 0.0 && s <= 1.0)) fail(ErrorCode::InvalidConfig, "multires scales must lie in (0, 1]");
  }
}

void TrainConfig::validate() const {
  if (batch_size <= 0 || !(lr > 0) || epochs_constant < 0 || epochs_decay < 0 ||
      epochs_constant + epochs_decay <= 0 || large_video_threshold <= 0 || large_video_epochs <= 0)
    fail(ErrorCode::InvalidConfig, "training configuration values must be positive");
}

int TrainConfig::total_epochs(size_t frame_count) const {
  if (frame_count > static_cast<size_t>(large_video_threshold)) return large_video_epochs;
  return epochs_constant + epochs_decay;
}

double TrainConfig::lr_at(int epoch, size_t frame_count) const {
  int constant = epochs_constant, decay = epochs_decay;
  if (frame_count > static_cast<size_t>(large_video_threshold)) {
    // Same shape of schedule compressed into the shorter run.
    constant = large_video_epochs / 2;
    decay = large_video_epochs - constant;
  }
  if (epoch < constant) return lr;
  const double progress = static_cast<double>(epoch - constant + 1) / static_cast<double>(decay + 1);
  return lr * std::max(0.0, 1.0 - progress);
}

std::string TrainHistory::to_json() const {
  nlohmann::json j;
  j["total_epochs"] = total_epochs;
  j["frame_count"] = frame_count;
  j["batch_size"] = batch_size;
  j["hflip_augmentation"] = hflip_augmentation;
  j["multires_augmentation"] = multires_augmentation;
  j["seed"] = seed;
  auto& arr = j["epochs"] = nlohmann::json::array();
  for (const auto& e : epochs)
    arr.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"lr", e.lr}, {"wall_time_s", e.wall_time_s}});
  return j.dump(2);
}

// ------------------------------------------------------ tensor helpers

void check_frame_dims(const Frame& frame) {
  if (frame.height <= 0 || frame.width <= 0 || frame.height % kDownsampleFactor != 0 ||
      frame.width % kDownsampleFactor != 0)
    fail(ErrorCode::ShapeError, "frame " + std::to_string(frame.height) + "x" + std::to_string(frame.width) +
                                    " is not divisible by 64");
}

template <typename T>
Tensor<T> frames_to_tensor(std::span<const Frame> frames) {
  if (frames.empty()) fail(ErrorCode::NoFrames, "empty batch");
  const int h = frames[0].height, w = frames[0].width, n = static_cast<int>(frames.size());
  Tensor<T> t(Frame::kChannels, n, h, w);
  for (int s = 0; s < n; ++s) {
    if (!frames[s].same_shape(frames[0])) fail(ErrorCode::ShapeError, "batch frames differ in size");
    for (int c = 0; c < Frame::kChannels; ++c)
      std::copy_n(frames[s].pixels.data() + c * frames[s].plane_size(), frames[s].plane_size(), t.plane_ptr(c, s));
  }
  return t;
}

template <typename T>
std::vector<Frame> tensor_to_frames(const Tensor<T>& t) {
  if (t.c != Frame::kChannels) fail(ErrorCode::ShapeError, "tensor does not have 3 channels");
  std::vector<Frame> out;
  out.reserve(t.n);
  for (int s = 0; s < t.n; ++s) {
    Frame f(t.h, t.w);
    for (int c = 0; c < Frame::kChannels; ++c) {
      const T* p = t.plane_ptr(c, s);
      std::transform(p, p + t.plane(), f.pixels.begin() + c * f.plane_size(), [](T v) { return static_cast<float>(v); });
    }
    out.push_back(std::move(f));
  }
  return out;
}

template <typename T>
Tensor<T> codes_to_tensor(std::span<const LatentCode> codes) {
  if (codes.empty()) fail(ErrorCode::EmptySelection, "empty code batch");
  const auto& first = codes[0];
  Tensor<T> t(first.channels, static_cast<int>(codes.size()), first.height, first.width);
  for (size_t s = 0; s < codes.size(); ++s) {
    if (!codes[s].same_shape(first)) fail(ErrorCode::ShapeError, "code batch differs in shape");
    const size_t plane = static_cast<size_t>(first.height) * first.width;
    for (int c = 0; c < first.channels; ++c)
      std::copy_n(codes[s].values.data() + c * plane, plane, t.plane_ptr(c, static_cast<int>(s)));
  }
  return t;
}

template Tensor<float> frames_to_tensor<float>(std::span<const Frame>);
template Tensor<double> frames_to_tensor<double>(std::span<const Frame>);
template std::vector<Frame> tensor_to_frames<float>(const Tensor<float>&);
template std::vector<Frame> tensor_to_frames<double>(const Tensor<double>&);
template Tensor<float> codes_to_tensor<float>(std::span<const LatentCode>);
template Tensor<double> codes_to_tensor<double>(std::span<const LatentCode>);

// ------------------------------------------------------- AutoencoderNet

template <typename T>
AutoencoderNet<T>::AutoencoderNet(const std::array<int, kEncoderLayers>& progression) : progression_(progression) {
  int in = Frame::kChannels;
  for (int i = 0; i < kEncoderLayers; ++i) {
    EncoderStage s;
    const bool strided = i < 4;
    s.conv = nn::Conv2d<T>(in, progression[i], 5, strided ? 2 : 1, 2, false);
    s.bn = nn::BatchNorm2d<T>(progression[i]);
    s.pooled = !strided;
    encoder_.push_back(std::move(s));
    in = progression[i];
  }
  for (int i = 0; i < kDecoderLayers; ++i) {
    DecoderStage s;
    const int out = progression[kEncoderLayers - 1 - i];
    s.deconv = nn::ConvTranspose2d<T>(in, out, 4, 2, 1, false);
    s.bn = nn::BatchNorm2d<T>(out);
    decoder_.push_back(std::move(s));
    in = out;
  }
  head_ = nn::Conv2d<T>(in, Frame::kChannels, 1, 1, 0, true);

  // Scale bookkeeping: the encoder must shrink by exactly 64 and the decoder
  // must grow by exactly 64.
  int size = kDownsampleFactor;
  for (const auto& s : encoder_) {
    size = s.conv.output_size(size);
    if (s.pooled) size /= 2;
  }
  int grown = size;
  for (const auto& s : decoder_) grown = s.deconv.output_size(grown);
  if (size != 1 || grown != kDownsampleFactor)
    fail(ErrorCode::InvalidConfig, "encoder/decoder scale factors do not cancel");
}

template <typename T>
void AutoencoderNet<T>::init(uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& s : encoder_) s.conv.init(rng);
  for (auto& s : decoder_) s.deconv.init(rng);
  head_.init(rng);
}

template <typename T>
Tensor<T> AutoencoderNet<T>::encode(const Tensor<T>& x) const {
  Tensor<T> h = x;
  for (const auto& s : encoder_) {
    h = s.bn.infer(s.conv.infer(h));
    nn::ReLU<T>::apply(h);
    if (s.pooled) h = nn::MaxPool2<T>::infer(h);
  }
  return h;
}

template <typename T>
Tensor<T> AutoencoderNet<T>::decode(const Tensor<T>& z) const {
  if (z.c != progression_.back())
    fail(ErrorCode::ShapeError, "latent code has " + std::to_string(z.c) + " channels, model expects " +
                                    std::to_string(progression_.back()));
  Tensor<T> h = z;
  for (const auto& s : decoder_) {
    h = s.bn.infer(s.deconv.infer(h));
    nn::ReLU<T>::apply(h);
  }
  h = head_.infer(h);
  nn::Sigmoid<T>::apply(h);
  return h;
}

template <typename T>
std::vector<Tensor<T>> AutoencoderNet<T>::encoder_activations(const Tensor<T>& x) const {
  std::vector<Tensor<T>> out;
  Tensor<T> h = x;
  for (const auto& s : encoder_) {
    h = s.bn.infer(s.conv.infer(h));
    nn::ReLU<T>::apply(h);
    out.push_back(h);
    if (s.pooled) h = nn::MaxPool2<T>::infer(h);
  }
  return out;
}

template <typename T>
Tensor<T> AutoencoderNet<T>::forward_train(const Tensor<T>& input) {
  Tensor<T> h = input;
  for (size_t i = 0; i < encoder_.size(); ++i) {
    auto& s = encoder_[i];
    h = s.bn.forward(s.conv.forward(h, true), true);
    s.relu.forward_inplace(h, true);
    if (s.pooled) h = s.pool.forward(h, true);
  }
  for (auto& s : decoder_) {
    h = s.bn.forward(s.deconv.forward(h, true), true);
    s.relu.forward_inplace(h, true);
  }
  h = head_.forward(h, true);
  sigmoid_.forward_inplace(h, true);
  return h;
}

template <typename T>
double AutoencoderNet<T>::train_step(const Tensor<T>& input, const Tensor<T>& target) {
  Tensor<T> out = forward_train(input);
  if (out.size() != target.size()) fail(ErrorCode::ShapeError, "target shape differs from output");
  double loss = 0;
  const T scale = static_cast<T>(2.0 / static_cast<double>(out.size()));
  Tensor<T> grad(out.c, out.n, out.h, out.w);
  for (size_t i = 0; i < out.size(); ++i) {
    const T d = out.data[i] - target.data[i];
    loss += static_cast<double>(d) * d;
    grad.data[i] = scale * d;
  }
  loss /= static_cast<double>(out.size());

  sigmoid_.backward_inplace(grad);
  grad = head_.backward(grad, true);
  for (auto it = decoder_.rbegin(); it != decoder_.rend(); ++it) {
    it->relu.backward_inplace(grad);
    grad = it->deconv.backward(it->bn.backward(grad), true);
  }
  for (size_t i = encoder_.size(); i-- > 0;) {
    auto& s = encoder_[i];
    if (s.pooled) grad = s.pool.backward(grad);
    s.relu.backward_inplace(grad);
    grad = s.conv.backward(s.bn.backward(grad), i > 0);
  }
  return loss;
}

template <typename T>
std::vector<nn::ParamRef<T>> AutoencoderNet<T>::params() {
  std::vector<nn::ParamRef<T>> out;
  for (size_t i = 0; i < encoder_.size(); ++i) {
    const std::string p = "encoder." + std::to_string(i);
    encoder_[i].conv.collect(p + ".conv", out);
    encoder_[i].bn.collect(p + ".bn", out);
  }
  for (size_t i = 0; i < decoder_.size(); ++i) {
    const std::string p = "decoder." + std::to_string(i);
    decoder_[i].deconv.collect(p + ".deconv", out);
    decoder_[i].bn.collect(p + ".bn", out);
  }
  head_.collect("head", out);
  return out;
}

template class AutoencoderNet<float>;
template class AutoencoderNet<double>;

// ----------------------------------------------------- VideoAutoencoder

VideoAutoencoder::VideoAutoencoder(AutoencoderConfig config, uint64_t seed)
    : config_(std::move(config)), net_(config_.channel_progression) {
  net_.init(seed);
}

VideoAutoencoder build_model(const AutoencoderConfig& config, uint64_t seed) {
  config.validate();
  return VideoAutoencoder(config, seed);
}

namespace {

LatentCode tensor_to_code(const Tensor<float>& t, int sample, std::pair<int, int> source) {
  LatentCode code;
  code.channels = t.c;
  code.height = t.h;
  code.width = t.w;
  code.source_shape = source;
  code.values.resize(static_cast<size_t>(t.c) * t.plane());
  for (int c = 0; c < t.c; ++c) std::copy_n(t.plane_ptr(c, sample), t.plane(), code.values.data() + c * t.plane());
  return code;
}

constexpr size_t kInferenceChunk = 8;

}  // namespace

LatentCode VideoAutoencoder::encode(const Frame& frame) const {
  check_frame_dims(frame);
  Tensor<float> z = net_.encode(frames_to_tensor<float>(std::span<const Frame>(&frame, 1)));
  return tensor_to_code(z, 0, {frame.height, frame.width});
}

Frame VideoAutoencoder::decode(const LatentCode& code) const {
  if (code.channels != config_.latent_channels())
    fail(ErrorCode::ShapeError, "latent code has " + std::to_string(code.channels) + " channels, model expects " +
                                    std::to_string(config_.latent_channels()));
  if (code.height <= 0 || code.width <= 0 || code.values.size() != static_cast<size_t>(code.channels) * code.height * code.width)
    fail(ErrorCode::ShapeError, "malformed latent code");
  auto out = tensor_to_frames(net_.decode(codes_to_tensor<float>(std::span<const LatentCode>(&code, 1))));
  return std::move(out.front());
}

std::vector<LatentCode> VideoAutoencoder::encode_all(std::span<const Frame> frames) const {
  std::vector<LatentCode> out;
  out.reserve(frames.size());
  for (size_t start = 0; start < frames.size(); start += kInferenceChunk) {
    auto chunk = frames.subspan(start, std::min(kInferenceChunk, frames.size() - start));
    for (const auto& f : chunk) check_frame_dims(f);
    Tensor<float> z = net_.encode(frames_to_tensor<float>(chunk));
    for (int s = 0; s < z.n; ++s) out.push_back(tensor_to_code(z, s, {chunk[0].height, chunk[0].width}));
  }
  return out;
}

std::vector<Frame> VideoAutoencoder::decode_all(std::span<const LatentCode> codes) const {
  std::vector<Frame> out;
  out.reserve(codes.size());
  for (size_t start = 0; start < codes.size(); start += kInferenceChunk) {
    auto chunk = codes.subspan(start, std::min(kInferenceChunk, codes.size() - start));
    if (chunk[0].channels != config_.latent_channels()) fail(ErrorCode::ShapeError, "latent channel mismatch");
    for (auto& f : tensor_to_frames(net_.decode(codes_to_tensor<float>(chunk)))) out.push_back(std::move(f));
  }
  return out;
}

Frame VideoAutoencoder::reconstruct(const Frame& frame) const { return decode(encode(frame)); }

std::vector<Tensor<float>> VideoAutoencoder::encoder_activations(const Frame& frame) const {
  check_frame_dims(frame);
  return net_.encoder_activations(frames_to_tensor<float>(std::span<const Frame>(&frame, 1)));
}

// Weight blob: "VSAW", u32 version, u32 count, then per block
// u16 name length, name, u64 element count, little-endian float32 values.
std::vector<uint8_t> VideoAutoencoder::serialize_weights() const {
  auto params = const_cast<AutoencoderNet<float>&>(net_).params();
  std::vector<uint8_t> out{'V', 'S', 'A', 'W'};
  auto put = [&out](const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  };
  const uint32_t version = 1, count = static_cast<uint32_t>(params.size());
  put(&version, 4);
  put(&count, 4);
  for (const auto& p : params) {
    const uint16_t len = static_cast<uint16_t>(p.name.size());
    put(&len, 2);
    put(p.name.data(), len);
    const uint64_t n = p.value->size();
    put(&n, 8);
    put(p.value->data(), n * sizeof(float));
  }
  return out;
}

void VideoAutoencoder::load_weights(std::span<const uint8_t> bytes) {
  size_t pos = 0;
  auto take = [&](void* dst, size_t n) {
    if (pos + n > bytes.size()) fail(ErrorCode::CorruptBundle, "weights truncated");
    std::memcpy(dst, bytes.data() + pos, n);
    pos += n;
  };
  char magic[4];
  take(magic, 4);
  if (std::memcmp(magic, "VSAW", 4) != 0) fail(ErrorCode::CorruptBundle, "weights have bad magic");
  uint32_t version = 0, count = 0;
  take(&version, 4);
  take(&count, 4);
  if (version != 1) fail(ErrorCode::CorruptBundle, "unsupported weights version");
  auto params = net_.params();
  if (count != params.size()) fail(ErrorCode::CorruptBundle, "weights do not match model architecture");
  for (auto& p : params) {
    uint16_t len = 0;
    take(&len, 2);
    std::string name(len, '\0');
    take(name.data(), len);
    uint64_t n = 0;
    take(&n, 8);
    if (name != p.name || n != p.value->size())
      fail(ErrorCode::CorruptBundle, "weights block " + name + " does not match " + p.name);
    take(p.value->data(), n * sizeof(float));
  }
  if (pos != bytes.size()) fail(ErrorCode::CorruptBundle, "trailing bytes after weights");
}

// ------------------------------------------------------------- training

namespace {

Frame degrade_resolution(const Frame& frame, double scale) {
  if (scale >= 1.0) return frame;
  const int factor = static_cast<int>(std::lround(1.0 / scale));
  Frame low;
  if (factor >= 1 && std::abs(1.0 / factor - scale) < 1e-9 && frame.height % factor == 0 && frame.width % factor == 0)
    low = box_downsample(frame, factor);
  else
    low = resize_bilinear(frame, std::max(1, static_cast<int>(std::lround(frame.height * scale))),
                          std::max(1, static_cast<int>(std::lround(frame.width * scale))));
  return resize_bilinear(low, frame.height, frame.width);
}

}  // namespace

TrainHistory train(VideoAutoencoder& model, const FrameSequence& frames, const TrainConfig& tc,
                   const EpochCallback& on_epoch) {
  tc.validate();
  const auto& cfg = model.config();
  if (frames.size() < 2) fail(ErrorCode::InsufficientData, "training needs at least 2 frames");
  for (const auto& f : frames.frames)
    if (f.height != cfg.input_h || f.width != cfg.input_w)
      fail(ErrorCode::ShapeError, "training frame " + std::to_string(f.height) + "x" + std::to_string(f.width) +
                                      " does not match configured " + std::to_string(cfg.input_h) + "x" +
                                      std::to_string(cfg.input_w));

  TrainHistory history;
  history.frame_count = frames.size();
  history.total_epochs = tc.total_epochs(frames.size());
  history.batch_size = tc.batch_size;
  history.hflip_augmentation = cfg.hflip_augmentation;
  history.multires_augmentation = cfg.multires_augmentation;
  history.seed = tc.seed;

  auto& net = model.net();
  nn::Adam<float> adam(net.params());
  std::mt19937_64 rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<size_t> pick_scale(0, cfg.multires_scales.empty() ? 0 : cfg.multires_scales.size() - 1);

  std::vector<size_t> order(frames.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Frame> inputs, targets;
  for (int epoch = 0; epoch < history.total_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = tc.lr_at(epoch, frames.size());
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    size_t seen = 0;
    for (size_t b = 0; b < order.size(); b += tc.batch_size) {
      const size_t end = std::min(order.size(), b + static_cast<size_t>(tc.batch_size));
      inputs.clear();
      targets.clear();
      for (size_t i = b; i < end; ++i) {
        Frame target = frames.frames[order[i]];
        if (cfg.hflip_augmentation && coin(rng)) target = hflip(target);
        Frame input = cfg.multires_augmentation ? degrade_resolution(target, cfg.multires_scales[pick_scale(rng)])
                                                : target;
        inputs.push_back(std::move(input));
        targets.push_back(std::move(target));
      }
      adam.zero_grad();
      const double loss = net.train_step(frames_to_tensor<float>(inputs), frames_to_tensor<float>(targets));
      adam.step(lr);
      loss_sum += loss * static_cast<double>(end - b);
      seen += end - b;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / static_cast<double>(seen);
    rec.lr = lr;
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

double reconstruction_loss(const VideoAutoencoder& model, std::span<const Frame> frames) {
  if (frames.empty()) fail(ErrorCode::NoFrames, "no frames to evaluate");
  double total = 0;
  for (size_t start = 0; start < frames.size(); start += kInferenceChunk) {
    auto chunk = frames.subspan(start, std::min(kInferenceChunk, frames.size() - start));
    auto codes = model.encode_all(chunk);
    auto outs = model.decode_all(codes);
    for (size_t i = 0; i < chunk.size(); ++i) total += mse(chunk[i], outs[i]);
  }
  return total / static_cast<double>(frames.size());
}

}  // namespace visa

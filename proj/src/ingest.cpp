#include "visa/ingest.hpp"

#include <fnmatch.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "json.hpp"
#include "visa/errors.hpp"

namespace visa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Frame from_mat(const cv::Mat& img) {
  cv::Mat rgb;
  if (img.channels() == 1)
    cv::cvtColor(img, rgb, cv::COLOR_GRAY2RGB);
  else if (img.channels() == 4)
    cv::cvtColor(img, rgb, cv::COLOR_BGRA2RGB);
  else
    cv::cvtColor(img, rgb, cv::COLOR_BGR2RGB);
  const double scale = rgb.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
  cv::Mat f;
  rgb.convertTo(f, CV_32FC3, scale);
  Frame out(f.rows, f.cols);
  for (int y = 0; y < f.rows; ++y) {
    const auto* row = f.ptr<cv::Vec3f>(y);
    for (int x = 0; x < f.cols; ++x)
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = row[x][c];
  }
  return out;
}

cv::Mat to_mat_bgr8(const Frame& frame) {
  cv::Mat img(frame.height, frame.width, CV_8UC3);
  for (int y = 0; y < frame.height; ++y) {
    auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < frame.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(frame.at(c, y, x), 0.0f, 1.0f);
        row[x][2 - c] = static_cast<uint8_t>(std::lround(v * 255.0f));
      }
  }
  return img;
}

std::vector<uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace

// ---------------------------------------------------------------- frames

FrameSequence load_frames(const fs::path& directory, const std::string& pattern) {
  std::error_code ec;
  if (!fs::is_directory(directory, ec)) fail(ErrorCode::NoFrames, "not a directory: " + directory.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (fnmatch(pattern.c_str(), name.c_str(), 0) == 0) files.push_back(entry.path());
  }
  if (files.empty()) fail(ErrorCode::NoFrames, "no files matching '" + pattern + "' in " + directory.string());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

  std::vector<Frame> frames;
  frames.reserve(files.size());
  for (const auto& file : files) {
    Frame f = load_image(file);
    if (!frames.empty() && !f.same_shape(frames.front()))
      fail(ErrorCode::ResolutionMismatch, file.filename().string() + " is " + std::to_string(f.height) + "x" +
                                              std::to_string(f.width) + ", expected " +
                                              std::to_string(frames.front().height) + "x" +
                                              std::to_string(frames.front().width));
    frames.push_back(std::move(f));
  }
  return FrameSequence::from_frames(std::move(frames), directory.filename().string());
}

void save_frames(const FrameSequence& seq, const fs::path& directory) {
  fs::create_directories(directory);
  for (size_t i = 0; i < seq.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06d.png", seq.frame_ids.empty() ? static_cast<int>(i) : seq.frame_ids[i]);
    save_png(seq.frames[i], directory / name);
  }
}

Frame load_image(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_image(bytes);
  } catch (const Error&) {
    fail(ErrorCode::BadImage, "cannot decode " + path.string());
  }
}

void save_png(const Frame& frame, const fs::path& path) { write_file(path, encode_png(frame)); }

std::vector<uint8_t> encode_png(const Frame& frame) {
  std::vector<uint8_t> out;
  if (!cv::imencode(".png", to_mat_bgr8(frame), out)) fail(ErrorCode::IoError, "PNG encoding failed");
  return out;
}

Frame decode_image(std::span<const uint8_t> bytes) {
  if (bytes.empty()) fail(ErrorCode::BadImage, "empty image");
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8U, const_cast<uint8_t*>(bytes.data()));
  cv::Mat img;
  try {
    img = cv::imdecode(buf, cv::IMREAD_ANYDEPTH | cv::IMREAD_ANYCOLOR);
  } catch (const cv::Exception&) {
    img.release();
  }
  if (img.empty()) fail(ErrorCode::BadImage, "image bytes could not be decoded");
  if (img.depth() != CV_8U && img.depth() != CV_16U) fail(ErrorCode::BadImage, "unsupported image depth");
  return from_mat(img);
}

std::vector<uint8_t> encode_label_png(const LabelMap& labels) {
  const int32_t hi = labels.labels.empty() ? 0 : *std::max_element(labels.labels.begin(), labels.labels.end());
  const int32_t lo = labels.labels.empty() ? 0 : *std::min_element(labels.labels.begin(), labels.labels.end());
  if (lo < 0 || hi > 65535) fail(ErrorCode::InvalidConfig, "labels must lie in [0, 65535]");
  cv::Mat img(labels.height, labels.width, hi > 255 ? CV_16UC1 : CV_8UC1);
  for (int y = 0; y < labels.height; ++y)
    for (int x = 0; x < labels.width; ++x) {
      if (hi > 255)
        img.at<uint16_t>(y, x) = static_cast<uint16_t>(labels.at(y, x));
      else
        img.at<uint8_t>(y, x) = static_cast<uint8_t>(labels.at(y, x));
    }
  std::vector<uint8_t> out;
  if (!cv::imencode(".png", img, out)) fail(ErrorCode::IoError, "PNG encoding failed");
  return out;
}

LabelMap decode_label_png(std::span<const uint8_t> bytes) {
  if (bytes.empty()) fail(ErrorCode::BadImage, "empty mask");
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8U, const_cast<uint8_t*>(bytes.data()));
  cv::Mat img;
  try {
    img = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception&) {
    img.release();
  }
  if (img.empty()) fail(ErrorCode::BadImage, "mask bytes could not be decoded");
  if (img.channels() != 1) {
    // Colour masks: take the first channel.
    std::vector<cv::Mat> planes;
    cv::split(img, planes);
    img = planes.front();
  }
  LabelMap out(img.rows, img.cols);
  for (int y = 0; y < img.rows; ++y)
    for (int x = 0; x < img.cols; ++x)
      out.at(y, x) = img.depth() == CV_16U ? img.at<uint16_t>(y, x) : img.at<uint8_t>(y, x);
  return out;
}

ConformMode parse_conform_mode(const std::string& name) {
  if (name == "bilinear") return ConformMode::Bilinear;
  if (name == "mirror_pad" || name == "mirror") return ConformMode::MirrorPad;
  if (name == "zero_pad" || name == "zero") return ConformMode::ZeroPad;
  fail(ErrorCode::InvalidConfig, "unknown conform mode '" + name + "'");
}

Frame conform(const Frame& frame, int target_h, int target_w, ConformMode mode) {
  switch (mode) {
    case ConformMode::Bilinear:
      return clamp01(resize_bilinear(frame, target_h, target_w));
    case ConformMode::MirrorPad:
      return pad_mirror(frame, target_h, target_w);
    case ConformMode::ZeroPad:
      return pad_zero(frame, target_h, target_w);
  }
  fail(ErrorCode::InvalidConfig, "bad conform mode");
}

FrameSequence conform(const FrameSequence& seq, int target_h, int target_w, ConformMode mode) {
  FrameSequence out = seq;
  for (auto& f : out.frames) f = conform(f, target_h, target_w, mode);
  return out;
}

// ---------------------------------------------------------------- models

std::string ModelManifest::to_json() const {
  json j;
  j["format_version"] = format_version;
  j["base_channels"] = base_channels;
  j["input_height"] = input_height;
  j["input_width"] = input_width;
  j["channel_progression"] = channel_progression;
  j["epochs_trained"] = epochs_trained;
  j["trained_frame_count"] = trained_frame_count;
  j["source_labels"] = source_labels;
  j["hflip_augmentation"] = hflip_augmentation;
  j["multires_augmentation"] = multires_augmentation;
  j["weights_digest"] = weights_digest;
  // Fixed training internals, recorded so a bundle documents how it was made.
  j["training_details"] = {
      {"optimizer", {{"name", "adam"}, {"beta1", 0.5}, {"beta2", 0.999}, {"eps", 1e-8}}},
      {"batch_norm", {{"eps", 1e-5}, {"momentum", 0.1}}},
      {"weight_init", "uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))"},
      {"output_activation", "sigmoid"},
  };
  return j.dump(2);
}

ModelManifest ModelManifest::from_json(const std::string& text) {
  ModelManifest m;
  try {
    const json j = json::parse(text);
    m.format_version = j.at("format_version").get<int>();
    m.base_channels = j.at("base_channels").get<int>();
    m.input_height = j.at("input_height").get<int>();
    m.input_width = j.at("input_width").get<int>();
    const auto prog = j.at("channel_progression").get<std::vector<int>>();
    if (prog.size() != kEncoderLayers) fail(ErrorCode::CorruptBundle, "channel_progression must have 6 entries");
    std::copy(prog.begin(), prog.end(), m.channel_progression.begin());
    m.epochs_trained = j.at("epochs_trained").get<int>();
    m.trained_frame_count = j.at("trained_frame_count").get<int>();
    m.source_labels = j.at("source_labels").get<std::vector<std::string>>();
    m.hflip_augmentation = j.at("hflip_augmentation").get<bool>();
    m.multires_augmentation = j.at("multires_augmentation").get<bool>();
    m.weights_digest = j.at("weights_digest").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptBundle, std::string("malformed manifest: ") + e.what());
  }
  return m;
}

AutoencoderConfig ModelManifest::config() const {
  AutoencoderConfig c;
  c.base_channels = base_channels;
  c.channel_progression = channel_progression;
  c.input_h = input_height;
  c.input_w = input_width;
  c.hflip_augmentation = hflip_augmentation;
  c.multires_augmentation = multires_augmentation;
  return c;
}

void ModelManifest::validate() const { config().validate(); }

std::string sha256_hex(std::span<const uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::IoError, "SHA-256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 15]);
  }
  return out;
}

ModelBundle make_bundle(const VideoAutoencoder& model, const TrainHistory& history,
                        std::vector<std::string> source_labels) {
  const auto& cfg = model.config();
  ModelBundle b;
  b.weights = model.serialize_weights();
  b.manifest.base_channels = cfg.base_channels;
  b.manifest.input_height = cfg.input_h;
  b.manifest.input_width = cfg.input_w;
  b.manifest.channel_progression = cfg.channel_progression;
  b.manifest.epochs_trained = static_cast<int>(history.epochs.size());
  b.manifest.trained_frame_count = static_cast<int>(history.frame_count);
  b.manifest.source_labels = std::move(source_labels);
  b.manifest.hflip_augmentation = cfg.hflip_augmentation;
  b.manifest.multires_augmentation = cfg.multires_augmentation;
  b.manifest.weights_digest = sha256_hex(b.weights);
  return b;
}

VideoAutoencoder model_from_bundle(const ModelBundle& bundle) {
  VideoAutoencoder model(bundle.manifest.config(), 0);
  model.load_weights(bundle.weights);
  return model;
}

void save_model(const ModelBundle& bundle, const fs::path& path) {
  try {
    bundle.manifest.validate();
  } catch (const Error& e) {
    fail(ErrorCode::InvalidConfig, std::string("refusing to save bundle: ") + e.what());
  }
  if (bundle.manifest.weights_digest != sha256_hex(bundle.weights))
    fail(ErrorCode::CorruptBundle, "manifest digest does not match weights");
  fs::create_directories(path);
  write_file(path / "weights.bin", bundle.weights);
  const std::string text = bundle.manifest.to_json() + "\n";
  write_file(path / "manifest.json", std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

ModelBundle load_model(const fs::path& path) {
  if (!fs::exists(path / "manifest.json") || !fs::exists(path / "weights.bin"))
    fail(ErrorCode::IoError, "no model bundle at " + path.string());
  ModelBundle b;
  const auto text = read_file(path / "manifest.json");
  b.manifest = ModelManifest::from_json(std::string(text.begin(), text.end()));
  b.weights = read_file(path / "weights.bin");
  if (sha256_hex(b.weights) != b.manifest.weights_digest)
    fail(ErrorCode::CorruptBundle, "weights digest mismatch in " + path.string());
  try {
    b.manifest.validate();
  } catch (const Error& e) {
    fail(ErrorCode::CorruptBundle, std::string("invalid manifest: ") + e.what());
  }
  return b;
}

}  // namespace visa

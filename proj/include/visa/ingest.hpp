#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "visa/autoencoder.hpp"
#include "visa/frame.hpp"

namespace visa {

// ---------------------------------------------------------------- frames

/// Loads every file in directory whose name matches the glob pattern, in
/// lexicographic order. Pixels are 8-bit sRGB mapped to [0, 1].
FrameSequence load_frames(const std::filesystem::path& directory, const std::string& pattern = "*.png");
/// Writes frames as frame_%06d.png (indexed by frame_ids).
void save_frames(const FrameSequence& seq, const std::filesystem::path& directory);

Frame load_image(const std::filesystem::path& path);
void save_png(const Frame& frame, const std::filesystem::path& path);
std::vector<uint8_t> encode_png(const Frame& frame);
/// Accepts any format OpenCV can decode; throws BadImage otherwise.
Frame decode_image(std::span<const uint8_t> bytes);

/// Single-channel PNG; 8-bit when all labels fit, 16-bit otherwise.
std::vector<uint8_t> encode_label_png(const LabelMap& labels);
LabelMap decode_label_png(std::span<const uint8_t> bytes);

enum class ConformMode { Bilinear, MirrorPad, ZeroPad };
ConformMode parse_conform_mode(const std::string& name);
Frame conform(const Frame& frame, int target_h, int target_w, ConformMode mode);
FrameSequence conform(const FrameSequence& seq, int target_h, int target_w, ConformMode mode = ConformMode::Bilinear);

// ---------------------------------------------------------------- models

struct ModelManifest {
  int format_version = 1;
  int base_channels = 64;
  int input_height = 256;
  int input_width = 512;
  std::array<int, kEncoderLayers> channel_progression{64, 128, 256, 512, 768, 768};
  int epochs_trained = 0;
  int trained_frame_count = 0;
  std::vector<std::string> source_labels;
  bool hflip_augmentation = false;
  bool multires_augmentation = false;
  std::string weights_digest;

  std::string to_json() const;
  static ModelManifest from_json(const std::string& text);
  AutoencoderConfig config() const;
  /// Throws InvalidConfig when dims or progression are inconsistent.
  void validate() const;
  bool operator==(const ModelManifest&) const = default;
};

struct ModelBundle {
  std::vector<uint8_t> weights;
  ModelManifest manifest;
};

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const uint8_t> bytes);

/// Packs a model and its training record into a bundle with a fresh digest.
ModelBundle make_bundle(const VideoAutoencoder& model, const TrainHistory& history,
                        std::vector<std::string> source_labels);
/// Instantiates the model described by the bundle.
VideoAutoencoder model_from_bundle(const ModelBundle& bundle);

/// A bundle is a directory holding manifest.json and weights.bin.
void save_model(const ModelBundle& bundle, const std::filesystem::path& path);
/// Throws CorruptBundle when the digest does not match or files are malformed.
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace visa

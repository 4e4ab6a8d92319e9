#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "visa/autoencoder.hpp"
#include "visa/frame.hpp"
#include "visa/projection.hpp"

namespace visa {

/// Wire layout (all integers little-endian):
///   "VSAT" | version u8 | flags u8 | model digest 16 bytes | frame_index u32 |
///   orig_h u16 | orig_w u16 | payload_h u16 | payload_w u16 | channels u8 |
///   encoding u8 | payload_len u32 | payload | crc32 u32 (over everything before it)
struct TransmissionPacket {
  static constexpr uint8_t kVersion = 1;
  static constexpr size_t kHeaderSize = 4 + 1 + 1 + 16 + 4 + 2 * 4 + 1 + 1 + 4;

  uint8_t version = kVersion;
  uint8_t flags = 0;
  std::array<uint8_t, 16> model_digest16{};
  uint32_t frame_index = 0;
  uint16_t orig_h = 0;
  uint16_t orig_w = 0;
  uint16_t payload_h = 0;
  uint16_t payload_w = 0;
  uint8_t channels = 3;
  uint8_t encoding = 0;  // 0: raw RGB8, row-major, interleaved
  std::vector<uint8_t> payload;

  size_t wire_size() const { return kHeaderSize + payload.size() + 4; }
  bool operator==(const TransmissionPacket&) const = default;
};

struct TransmissionPlan {
  int temporal_stride = 2;
  int spatial_factor = 4;
  int reprojection_n = kDefaultIterations;

  void validate() const;
  /// "stride=2,factor=4,n=5" (any subset, any order).
  static TransmissionPlan parse(const std::string& text);
};

std::vector<uint8_t> encode_packet(const TransmissionPacket& p);
/// NotAPacket on bad magic or truncation, CorruptPacket on CRC or field mismatch.
TransmissionPacket decode_packet(std::span<const uint8_t> bytes);
/// As above, and WrongModel when the digest differs from the expected one.
TransmissionPacket decode_packet(std::span<const uint8_t> bytes, const std::array<uint8_t, 16>& expected_digest);

/// First 16 bytes of the hex weights digest, as raw bytes.
std::array<uint8_t, 16> digest16_from_hex(const std::string& hex_digest);

/// Indices sent for a sequence of n frames: every stride-th plus the last.
std::vector<int> keyframe_indices(int n, int stride);
std::vector<TransmissionPacket> send(const FrameSequence& seq, const TransmissionPlan& plan,
                                     const std::array<uint8_t, 16>& model_digest16);
Frame packet_frame(const TransmissionPacket& p);

/// Rebuilds the video: keyframes are upsampled and reprojected; the frames in
/// between are latent interpolations. Output length is round((L - 1) * f) + 1 with
/// L = last frame index + 1.
FrameSequence receive(const FrameCodec& codec, std::vector<TransmissionPacket> packets, const TransmissionPlan& plan,
                      double target_fps_factor, const std::array<uint8_t, 16>& model_digest16);

double psnr(const Frame& a, const Frame& b);
/// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, data range 1), averaged
/// over channels and over every pixel whose window lies inside the image.
double ssim(const Frame& a, const Frame& b);

struct BitrateReport {
  size_t packets = 0;
  uint64_t online_bits = 0;
  uint64_t online_payload_bits = 0;
  uint64_t offline_bits = 0;
  uint64_t total_bits = 0;
  uint64_t raw_bits = 0;
  double duration_s = 0;
  double online_bps = 0;
  double raw_bps = 0;

  std::string to_json() const;
};

/// raw_bits covers the original frame_count frames at orig_h x orig_w x 3 x 8 bits.
BitrateReport bitrate_report(std::span<const TransmissionPacket> packets, size_t model_bytes, double duration_s,
                             size_t frame_count);

/// .vsat stream: each packet preceded by its u32 little-endian length.
void write_vsat(const std::filesystem::path& path, std::span<const TransmissionPacket> packets);
std::vector<TransmissionPacket> read_vsat(const std::filesystem::path& path);

}  // namespace visa

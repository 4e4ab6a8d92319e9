#include "doctest.h"
#include "helpers.hpp"
#include "visa/transmit.hpp"

using namespace visa;

namespace {

std::array<uint8_t, 16> digest_of(uint8_t seed) {
  std::array<uint8_t, 16> d{};
  for (int i = 0; i < 16; ++i) d[i] = static_cast<uint8_t>(seed + i);
  return d;
}

TransmissionPacket random_packet(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dim(1, 24), byte(0, 255);
  TransmissionPacket p;
  p.flags = static_cast<uint8_t>(byte(rng));
  for (auto& b : p.model_digest16) b = static_cast<uint8_t>(byte(rng));
  p.frame_index = static_cast<uint32_t>(rng());
  p.payload_h = static_cast<uint16_t>(dim(rng));
  p.payload_w = static_cast<uint16_t>(dim(rng));
  p.orig_h = static_cast<uint16_t>(p.payload_h * 4);
  p.orig_w = static_cast<uint16_t>(p.payload_w * 4);
  p.payload.resize(static_cast<size_t>(p.payload_h) * p.payload_w * 3);
  for (auto& b : p.payload) b = static_cast<uint8_t>(byte(rng));
  return p;
}

std::string hex(const std::vector<uint8_t>& bytes) {
  static constexpr char k[] = "0123456789abcdef";
  std::string s;
  for (uint8_t b : bytes) {
    s.push_back(k[b >> 4]);
    s.push_back(k[b & 15]);
  }
  return s;
}

}  // namespace

TEST_CASE("wire layout matches an independent struct-packed encoder") {
  TransmissionPacket p;
  for (int i = 0; i < 16; ++i) p.model_digest16[i] = static_cast<uint8_t>(i);
  p.frame_index = 42;
  p.orig_h = 8;
  p.orig_w = 12;
  p.payload_h = 2;
  p.payload_w = 3;
  for (int i = 0; i < 18; ++i) p.payload.push_back(static_cast<uint8_t>((7 * i + 3) % 256));
  const auto bytes = encode_packet(p);
  CHECK(hex(bytes) == test::reference_values()["packet_hex"].get<std::string>());
  CHECK(bytes.size() == p.wire_size());
  CHECK(TransmissionPacket::kHeaderSize == 40);
}

TEST_CASE("1000 random packets round-trip bit-exactly") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_packet(rng);
    const auto bytes = encode_packet(p);
    const auto q = decode_packet(bytes, p.model_digest16);
    REQUIRE(q == p);
    REQUIRE(encode_packet(q) == bytes);
  }
}

TEST_CASE("damaged packets are rejected with specific errors") {
  std::mt19937_64 rng(7);
  const auto p = random_packet(rng);
  const auto good = encode_packet(p);

  auto flipped_crc = good;
  flipped_crc.back() ^= 0x01;
  CHECK(test::error_of([&] { decode_packet(flipped_crc); }) == ErrorCode::CorruptPacket);

  auto flipped_payload = good;
  flipped_payload[TransmissionPacket::kHeaderSize] ^= 0x80;
  CHECK(test::error_of([&] { decode_packet(flipped_payload); }) == ErrorCode::CorruptPacket);

  CHECK(test::error_of([&] { decode_packet(good, digest_of(200)); }) == ErrorCode::WrongModel);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(test::error_of([&] { decode_packet(bad_magic); }) == ErrorCode::NotAPacket);
  CHECK(test::error_of([&] { decode_packet(std::span(good).first(20)); }) == ErrorCode::NotAPacket);
  CHECK(test::error_of([&] { decode_packet(std::span(good).first(good.size() - 1)); }) == ErrorCode::CorruptPacket);

  // Every single-bit flip is caught.
  std::uniform_int_distribution<size_t> pos(4, good.size() - 1);
  for (int i = 0; i < 200; ++i) {
    auto bytes = good;
    bytes[pos(rng)] ^= static_cast<uint8_t>(1u << (i % 8));
    CHECK(test::error_of([&] { decode_packet(bytes); }).has_value());
  }
}

TEST_CASE("plans and keyframe schedules") {
  const auto plan = TransmissionPlan::parse("stride=3,factor=2,n=1");
  CHECK(plan.temporal_stride == 3);
  CHECK(plan.spatial_factor == 2);
  CHECK(plan.reprojection_n == 1);
  const auto def = TransmissionPlan::parse("");
  CHECK(def.temporal_stride == 2);
  CHECK(def.spatial_factor == 4);
  CHECK(def.reprojection_n == 5);
  CHECK(test::error_of([] { TransmissionPlan::parse("stride=0"); }) == ErrorCode::InvalidConfig);
  CHECK(test::error_of([] { TransmissionPlan::parse("speed=2"); }) == ErrorCode::InvalidConfig);
  CHECK(test::error_of([] { TransmissionPlan::parse("stride=x"); }) == ErrorCode::InvalidConfig);
  CHECK(keyframe_indices(10, 2) == std::vector<int>{0, 2, 4, 6, 8, 9});
  CHECK(keyframe_indices(9, 2) == std::vector<int>{0, 2, 4, 6, 8});
  CHECK(keyframe_indices(1, 4) == std::vector<int>{0});
}

TEST_CASE("send and receive through an identity codec") {
  test::IdentityCodec codec;
  std::vector<Frame> frames;
  for (int i = 0; i < 5; ++i) frames.push_back(Frame(64, 128, 0.2f * i));
  const auto seq = FrameSequence::from_frames(frames);
  const auto digest = digest_of(1);
  const auto plan = TransmissionPlan::parse("stride=2,factor=4,n=2");
  const auto packets = send(seq, plan, digest);
  REQUIRE(packets.size() == 3);
  CHECK(packets[1].frame_index == 2);
  CHECK(packets[1].payload_h == 16);
  CHECK(packets[1].payload.size() == 16u * 32u * 3u);

  // Shuffled and duplicated delivery gives the same result.
  auto shuffled = packets;
  std::swap(shuffled[0], shuffled[2]);
  shuffled.push_back(packets[1]);
  const auto video = receive(codec, shuffled, plan, 1.0, digest);
  REQUIRE(video.size() == 5);
  CHECK(video.frames[1].at(0, 10, 10) == doctest::Approx(0.2).epsilon(0.01));
  CHECK(video.frames[4].at(2, 0, 0) == doctest::Approx(0.8).epsilon(0.01));
  CHECK(receive(codec, packets, plan, 2.0, digest).size() == 9);
  CHECK(test::error_of([&] { receive(codec, packets, plan, 1.0, digest_of(9)); }) == ErrorCode::WrongModel);
  CHECK(test::error_of([&] { receive(codec, {}, plan, 1.0, digest); }) == ErrorCode::NoFrames);
  CHECK(test::error_of([&] { send(seq, TransmissionPlan::parse("factor=3"), digest); }) == ErrorCode::InvalidFactor);

  test::TempDir dir("vsat");
  write_vsat(dir.path / "s.vsat", packets);
  CHECK(read_vsat(dir.path / "s.vsat") == packets);
}

TEST_CASE("bitrate report arithmetic") {
  std::mt19937_64 rng(3);
  std::vector<TransmissionPacket> packets{random_packet(rng), random_packet(rng)};
  const auto r = bitrate_report(packets, 1000, 2.0, 10);
  const uint64_t online = 8ull * (packets[0].payload.size() + packets[1].payload.size() + 2 * 44);
  CHECK(r.online_bits == online);
  CHECK(r.online_payload_bits == 8ull * (packets[0].payload.size() + packets[1].payload.size()));
  CHECK(r.offline_bits == 8000);
  CHECK(r.total_bits == online + 8000);
  CHECK(r.raw_bits == 8ull * 3 * packets[0].orig_h * packets[0].orig_w * 10);
  CHECK(r.online_bps == doctest::Approx(online / 2.0));
  CHECK(nlohmann::json::parse(r.to_json()).contains("online_bps"));
  CHECK(test::error_of([&] { bitrate_report(packets, 0, 0.0, 1); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("PSNR and SSIM agree with scikit-image") {
  const auto ref = test::reference_values();
  Frame a, b;
  test::pattern_pair(40, 56, a, b);
  CHECK(psnr(a, b) == doctest::Approx(ref["psnr_pattern_40x56"].get<double>()).epsilon(1e-6));
  CHECK(ssim(a, b) == doctest::Approx(ref["ssim_pattern_40x56"].get<double>()).epsilon(1e-5));
  CHECK(ssim(a, a) == doctest::Approx(1.0));
  CHECK(psnr(a, a) == 99.0);
  CHECK(test::error_of([&] { ssim(a, Frame(40, 55)); }) == ErrorCode::ShapeError);
  CHECK(test::error_of([&] { ssim(Frame(8, 8), Frame(8, 8)); }) == ErrorCode::ShapeError);
}

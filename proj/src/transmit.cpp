#include "visa/transmit.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "visa/errors.hpp"
#include "visa/latentops.hpp"

namespace visa {

void TransmissionPlan::validate() const {
  if (temporal_stride < 1) fail(ErrorCode::InvalidConfig, "temporal_stride must be >= 1");
  if (spatial_factor < 1) fail(ErrorCode::InvalidConfig, "spatial_factor must be >= 1");
  if (reprojection_n < 0) fail(ErrorCode::InvalidIterations, "reprojection_n must be >= 0");
}

TransmissionPlan TransmissionPlan::parse(const std::string& text) {
  TransmissionPlan plan;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) fail(ErrorCode::InvalidConfig, "plan entry '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    int v = 0;
    try {
      size_t used = 0;
      v = std::stoi(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidConfig, "plan value '" + value + "' is not an integer");
    }
    if (key == "stride")
      plan.temporal_stride = v;
    else if (key == "factor")
      plan.spatial_factor = v;
    else if (key == "n")
      plan.reprojection_n = v;
    else
      fail(ErrorCode::InvalidConfig, "unknown plan key '" + key + "'");
  }
  plan.validate();
  return plan;
}

// ------------------------------------------------------------- wire codec

namespace {

template <typename T>
void put_le(std::vector<uint8_t>& out, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(const uint8_t* p) {
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

uint32_t crc32_of(const uint8_t* data, size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded chunks.
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<uint32_t>(crc);
}

}  // namespace

std::vector<uint8_t> encode_packet(const TransmissionPacket& p) {
  if (p.payload.size() > UINT32_MAX) fail(ErrorCode::CorruptPacket, "payload too large");
  std::vector<uint8_t> out;
  out.reserve(p.wire_size());
  out.insert(out.end(), {'V', 'S', 'A', 'T'});
  out.push_back(p.version);
  out.push_back(p.flags);
  out.insert(out.end(), p.model_digest16.begin(), p.model_digest16.end());
  put_le<uint32_t>(out, p.frame_index);
  put_le<uint16_t>(out, p.orig_h);
  put_le<uint16_t>(out, p.orig_w);
  put_le<uint16_t>(out, p.payload_h);
  put_le<uint16_t>(out, p.payload_w);
  out.push_back(p.channels);
  out.push_back(p.encoding);
  put_le<uint32_t>(out, static_cast<uint32_t>(p.payload.size()));
  out.insert(out.end(), p.payload.begin(), p.payload.end());
  put_le<uint32_t>(out, crc32_of(out.data(), out.size()));
  return out;
}

TransmissionPacket decode_packet(std::span<const uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "VSAT", 4) != 0) fail(ErrorCode::NotAPacket, "bad magic");
  if (bytes.size() < TransmissionPacket::kHeaderSize + 4) fail(ErrorCode::NotAPacket, "truncated packet header");
  const uint8_t* b = bytes.data();
  TransmissionPacket p;
  p.version = b[4];
  p.flags = b[5];
  std::memcpy(p.model_digest16.data(), b + 6, 16);
  p.frame_index = get_le<uint32_t>(b + 22);
  p.orig_h = get_le<uint16_t>(b + 26);
  p.orig_w = get_le<uint16_t>(b + 28);
  p.payload_h = get_le<uint16_t>(b + 30);
  p.payload_w = get_le<uint16_t>(b + 32);
  p.channels = b[34];
  p.encoding = b[35];
  const uint32_t len = get_le<uint32_t>(b + 36);
  if (bytes.size() != TransmissionPacket::kHeaderSize + static_cast<size_t>(len) + 4)
    fail(ErrorCode::CorruptPacket, "packet length does not match payload_len");
  const size_t body = TransmissionPacket::kHeaderSize + len;
  if (crc32_of(b, body) != get_le<uint32_t>(b + body)) fail(ErrorCode::CorruptPacket, "CRC mismatch");
  if (p.version != TransmissionPacket::kVersion) fail(ErrorCode::CorruptPacket, "unsupported packet version");
  if (p.channels != 3) fail(ErrorCode::CorruptPacket, "packets carry 3 channels");
  if (p.encoding != 0) fail(ErrorCode::CorruptPacket, "unknown payload encoding");
  if (static_cast<size_t>(len) != static_cast<size_t>(p.payload_h) * p.payload_w * p.channels)
    fail(ErrorCode::CorruptPacket, "payload_len does not match payload dimensions");
  p.payload.assign(b + TransmissionPacket::kHeaderSize, b + body);
  return p;
}

TransmissionPacket decode_packet(std::span<const uint8_t> bytes, const std::array<uint8_t, 16>& expected_digest) {
  TransmissionPacket p = decode_packet(bytes);
  if (p.model_digest16 != expected_digest) fail(ErrorCode::WrongModel, "packet was produced for a different model");
  return p;
}

std::array<uint8_t, 16> digest16_from_hex(const std::string& hex) {
  if (hex.size() < 32) fail(ErrorCode::CorruptBundle, "weights digest is too short");
  std::array<uint8_t, 16> out{};
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    fail(ErrorCode::CorruptBundle, "weights digest is not hex");
  };
  for (size_t i = 0; i < 16; ++i) out[i] = static_cast<uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  return out;
}

// ------------------------------------------------------------- sender / receiver

std::vector<int> keyframe_indices(int n, int stride) {
  std::vector<int> idx;
  for (int i = 0; i < n; i += stride) idx.push_back(i);
  if (n > 0 && idx.back() != n - 1) idx.push_back(n - 1);
  return idx;
}

std::vector<TransmissionPacket> send(const FrameSequence& seq, const TransmissionPlan& plan,
                                     const std::array<uint8_t, 16>& model_digest16) {
  plan.validate();
  if (seq.empty()) fail(ErrorCode::NoFrames, "nothing to send");
  std::vector<TransmissionPacket> packets;
  for (int i : keyframe_indices(static_cast<int>(seq.size()), plan.temporal_stride)) {
    const Frame& f = seq.frames[i];
    if (f.height > 65535 || f.width > 65535) fail(ErrorCode::ShapeError, "frame too large for the wire format");
    if (f.height % plan.spatial_factor != 0 || f.width % plan.spatial_factor != 0)
      fail(ErrorCode::InvalidFactor, "spatial factor must divide the frame size");
    const Frame low = plan.spatial_factor == 1 ? f : box_downsample(f, plan.spatial_factor);
    TransmissionPacket p;
    p.model_digest16 = model_digest16;
    p.frame_index = static_cast<uint32_t>(i);
    p.orig_h = static_cast<uint16_t>(f.height);
    p.orig_w = static_cast<uint16_t>(f.width);
    p.payload_h = static_cast<uint16_t>(low.height);
    p.payload_w = static_cast<uint16_t>(low.width);
    p.payload.resize(low.size());
    size_t k = 0;
    for (int y = 0; y < low.height; ++y)
      for (int x = 0; x < low.width; ++x)
        for (int c = 0; c < 3; ++c)
          p.payload[k++] = static_cast<uint8_t>(std::lround(std::clamp(low.at(c, y, x), 0.0f, 1.0f) * 255.0f));
    packets.push_back(std::move(p));
  }
  return packets;
}

Frame packet_frame(const TransmissionPacket& p) {
  Frame f(p.payload_h, p.payload_w);
  size_t k = 0;
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x)
      for (int c = 0; c < 3; ++c) f.at(c, y, x) = static_cast<float>(p.payload[k++]) / 255.0f;
  return f;
}

FrameSequence receive(const FrameCodec& codec, std::vector<TransmissionPacket> packets, const TransmissionPlan& plan,
                      double target_fps_factor, const std::array<uint8_t, 16>& model_digest16) {
  plan.validate();
  if (!(target_fps_factor > 0) || !std::isfinite(target_fps_factor))
    fail(ErrorCode::InvalidFactor, "target_fps_factor must be > 0");
  if (packets.empty()) fail(ErrorCode::NoFrames, "no keyframes received");
  for (const auto& p : packets)
    if (p.model_digest16 != model_digest16) fail(ErrorCode::WrongModel, "packet was produced for a different model");
  std::sort(packets.begin(), packets.end(),
            [](const TransmissionPacket& a, const TransmissionPacket& b) { return a.frame_index < b.frame_index; });
  // Duplicates (retransmissions) collapse onto the first copy.
  packets.erase(std::unique(packets.begin(), packets.end(),
                            [](const auto& a, const auto& b) { return a.frame_index == b.frame_index; }),
                packets.end());

  const int h = packets.front().orig_h, w = packets.front().orig_w;
  std::vector<int> idx;
  std::vector<Frame> keys;
  std::vector<LatentCode> codes;
  for (const auto& p : packets) {
    if (p.orig_h != h || p.orig_w != w) fail(ErrorCode::ResolutionMismatch, "keyframes differ in size");
    const Frame up = clamp01(resize_bilinear(packet_frame(p), h, w));
    keys.push_back(iterate_project(codec, up, plan.reprojection_n));
    codes.push_back(codec.encode(keys.back()));
    idx.push_back(static_cast<int>(p.frame_index));
  }

  const size_t length = static_cast<size_t>(idx.back()) + 1;
  const size_t m = static_cast<size_t>(std::llround(static_cast<double>(length - 1) * target_fps_factor)) + 1;
  std::vector<Frame> out;
  out.reserve(m);
  for (size_t j = 0; j < m; ++j) {
    const double t =
        m == 1 ? 0.0 : static_cast<double>(j) * static_cast<double>(length - 1) / static_cast<double>(m - 1);
    // Bracketing keyframes; times before the first keyframe hold it.
    size_t b = std::lower_bound(idx.begin(), idx.end(), t - 1e-9,
                                [](int k, double v) { return static_cast<double>(k) < v; }) -
               idx.begin();
    if (b >= idx.size()) b = idx.size() - 1;
    if (std::abs(idx[b] - t) < 1e-9 || b == 0) {
      out.push_back(keys[b]);
      continue;
    }
    const size_t a = b - 1;
    const double alpha = (idx[b] - t) / static_cast<double>(idx[b] - idx[a]);
    out.push_back(interpolate(codec, codes[a], codes[b], alpha));
  }
  return FrameSequence::from_frames(std::move(out), "received");
}

// ------------------------------------------------------------- metrics

double psnr(const Frame& a, const Frame& b) {
  if (!a.same_shape(b)) fail(ErrorCode::ShapeError, "PSNR needs frames of equal size");
  const double m = mse(a, b);
  if (m < 1e-10) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / m));
}

double ssim(const Frame& a, const Frame& b) {
  if (!a.same_shape(b)) fail(ErrorCode::ShapeError, "SSIM needs frames of equal size");
  constexpr int kRadius = 5;
  constexpr double kSigma = 1.5, C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  const int h = a.height, w = a.width;
  if (h <= 2 * kRadius || w <= 2 * kRadius) fail(ErrorCode::ShapeError, "SSIM needs frames larger than 11x11");
  std::array<double, 2 * kRadius + 1> g{};
  double gs = 0;
  for (int i = -kRadius; i <= kRadius; ++i) gs += g[i + kRadius] = std::exp(-(i * i) / (2 * kSigma * kSigma));
  for (auto& v : g) v /= gs;

  const int oh = h - 2 * kRadius, ow = w - 2 * kRadius;
  // Separable filtering restricted to the valid region.
  auto filter = [&](const std::vector<double>& src) {
    std::vector<double> tmp(static_cast<size_t>(h) * ow), dst(static_cast<size_t>(oh) * ow);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = 0;
        for (int k = 0; k <= 2 * kRadius; ++k) acc += g[k] * src[static_cast<size_t>(y) * w + x + k];
        tmp[static_cast<size_t>(y) * ow + x] = acc;
      }
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = 0;
        for (int k = 0; k <= 2 * kRadius; ++k) acc += g[k] * tmp[static_cast<size_t>(y + k) * ow + x];
        dst[static_cast<size_t>(y) * ow + x] = acc;
      }
    return dst;
  };

  double total = 0;
  const size_t n = a.plane_size();
  for (int c = 0; c < Frame::kChannels; ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (size_t i = 0; i < n; ++i) {
      x[i] = a.pixels[c * n + i];
      y[i] = b.pixels[c * n + i];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter(x), my = filter(y), mxx = filter(xx), myy = filter(yy), mxy = filter(xy);
    double acc = 0;
    for (size_t i = 0; i < mx.size(); ++i) {
      const double vx = mxx[i] - mx[i] * mx[i], vy = myy[i] - my[i] * my[i], cxy = mxy[i] - mx[i] * my[i];
      acc += ((2 * mx[i] * my[i] + C1) * (2 * cxy + C2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + C1) * (vx + vy + C2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / Frame::kChannels;
}

// ------------------------------------------------------------- accounting and files

std::string BitrateReport::to_json() const {
  return nlohmann::json{{"packets", packets},
                        {"online_bits", online_bits},
                        {"online_payload_bits", online_payload_bits},
                        {"offline_bits", offline_bits},
                        {"total_bits", total_bits},
                        {"raw_bits", raw_bits},
                        {"duration_s", duration_s},
                        {"online_bps", online_bps},
                        {"raw_bps", raw_bps}}
      .dump();
}

BitrateReport bitrate_report(std::span<const TransmissionPacket> packets, size_t model_bytes, double duration_s,
                             size_t frame_count) {
  if (!(duration_s > 0)) fail(ErrorCode::InvalidConfig, "duration must be > 0");
  BitrateReport r;
  r.packets = packets.size();
  r.duration_s = duration_s;
  for (const auto& p : packets) {
    r.online_bits += 8ull * p.wire_size();
    r.online_payload_bits += 8ull * p.payload.size();
  }
  r.offline_bits = 8ull * model_bytes;
  r.total_bits = r.online_bits + r.offline_bits;
  if (!packets.empty())
    r.raw_bits = 8ull * 3ull * packets.front().orig_h * packets.front().orig_w * frame_count;
  r.online_bps = static_cast<double>(r.online_bits) / duration_s;
  r.raw_bps = static_cast<double>(r.raw_bits) / duration_s;
  return r;
}

void write_vsat(const std::filesystem::path& path, std::span<const TransmissionPacket> packets) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& p : packets) {
    const auto bytes = encode_packet(p);
    std::vector<uint8_t> len;
    put_le<uint32_t>(len, static_cast<uint32_t>(bytes.size()));
    out.write(reinterpret_cast<const char*>(len.data()), 4);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

std::vector<TransmissionPacket> read_vsat(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  const std::vector<uint8_t> data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::vector<TransmissionPacket> packets;
  size_t pos = 0;
  while (pos < data.size()) {
    if (pos + 4 > data.size()) fail(ErrorCode::CorruptPacket, "truncated length prefix");
    const uint32_t len = get_le<uint32_t>(data.data() + pos);
    pos += 4;
    if (pos + len > data.size()) fail(ErrorCode::CorruptPacket, "truncated packet in stream");
    packets.push_back(decode_packet(std::span(data.data() + pos, len)));
    pos += len;
  }
  return packets;
}

}  // namespace visa

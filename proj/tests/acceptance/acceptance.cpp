// End-to-end acceptance checks on the synthetic desk rig (128x192, k=16, 200 epochs).
// Prints one PASS/FAIL line per criterion and exits non-zero if any fails.
//
//   visa_acceptance [criterion ...]
//
// VISA_ACCEPT_CACHE=<dir> keeps trained weights between runs; without it every
// model is trained from scratch.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "visa/autoencoder.hpp"
#include "visa/editing.hpp"
#include "visa/errors.hpp"
#include "visa/evaluate.hpp"
#include "visa/frame.hpp"
#include "visa/ingest.hpp"
#include "visa/latentops.hpp"
#include "visa/projection.hpp"
#include "visa/service.hpp"
#include "visa/synth.hpp"
#include "visa/transmit.hpp"

namespace fs = std::filesystem;
using namespace visa;
using nlohmann::json;

namespace {

constexpr int kH = 128, kW = 192, kK = 16;

// The full-size configuration is fixed at compile time.
constexpr int kFullH = 256, kFullW = 512, kFullK = 64;
constexpr long kFullLatent = 12L * kFullK * (kFullH / kDownsampleFactor) * (kFullW / kDownsampleFactor);
static_assert(kFullLatent == 768L * 4 * 8);
static_assert(3L * kFullH * kFullW == 16 * kFullLatent);

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<Frame> every_other(const std::vector<Frame>& frames, size_t start) {
  std::vector<Frame> out;
  for (size_t i = start; i < frames.size(); i += 2) out.push_back(frames[i]);
  return out;
}

// ------------------------------------------------------------------ models

struct Trained {
  VideoAutoencoder model;
  TrainHistory history;
};

class Models {
 public:
  Models() {
    if (const char* dir = std::getenv("VISA_ACCEPT_CACHE")) cache_ = fs::path(dir);
  }

  // Alternate frames of the desk clip, no flips.
  const Trained& desk() {
    return get("desk_alt", [] {
      return std::make_pair(every_other(synth::desk_clip().sequence.frames, 0), std::vector<std::string>{"desk"});
    }, false);
  }
  // Same frames with horizontal-flip augmentation.
  const Trained& desk_flip() {
    return get("desk_alt_hflip", [] {
      return std::make_pair(every_other(synth::desk_clip().sequence.frames, 0), std::vector<std::string>{"desk"});
    }, true);
  }
  // Alternate frames of the clip with a fine background grating.
  const Trained& detail() {
    return get("detail_alt", [] {
      return std::make_pair(every_other(synth::detail_clip().sequence.frames, 0), std::vector<std::string>{"detail"});
    }, false);
  }
  const Trained& two_shot() {
    return get("two_shot", [] {
      return std::make_pair(synth::two_shot(20, kH, kW, 5).sequence.frames, std::vector<std::string>{"two_shot"});
    }, false);
  }
  const Trained& shared() {
    return get("shared3", [] {
      std::vector<Frame> all;
      for (const auto& v : three_videos()) all.insert(all.end(), v.sequence.frames.begin(), v.sequence.frames.end());
      return std::make_pair(all, std::vector<std::string>{"a", "b", "c"});
    }, false);
  }

  static std::vector<synth::SynthVideo> three_videos() {
    synth::SpriteStyle blue;
    blue.color[0] = 0.15f, blue.color[1] = 0.3f, blue.color[2] = 0.9f;
    blue.radius = 18.0f;
    return {synth::moving_sprite(20, kH, kW, 3.0f, 1.0f, 21, synth::desk_style(), "a"),
            synth::periodic_motion(20, kH, kW, 10, 22, "b"),
            synth::moving_sprite(20, kH, kW, -2.5f, 0.5f, 23, blue, "c")};
  }

 private:
  using Source = std::function<std::pair<std::vector<Frame>, std::vector<std::string>>()>;

  const Trained& get(const std::string& name, const Source& source, bool hflip) {
    if (auto it = models_.find(name); it != models_.end()) return it->second;
    auto cfg = AutoencoderConfig::with_base(kK, kH, kW);
    cfg.hflip_augmentation = hflip;
    Trained t{build_model(cfg, 1), {}};
    const fs::path weights = cache_.empty() ? fs::path() : cache_ / (name + ".weights");
    const fs::path hist = cache_.empty() ? fs::path() : cache_ / (name + ".history.json");
    if (!cache_.empty() && fs::exists(weights) && fs::exists(hist)) {
      std::ifstream in(weights, std::ios::binary);
      t.model.load_weights(std::vector<uint8_t>((std::istreambuf_iterator<char>(in)), {}));
      std::ifstream hin(hist);
      const json j = json::parse(hin);
      for (const auto& e : j.at("epochs"))
        t.history.epochs.push_back({e.at("epoch"), e.at("mean_loss"), e.at("lr"), e.at("wall_time_s")});
      std::printf("  (loaded %s from cache)\n", name.c_str());
    } else {
      const auto [frames, labels] = source();
      const auto t0 = Clock::now();
      std::printf("  training %s on %zu frames...\n", name.c_str(), frames.size());
      std::fflush(stdout);
      TrainConfig tc;
      tc.seed = 1;
      t.history = train(t.model, FrameSequence::from_frames(frames, labels.front()), tc);
      std::printf("  trained %s in %.0f s, loss %.5f -> %.5f\n", name.c_str(),
                  std::chrono::duration<double>(Clock::now() - t0).count(), t.history.epochs.front().mean_loss,
                  t.history.epochs.back().mean_loss);
      if (!cache_.empty()) {
        fs::create_directories(cache_);
        const auto w = t.model.serialize_weights();
        std::ofstream(weights, std::ios::binary).write(reinterpret_cast<const char*>(w.data()), w.size());
        std::ofstream(hist) << t.history.to_json();
      }
    }
    return models_.emplace(name, std::move(t)).first->second;
  }

  fs::path cache_;
  std::map<std::string, Trained> models_;
};

// ------------------------------------------------------------------ criteria

Outcome c1_shapes(Models&) {
  const auto cfg = AutoencoderConfig::with_base(kFullK, kFullH, kFullW);
  cfg.validate();
  const int c = cfg.latent_channels(), h = cfg.latent_h(kFullH), w = cfg.latent_w(kFullW);
  const double ratio = 3.0 * kFullH * kFullW / (static_cast<double>(c) * h * w);
  // The desk model produces the same geometry at its own size.
  const auto desk = build_model(AutoencoderConfig::with_base(kK, kH, kW), 0);
  const auto code = desk.encode(Frame(kH, kW, 0.5f));
  const bool desk_ok = code.channels == 12 * kK && code.height == 2 && code.width == 3;
  return {c == 768 && h == 4 && w == 8 && ratio == 16.0 && desk_ok,
          fmt("latent %dx%dx%d, compression %.1fx, desk code %dx%dx%d", c, h, w, ratio, code.channels, code.height,
              code.width)};
}

Outcome c2_training(Models& m) {
  const auto& t = m.desk();
  const auto frames = every_other(synth::desk_clip().sequence.frames, 0);
  std::vector<double> p;
  for (const auto& f : frames) p.push_back(psnr(t.model.reconstruct(f), f));
  const double first = t.history.epochs.front().mean_loss, last = t.history.epochs.back().mean_loss;
  return {mean(p) >= 30.0 && last < first / 10.0,
          fmt("train PSNR %.2f dB (need >= 30), loss %.5f -> %.5f (ratio %.1f, need > 10)", mean(p), first, last,
              first / last)};
}

Outcome c3_linear(Models&) {
  std::vector<Frame> basis;
  for (int i = 0; i < 12; ++i) basis.push_back(synth::smooth_texture(64, 64, 300 + i));
  const LinearAutoencoder lin(basis, 8);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    Frame x(64, 64);
    for (auto& v : x.pixels) v = u(rng);
    const Frame p1 = project(lin, x), p2 = project(lin, p1);
    double diff = 0, norm = 0;
    for (size_t j = 0; j < p1.pixels.size(); ++j) {
      diff = std::max(diff, std::abs(static_cast<double>(p2.pixels[j]) - p1.pixels[j]));
      norm = std::max(norm, std::abs(static_cast<double>(p1.pixels[j])));
    }
    worst = std::max(worst, diff / norm);
  }
  return {worst <= 1e-5, fmt("max relative change on second projection %.2e over 100 inputs (need <= 1e-5)", worst)};
}

Outcome c4_endpoints(Models&) {
  const auto model = build_model(AutoencoderConfig::with_base(kK, kH, kW), 3);
  const auto clip = synth::desk_clip(6).sequence.frames;
  const auto a = model.encode(clip[1]), b = model.encode(clip[4]);
  const bool codes = mix_codes(a, b, 1.0).values == a.values && mix_codes(a, b, 0.0).values == b.values;
  const bool frames = interpolate(model, a, b, 1.0).pixels == model.decode(a).pixels &&
                      interpolate(model, a, b, 0.0).pixels == model.decode(b).pixels;
  return {codes && frames, fmt("codes bit-exact: %s, decoded frames bit-exact: %s", codes ? "yes" : "no",
                               frames ? "yes" : "no")};
}

Outcome c5_temporal(Models& m) {
  const auto ev = evaluate_temporal(m.desk().model, synth::desk_clip().sequence, TemporalMode::Alt, 0);
  const double interp = mean(ev.psnr_interp), copy = mean(ev.psnr_copy);
  return {interp >= copy + 2.0, fmt("held-out midpoints %.2f dB vs keyframe copy %.2f dB (margin %+.2f, need +2.00)",
                                    interp, copy, interp - copy)};
}

Outcome c6_superres(Models& m) {
  const auto& model = m.detail().model;
  const auto held = every_other(synth::detail_clip().sequence.frames, 1);
  std::vector<double> sr4, bl4, sr8_5, sr8_0;
  for (const auto& f : held) {
    const Frame low4 = box_downsample(f, 4);
    sr4.push_back(psnr(spatial_superres(model, low4, kH, kW, 5), f));
    bl4.push_back(psnr(clamp01(resize_bilinear(low4, kH, kW)), f));
    const Frame low8 = box_downsample(f, 8);
    sr8_5.push_back(psnr(spatial_superres(model, low8, kH, kW, 5), f));
    sr8_0.push_back(psnr(spatial_superres(model, low8, kH, kW, 0), f));
  }
  const bool pass = mean(sr4) >= mean(bl4) + 1.0 && mean(sr8_5) >= mean(sr8_0);
  return {pass, fmt("4x: n=5 %.2f dB vs bilinear %.2f dB (margin %+.2f, need +1.00); 8x: n=5 %.2f vs n=0 %.2f dB",
                    mean(sr4), mean(bl4), mean(sr4) - mean(bl4), mean(sr8_5), mean(sr8_0))};
}

Outcome c7_continuity(Models& m) {
  const auto& model = m.desk().model;
  const auto codes = model.encode_all(synth::desk_clip().sequence.frames);
  const auto pts = embed_all(fit_embedding(codes), codes);
  auto dist = [&](size_t i, size_t j) { return std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y); };
  std::vector<double> consecutive, pairs;
  for (size_t i = 0; i + 1 < pts.size(); ++i) consecutive.push_back(dist(i, i + 1));
  // Random pairs, sampled uniformly over all distinct pairs.
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<size_t> pick(0, pts.size() - 1);
  while (pairs.size() < 2000) {
    const size_t i = pick(rng), j = pick(rng);
    if (i != j) pairs.push_back(dist(i, j));
  }
  const double ratio = mean(consecutive) / mean(pairs);
  return {ratio <= 0.5, fmt("consecutive %.4f vs random pair %.4f (ratio %.3f, need <= 0.5)", mean(consecutive),
                            mean(pairs), ratio)};
}

Outcome c8_clustering(Models& m) {
  const auto& model = m.shared().model;
  std::vector<LatentCode> codes;
  std::vector<std::string> labels;
  for (const auto& v : Models::three_videos())
    for (const auto& f : v.sequence.frames) {
      codes.push_back(model.encode(f));
      labels.push_back(v.sequence.source_label);
    }
  const auto r = cluster(codes, labels, 3, 0);
  return {r.purity >= 0.9 && r.auc >= 0.9, fmt("purity %.3f, purity-coverage AUC %.3f over %zu codes (need >= 0.9)",
                                               r.purity, r.auc, codes.size())};
}

Outcome c9_averages(Models& m) {
  const auto& model = m.two_shot().model;
  const auto frames = synth::two_shot(20, kH, kW, 5).sequence.frames;
  const auto codes = model.encode_all(frames);
  const double latent = gradient_energy(decode_average(model, codes, kDefaultIterations));
  const double pixel = gradient_energy(pixel_mean(frames));
  return {latent >= pixel, fmt("sharpness latent average %.5f vs pixel average %.5f", latent, pixel)};
}

Outcome c10_correspondence(Models& m) {
  const auto& model = m.desk().model;
  const Frame tex = synth::smooth_texture(kH, kW, 77);
  const auto pa = pixel_codes(model, tex);
  const auto same = correspond(pa, pa, 4);
  bool identity = true;
  for (size_t i = 0; i < same.dx.size(); ++i)
    if (same.valid[i] && (same.dx[i] != 0 || same.dy[i] != 0)) identity = false;

  const auto pb = pixel_codes(model, synth::translate_wrap(tex, 4, 0));
  const auto flow = correspond(pa, pb, 8);
  std::vector<double> err;
  for (size_t i = 0; i < flow.dx.size(); ++i)
    if (flow.valid[i]) err.push_back(std::hypot(flow.dx[i] - 4.0, static_cast<double>(flow.dy[i])));
  std::nth_element(err.begin(), err.begin() + err.size() / 2, err.end());
  const double median = err.empty() ? 1e9 : err[err.size() / 2];

  const auto clip = synth::desk_clip();
  const std::vector<Frame> first(clip.sequence.frames.begin(), clip.sequence.frames.begin() + 11);
  const auto masks = propagate_mask(model, first, clip.masks[0], 6);
  const double iou = mask_iou(masks[10], clip.masks[10]);
  return {identity && median <= 1.0 && iou >= 0.8,
          fmt("identity flow exact: %s; 4-px shift median error %.2f px (need <= 1); mask IoU after 10 frames %.3f "
              "(need >= 0.8)",
              identity ? "yes" : "no", median, iou)};
}

Outcome c11_wire(Models&) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 32), byte(0, 255);
  int exact = 0;
  for (int i = 0; i < 1000; ++i) {
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
    const auto bytes = encode_packet(p);
    const auto q = decode_packet(bytes, p.model_digest16);
    if (q == p && encode_packet(q) == bytes) ++exact;
  }
  TransmissionPacket p;
  p.payload_h = p.payload_w = 2;
  p.orig_h = p.orig_w = 8;
  p.payload.assign(12, 7);
  auto bytes = encode_packet(p);
  auto code_of = [](const std::function<void()>& f) -> std::string {
    try {
      f();
    } catch (const visa::Error& e) {
      return std::string(to_string(e.code()));
    }
    return "accepted";
  };
  std::array<uint8_t, 16> other{};
  other[0] = 1;
  const std::string wrong = code_of([&] { decode_packet(bytes, other); });
  bytes.back() ^= 0x10;
  const std::string crc = code_of([&] { decode_packet(bytes); });
  return {exact == 1000 && crc == "CorruptPacket" && wrong == "WrongModel",
          fmt("%d/1000 bit-exact; bad CRC -> %s; wrong digest -> %s", exact, crc.c_str(), wrong.c_str())};
}

Outcome c12_transmission(Models& m) {
  const auto& model = m.detail().model;
  const auto clip = synth::detail_clip().sequence;
  const auto plan = TransmissionPlan::parse("stride=2,factor=4,n=5");
  const auto digest = digest16_from_hex(sha256_hex(model.serialize_weights()));
  const auto packets = send(clip, plan, digest);
  const auto video = receive(model, packets, plan, 1.0, digest);

  // Baseline: the latest keyframe, bilinearly upsampled.
  std::vector<double> ours, base;
  size_t k = 0;
  for (size_t i = 0; i < clip.size(); ++i) {
    while (k + 1 < packets.size() && packets[k + 1].frame_index <= i) ++k;
    const Frame up = clamp01(resize_bilinear(packet_frame(packets[k]), kH, kW));
    base.push_back(psnr(up, clip.frames[i]));
    ours.push_back(psnr(video.frames.at(i), clip.frames[i]));
  }

  const size_t model_bytes = 123456;
  const auto r = bitrate_report(packets, model_bytes, 4.0, clip.size());
  uint64_t wire = 0, payload = 0;
  for (const auto& p : packets) wire += 8ull * p.wire_size(), payload += 8ull * p.payload.size();
  const uint64_t keyframes = 21;  // 0, 2, ..., 38 and the last frame
  const bool arith = packets.size() == keyframes && payload == keyframes * 8ull * 32 * 48 * 3 &&
                     wire == payload + keyframes * 8ull * 44 && r.online_bits == wire &&
                     r.online_payload_bits == payload && r.offline_bits == 8ull * model_bytes &&
                     r.total_bits == wire + 8ull * model_bytes && r.raw_bits == 8ull * 3 * kH * kW * clip.size() &&
                     r.online_bps == static_cast<double>(wire) / 4.0 && video.size() == clip.size();
  return {mean(ours) >= mean(base) + 2.0 && arith,
          fmt("reconstruction %.2f dB vs keyframe-copy+bilinear %.2f dB (margin %+.2f, need +2.00); bitrate "
              "arithmetic %s",
              mean(ours), mean(base), mean(ours) - mean(base), arith ? "exact" : "WRONG")};
}

Outcome c13_flips(Models& m) {
  const auto frames = every_other(synth::desk_clip().sequence.frames, 0);
  const auto on = flip_separation(m.desk_flip().model, frames, kDefaultIterations);
  const auto off = flip_separation(m.desk().model, frames, kDefaultIterations);
  return {on.clusters.purity >= 0.9 && off.clusters.purity <= 0.7,
          fmt("K=2 separation purity with flips %.3f (need >= 0.9), without %.3f (need <= 0.7)", on.clusters.purity,
              off.clusters.purity)};
}

// Service contract against a catalog holding the desk bundle.
Outcome c14_service(Models& m) {
  const auto& t = m.desk();
  const fs::path root = fs::temp_directory_path() / ("visa_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const auto clip = synth::desk_clip();
  save_frames(clip.sequence, root / "desk" / "frames");
  save_model(make_bundle(t.model, t.history, {"desk"}), root / "desk" / "bundle");
  save_frames(FrameSequence::from_frames({clip.sequence.frames[0]}), root / "pending" / "frames");

  ServiceConfig cfg;
  cfg.catalog_root = root;
  Service service(cfg);
  httplib::Server server;
  service.install(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client c("127.0.0.1", port);
  c.set_read_timeout(300, 0);

  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  auto post = [&](const std::string& path, const json& body) { return c.Post(path, body.dump(), "application/json"); };
  auto is_png = [](const std::string& s) { return s.size() > 8 && s.compare(1, 3, "PNG") == 0; };
  auto err_code = [](const httplib::Result& r) {
    try {
      return json::parse(r->body).at("code").get<std::string>();
    } catch (...) {
      return std::string("?");
    }
  };
  int checks = 0;
  auto status_is = [&](const httplib::Result& r, int status, const std::string& code, const std::string& what) {
    ++checks;
    expect(r && r->status == status && (code.empty() || err_code(r) == code), what);
  };

  try {
    auto list = c.Get("/videos");
    status_is(list, 200, "", "GET /videos");
    const auto lj = json::parse(list->body);
    expect(lj.size() == 2 && lj[0]["video_id"] == "desk" && lj[0]["frame_count"] == 40 &&
               lj[0]["resolution"] == json::array({kH, kW}) && lj[0]["trained"] == true && lj[1]["trained"] == false,
           "videos schema");
    expect(c.Get("/videos")->body == list->body, "repeated /videos identical");

    auto emb = c.Get("/videos/desk/embedding");
    status_is(emb, 200, "", "GET embedding");
    const auto ej = json::parse(emb->body);
    expect(ej.size() == 40 && ej[0].contains("frame_id") && ej[0].contains("x") && ej[0].contains("y") &&
               ej[0]["source_label"] == "desk",
           "embedding schema");
    for (int i = 0; i < 3; ++i) expect(c.Get("/videos/desk/embedding")->body == emb->body, "repeated embedding identical");
    status_is(c.Get("/videos/nope/embedding"), 404, "NotFound", "unknown video");
    status_is(c.Get("/videos/pending/embedding"), 409, "Untrained", "untrained video");

    auto avg = post("/videos/desk/average", {{"frame_ids", {3, 4, 5, 6}}, {"iterations", 5}});
    status_is(avg, 200, "", "average");
    expect(is_png(avg->body) && !avg->get_header_value("X-Mediod-Frame-Id").empty(), "average PNG + mediod");
    status_is(post("/videos/desk/average", {{"frame_ids", json::array()}}), 400, "EmptySelection", "empty average");
    status_is(post("/videos/desk/average", {{"frame_ids", {99}}}), 400, "InvalidFrame", "average bad id");

    auto path = post("/videos/desk/path", {{"path", {{"waypoints", {0, 3, 10, 12}}, {"bridge_frames", 1}}}});
    status_is(path, 200, "", "path");
    const auto pj = json::parse(path->body);
    expect(pj["frame_count"] == 8 && pj["frames_png_base64"].size() == 8 &&
               pj["sources"] == json::array({0, 1, 2, 3, -1, 10, 11, 12}),
           "path schema");
    auto job = post("/videos/desk/path", {{"path", {{"waypoints", {0, 3, 10, 12}}, {"bridge_frames", 1}}}, {"async", true}});
    status_is(job, 202, "", "async path");
    const std::string id = json::parse(job->body).at("job_id");
    json js;
    for (int i = 0; i < 600; ++i) {
      js = json::parse(c.Get("/jobs/" + id)->body);
      if (js["status"] != "running") break;
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    expect(js["status"] == "done" && js["progress"] == 1.0, "job completes");
    expect(c.Get("/jobs/" + id + "/result")->body == path->body, "job result matches sync path");
    status_is(c.Get("/jobs/nope"), 404, "NotFound", "unknown job");
    status_is(post("/videos/desk/path", {{"path", {{"waypoints", {0}}}}}), 400, "InvalidPath", "short path");

    const json edits = json::array({{{"src_rect", {10, 10, 20, 20}}, {"dst_rect", {100, 60, 20, 20}}}});
    auto edit = post("/videos/desk/edit", {{"frame_id", 5}, {"edits", edits}});
    status_is(edit, 200, "", "edit");
    expect(is_png(edit->body), "edit PNG");
    status_is(post("/videos/desk/edit", {{"frame_id", 5}, {"edits", {{{"src_rect", {180, 0, 20, 20}},
                                                                      {"dst_rect", {0, 0, 20, 20}}}}}}),
              400, "InvalidRect", "edit outside frame");

    const auto low = encode_png(box_downsample(clip.sequence.frames[7], 4));
    httplib::MultipartFormDataItems items{{"frame", std::string(low.begin(), low.end()), "low.png", "image/png"}};
    auto sr = c.Post("/videos/desk/superres", items);
    status_is(sr, 200, "", "superres");
    const Frame up = decode_image(std::span(reinterpret_cast<const uint8_t*>(sr->body.data()), sr->body.size()));
    expect(up.height == kH && up.width == kW, "superres size");
    status_is(c.Post("/videos/desk/superres", "GIF89a-nope", "image/gif"), 415, "BadImage", "superres bad image");

    auto mask = post("/videos/desk/propagate_mask", {{"frame_id", 36},
                                                     {"mask_png_base64", base64_encode(encode_label_png(clip.masks[36]))},
                                                     {"search_radius", 4}});
    status_is(mask, 200, "", "propagate_mask");
    const auto mj = json::parse(mask->body);
    expect(mj["frame_ids"] == json::array({36, 37, 38, 39}) && mj["masks_png_base64"].size() == 4,
           "propagate_mask schema");
    status_is(post("/videos/desk/propagate_mask", {{"frame_id", 0},
                                                   {"mask_png_base64", base64_encode(encode_label_png(LabelMap(64, 64)))}}),
              400, "ShapeError", "mask shape");

    auto interp = post("/videos/desk/interpolate", {{"frame_a", 2}, {"frame_b", 6}, {"steps", 3}, {"include_endpoints", true}});
    status_is(interp, 200, "", "interpolate");
    const auto ij = json::parse(interp->body);
    expect(ij["alphas"] == json::array({1.0, 0.75, 0.5, 0.25, 0.0}) && ij["frames_png_base64"].size() == 5,
           "interpolate schema");
    status_is(post("/videos/desk/interpolate", {{"frame_a", 2}, {"frame_b", 6}, {"steps", 0}}), 400, "InvalidFactor",
              "interpolate steps");
    status_is(c.Post("/videos/desk/interpolate", "{oops", "application/json"), 400, "BadRequest", "malformed JSON");
  } catch (const std::exception& e) {
    failures.push_back(std::string("exception: ") + e.what());
  }
  server.stop();
  th.join();
  fs::remove_all(root);
  std::string detail = fmt("%d status checks", checks);
  if (failures.empty())
    detail += ", all schemas and error codes as specified, repeated GETs byte-identical";
  else
    for (const auto& f : failures) detail += "; failed: " + f;
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, Outcome (*)(Models&)>> criteria{
      {"shape and compression", c1_shapes},     {"training sanity", c2_training},
      {"linear one-step convergence", c3_linear}, {"interpolation endpoints", c4_endpoints},
      {"temporal super-resolution", c5_temporal}, {"spatial super-resolution", c6_superres},
      {"embedding continuity", c7_continuity},  {"clustering purity", c8_clustering},
      {"average sharpness", c9_averages},       {"correspondence and masks", c10_correspondence},
      {"wire format", c11_wire},                {"transmission end to end", c12_transmission},
      {"flip ablation", c13_flips},             {"service contract", c14_service},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  Models models;
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(n)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second(models);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}

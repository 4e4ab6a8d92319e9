// visa: batch entry points over the toolkit.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "visa/autoencoder.hpp"
#include "visa/editing.hpp"
#include "visa/errors.hpp"
#include "visa/evaluate.hpp"
#include "visa/ingest.hpp"
#include "visa/latentops.hpp"
#include "visa/projection.hpp"
#include "visa/service.hpp"
#include "visa/synth.hpp"
#include "visa/transmit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace visa;

namespace {

constexpr int kUsageError = 2;

std::pair<int, int> parse_size(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    size_t used = 0;
    const int h = std::stoi(text.substr(0, x), &used);
    const int w = std::stoi(text.substr(x + 1));
    return {h, w};
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidConfig, "size must look like 256x512, got '" + text + "'");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

// Every subcommand leaves run.json next to its outputs: the exact invocation and
// what it wrote.
struct Run {
  fs::path dir;
  std::vector<std::string> argv;
  json outputs = json::array();

  void add(const fs::path& p) { outputs.push_back(p.string()); }
  void finish(const json& extra = json::object()) const {
    json j{{"argv", argv}, {"outputs", outputs}};
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    write_text(dir / "run.json", j.dump(2));
  }
};

fs::path dir_of(const fs::path& file) { return file.has_parent_path() ? file.parent_path() : fs::path("."); }

struct LoadedBundle {
  ModelBundle bundle;
  VideoAutoencoder model;
};

LoadedBundle open_bundle(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::IoError, "no bundle at " + path.string());
  LoadedBundle b{load_model(path), {}};
  b.model = model_from_bundle(b.bundle);
  return b;
}

// Frames of the bundle's video: --frames, or <bundle>/../frames in a catalog layout.
FrameSequence video_frames(const LoadedBundle& b, const fs::path& bundle_path, const std::string& frames_dir,
                           const std::string& pattern) {
  fs::path dir = frames_dir;
  if (dir.empty()) {
    dir = fs::absolute(bundle_path).parent_path() / "frames";
    if (!fs::is_directory(dir)) fail(ErrorCode::NoFrames, "pass --frames (no frames directory beside the bundle)");
  }
  return conform(load_frames(dir, pattern), b.bundle.manifest.input_height, b.bundle.manifest.input_width);
}

std::vector<int> parse_ids(const std::vector<std::string>& items) {
  std::vector<int> ids;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      try {
        ids.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        fail(ErrorCode::InvalidConfig, "frame id '" + tok + "' is not an integer");
      }
    }
  }
  return ids;
}

void check_id(int id, size_t n) {
  if (id < 0 || static_cast<size_t>(id) >= n)
    fail(ErrorCode::InvalidConfig, "frame id " + std::to_string(id) + " is out of range [0, " + std::to_string(n) + ")");
}

std::string frame_name(size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu.png", i);
  return buf;
}

void save_all(std::span<const Frame> frames, const fs::path& dir, Run& run) {
  fs::create_directories(dir);
  for (size_t i = 0; i < frames.size(); ++i) {
    save_png(frames[i], dir / frame_name(i));
    run.add(dir / frame_name(i));
  }
}

TrainConfig train_config(uint64_t seed, int epochs) {
  TrainConfig tc;
  tc.seed = seed;
  if (epochs > 0) {
    tc.epochs_constant = epochs / 2;
    tc.epochs_decay = epochs - epochs / 2;
  }
  return tc;
}

void log_epoch(const EpochRecord& r) {
  std::fprintf(stderr, "epoch %d loss %.6f lr %.6g %.1fs\n", r.epoch, r.mean_loss, r.lr, r.wall_time_s);
}

// Frames for the studies: a directory, or the built-in synthetic clip.
FrameSequence study_frames(const std::string& dir, const std::string& pattern, int h, int w) {
  if (dir.empty()) return synth::desk_clip().sequence;
  return conform(load_frames(dir, pattern), h, w);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video-specific autoencoder toolkit"};
  app.require_subcommand(1);
  Run run;
  run.argv.assign(argv, argv + argc);

  // ---------------------------------------------------------------- train
  struct {
    std::string frames, out, size = "256x512", pattern = "*.png", label, conform = "bilinear";
    int k = 64, epochs = 0;
    bool hflip = false, multires = false;
    uint64_t seed = 0;
  } tr;
  auto* train_cmd = app.add_subcommand("train", "Train a video-specific autoencoder");
  train_cmd->add_option("--frames", tr.frames, "Directory of frames")->required();
  train_cmd->add_option("--out", tr.out, "Bundle directory to write")->required();
  train_cmd->add_option("--k", tr.k, "Base channel count");
  train_cmd->add_option("--size", tr.size, "Training resolution HxW");
  train_cmd->add_flag("--hflip", tr.hflip, "Horizontal-flip augmentation");
  train_cmd->add_flag("--multires", tr.multires, "Random low-resolution inputs");
  train_cmd->add_option("--epochs", tr.epochs, "Override the epoch count (split half constant, half decay)");
  train_cmd->add_option("--pattern", tr.pattern, "Frame filename glob");
  train_cmd->add_option("--label", tr.label, "Source label (default: directory name)");
  train_cmd->add_option("--conform", tr.conform, "bilinear | mirror_pad | zero_pad");
  train_cmd->add_option("--seed", tr.seed);
  train_cmd->callback([&] {
    const auto [h, w] = parse_size(tr.size);
    auto cfg = AutoencoderConfig::with_base(tr.k, h, w);
    cfg.hflip_augmentation = tr.hflip;
    cfg.multires_augmentation = tr.multires;
    cfg.validate();
    auto frames = conform(load_frames(tr.frames, tr.pattern), h, w, parse_conform_mode(tr.conform));
    const std::string label = tr.label.empty() ? fs::path(tr.frames).lexically_normal().filename().string() : tr.label;
    auto model = build_model(cfg, tr.seed);
    const auto history = train(model, frames, train_config(tr.seed, tr.epochs), log_epoch);
    save_model(make_bundle(model, history, {label}), tr.out);
    const fs::path hist = fs::path(tr.out) / "history.json";
    write_text(hist, history.to_json());
    run.dir = tr.out;
    run.add(fs::path(tr.out) / "manifest.json");
    run.add(fs::path(tr.out) / "weights.bin");
    run.add(hist);
    run.finish({{"seed", tr.seed}});
    std::cout << hist.string() << "\n";
  });

  // ---------------------------------------------------------------- embed
  struct {
    std::string bundle, frames, out, pattern = "*.png";
  } em;
  auto* embed_cmd = app.add_subcommand("embed", "Export the 2D embedding of a video");
  embed_cmd->add_option("--bundle", em.bundle)->required();
  embed_cmd->add_option("--frames", em.frames);
  embed_cmd->add_option("--out", em.out)->required();
  embed_cmd->add_option("--pattern", em.pattern);
  embed_cmd->callback([&] {
    const auto b = open_bundle(em.bundle);
    const auto seq = video_frames(b, em.bundle, em.frames, em.pattern);
    const auto codes = b.model.encode_all(seq.frames);
    const auto model = fit_embedding(codes);
    const std::string label = b.bundle.manifest.source_labels.empty() ? "" : b.bundle.manifest.source_labels.front();
    std::vector<std::string> labels(codes.size(), label);
    write_text(em.out, points_to_json(embed_all(model, codes, {}, labels)));
    run.dir = dir_of(em.out);
    run.add(em.out);
    run.finish();
  });

  // ---------------------------------------------------------------- superres
  struct {
    std::string bundle, in, out = "superres.png";
    int scale = 4, n = kDefaultIterations;
  } sr;
  auto* sr_cmd = app.add_subcommand("superres", "Upsample an image and reproject it onto the video manifold");
  sr_cmd->add_option("--bundle", sr.bundle)->required();
  sr_cmd->add_option("--in", sr.in)->required();
  sr_cmd->add_option("--scale", sr.scale, "Upsampling factor per axis");
  sr_cmd->add_option("--n", sr.n, "Reprojection iterations");
  sr_cmd->add_option("--out", sr.out);
  sr_cmd->callback([&] {
    if (sr.scale < 1) fail(ErrorCode::InvalidFactor, "scale must be >= 1");
    const auto b = open_bundle(sr.bundle);
    const Frame low = load_image(sr.in);
    save_png(spatial_superres(b.model, low, low.height * sr.scale, low.width * sr.scale, sr.n), sr.out);
    run.dir = dir_of(sr.out);
    run.add(sr.out);
    run.finish();
  });

  // ---------------------------------------------------------------- interpolate
  struct {
    std::string bundle, frames, out = "interpolated", pattern = "*.png";
    int a = 0, b = 0, steps = 1;
    bool endpoints = false;
  } ip;
  auto* ip_cmd = app.add_subcommand("interpolate", "Decode uniform latent blends between two frames");
  ip_cmd->add_option("--bundle", ip.bundle)->required();
  ip_cmd->add_option("--a", ip.a)->required();
  ip_cmd->add_option("--b", ip.b)->required();
  ip_cmd->add_option("--steps", ip.steps);
  ip_cmd->add_flag("--include-endpoints", ip.endpoints);
  ip_cmd->add_option("--frames", ip.frames);
  ip_cmd->add_option("--pattern", ip.pattern);
  ip_cmd->add_option("--out", ip.out, "Output directory");
  ip_cmd->callback([&] {
    if (ip.steps < 1) fail(ErrorCode::InvalidFactor, "steps must be >= 1");
    const auto b = open_bundle(ip.bundle);
    const auto seq = video_frames(b, ip.bundle, ip.frames, ip.pattern);
    check_id(ip.a, seq.size());
    check_id(ip.b, seq.size());
    const auto ca = b.model.encode(seq.frames[ip.a]), cb = b.model.encode(seq.frames[ip.b]);
    std::vector<double> alphas;
    if (ip.endpoints) alphas.push_back(1.0);
    for (int j = 1; j <= ip.steps; ++j) alphas.push_back(1.0 - static_cast<double>(j) / (ip.steps + 1));
    if (ip.endpoints) alphas.push_back(0.0);
    std::vector<Frame> out;
    for (double alpha : alphas) out.push_back(interpolate(b.model, ca, cb, alpha));
    run.dir = ip.out;
    save_all(out, ip.out, run);
    run.finish({{"alphas", alphas}});
  });

  // ---------------------------------------------------------------- texture
  struct {
    std::string bundle, path, frames, out = "texture", pattern = "*.png";
  } tx;
  auto* tx_cmd = app.add_subcommand("texture", "Render a path or loop through the video");
  tx_cmd->add_option("--bundle", tx.bundle)->required();
  tx_cmd->add_option("--path", tx.path, "PathSpec JSON file")->required();
  tx_cmd->add_option("--frames", tx.frames);
  tx_cmd->add_option("--pattern", tx.pattern);
  tx_cmd->add_option("--out", tx.out, "Output directory");
  tx_cmd->callback([&] {
    std::ifstream in(tx.path);
    if (!in) fail(ErrorCode::IoError, "cannot read " + tx.path);
    const PathSpec spec = PathSpec::from_json({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
    const auto b = open_bundle(tx.bundle);
    const auto seq = video_frames(b, tx.bundle, tx.frames, tx.pattern);
    const auto codes = b.model.encode_all(seq.frames);
    const auto result = make_texture(b.model, codes, spec);
    run.dir = tx.out;
    save_all(result.frames.frames, tx.out, run);
    run.finish({{"sources", result.sources}});
  });

  // ---------------------------------------------------------------- average
  struct {
    std::string bundle, frames, out = "average.png", pattern = "*.png";
    std::vector<std::string> ids;
    int iterations = kDefaultIterations;
  } av;
  auto* av_cmd = app.add_subcommand("average", "Decode the mean latent code of a frame selection");
  av_cmd->add_option("--bundle", av.bundle)->required();
  av_cmd->add_option("--ids", av.ids, "Frame ids (space or comma separated)")->required();
  av_cmd->add_option("--iterations", av.iterations);
  av_cmd->add_option("--frames", av.frames);
  av_cmd->add_option("--pattern", av.pattern);
  av_cmd->add_option("--out", av.out);
  av_cmd->callback([&] {
    const auto ids = parse_ids(av.ids);
    if (ids.empty()) fail(ErrorCode::EmptySelection, "no frame ids given");
    const auto b = open_bundle(av.bundle);
    const auto seq = video_frames(b, av.bundle, av.frames, av.pattern);
    std::vector<LatentCode> codes;
    for (int id : ids) {
      check_id(id, seq.size());
      codes.push_back(b.model.encode(seq.frames[id]));
    }
    save_png(decode_average(b.model, codes, av.iterations), av.out);
    const int mediod = ids[mediod_index(codes)];
    run.dir = dir_of(av.out);
    run.add(av.out);
    run.finish({{"mediod_frame_id", mediod}});
    std::cout << json{{"mediod_frame_id", mediod}, {"image", av.out}}.dump() << "\n";
  });

  // ---------------------------------------------------------------- cluster
  struct {
    std::string bundle, out = "clusters", pattern = "*.png";
    std::vector<std::string> frames, labels;
    int k = 3;
    uint64_t seed = 0;
  } cl;
  auto* cl_cmd = app.add_subcommand("cluster", "k-means over latent codes with purity scoring");
  cl_cmd->add_option("--bundle", cl.bundle)->required();
  cl_cmd->add_option("--frames", cl.frames, "One or more frame directories")->required();
  cl_cmd->add_option("--k", cl.k);
  cl_cmd->add_option("--labels", cl.labels, "Ground-truth label per directory (default: directory names)");
  cl_cmd->add_option("--pattern", cl.pattern);
  cl_cmd->add_option("--seed", cl.seed);
  cl_cmd->add_option("--out", cl.out, "Output directory");
  cl_cmd->callback([&] {
    if (!cl.labels.empty() && cl.labels.size() != cl.frames.size())
      fail(ErrorCode::InvalidConfig, "give one label per frames directory");
    const auto b = open_bundle(cl.bundle);
    std::vector<LatentCode> codes;
    std::vector<std::string> labels;
    for (size_t d = 0; d < cl.frames.size(); ++d) {
      const auto seq = conform(load_frames(cl.frames[d], cl.pattern), b.bundle.manifest.input_height,
                               b.bundle.manifest.input_width);
      const std::string label =
          cl.labels.empty() ? fs::path(cl.frames[d]).lexically_normal().filename().string() : cl.labels[d];
      for (auto& c : b.model.encode_all(seq.frames)) {
        codes.push_back(std::move(c));
        labels.push_back(label);
      }
    }
    const auto result = cluster(codes, labels, cl.k, cl.seed);
    const fs::path out(cl.out);
    write_text(out / "clusters.json", result.to_json());
    write_text(out / "purity_coverage.csv", result.curve_csv());
    run.dir = out;
    run.add(out / "clusters.json");
    run.add(out / "purity_coverage.csv");
    run.finish({{"seed", cl.seed}});
    std::cout << json{{"purity", result.purity}, {"auc", result.auc}}.dump() << "\n";
  });

  // ---------------------------------------------------------------- transmit
  auto* tm_cmd = app.add_subcommand("transmit", "Low-bitrate transmission simulator");
  tm_cmd->require_subcommand(1);
  struct {
    std::string bundle, plan = "stride=2,factor=4,n=5", frames, out = "stream.vsat", pattern = "*.png";
    double fps = 30.0;
  } ts;
  auto* send_cmd = tm_cmd->add_subcommand("send", "Subsample and packetize a video");
  send_cmd->add_option("--bundle", ts.bundle)->required();
  send_cmd->add_option("--plan", ts.plan);
  send_cmd->add_option("--frames", ts.frames);
  send_cmd->add_option("--pattern", ts.pattern);
  send_cmd->add_option("--fps", ts.fps, "Frame rate used for the bitrate report");
  send_cmd->add_option("--out", ts.out);
  send_cmd->callback([&] {
    const auto plan = TransmissionPlan::parse(ts.plan);
    if (ts.fps <= 0) fail(ErrorCode::InvalidConfig, "fps must be positive");
    const auto b = open_bundle(ts.bundle);
    const auto seq = video_frames(b, ts.bundle, ts.frames, ts.pattern);
    const auto packets = send(seq, plan, digest16_from_hex(b.bundle.manifest.weights_digest));
    write_vsat(ts.out, packets);
    const auto report = bitrate_report(packets, b.bundle.weights.size(), static_cast<double>(seq.size()) / ts.fps,
                                       seq.size());
    const fs::path rep = dir_of(ts.out) / "bitrate.json";
    write_text(rep, report.to_json());
    run.dir = dir_of(ts.out);
    run.add(ts.out);
    run.add(rep);
    run.finish();
    std::cout << report.to_json() << "\n";
  });

  struct {
    std::string bundle, plan = "stride=2,factor=4,n=5", in, out = "received", reference, pattern = "*.png";
    double fps_factor = 1.0;
  } rv;
  auto* recv_cmd = tm_cmd->add_subcommand("receive", "Reconstruct a video from a packet stream");
  recv_cmd->add_option("--bundle", rv.bundle)->required();
  recv_cmd->add_option("--plan", rv.plan);
  recv_cmd->add_option("--in", rv.in, ".vsat stream")->required();
  recv_cmd->add_option("--fps-factor", rv.fps_factor, "Output frame-rate multiplier");
  recv_cmd->add_option("--reference", rv.reference, "Original frames for PSNR/SSIM");
  recv_cmd->add_option("--pattern", rv.pattern);
  recv_cmd->add_option("--out", rv.out, "Output directory");
  recv_cmd->callback([&] {
    const auto plan = TransmissionPlan::parse(rv.plan);
    const auto b = open_bundle(rv.bundle);
    const auto video = receive(b.model, read_vsat(rv.in), plan, rv.fps_factor,
                               digest16_from_hex(b.bundle.manifest.weights_digest));
    run.dir = rv.out;
    save_all(video.frames, rv.out, run);
    json report{{"frames", video.size()}};
    if (!rv.reference.empty()) {
      const auto ref = conform(load_frames(rv.reference, rv.pattern), b.bundle.manifest.input_height,
                               b.bundle.manifest.input_width);
      if (ref.size() != video.size())
        fail(ErrorCode::ShapeError, "reference has " + std::to_string(ref.size()) + " frames, reconstruction has " +
                                        std::to_string(video.size()));
      std::vector<double> p, s;
      for (size_t i = 0; i < ref.size(); ++i) {
        p.push_back(psnr(video.frames[i], ref.frames[i]));
        s.push_back(ssim(video.frames[i], ref.frames[i]));
      }
      report["psnr"] = p;
      report["ssim"] = s;
      report["psnr_mean"] = TemporalEvaluation::mean(p);
      report["ssim_mean"] = TemporalEvaluation::mean(s);
    }
    write_text(fs::path(rv.out) / "report.json", report.dump(2));
    run.add(fs::path(rv.out) / "report.json");
    run.finish();
    std::cout << report.dump() << "\n";
  });

  // ---------------------------------------------------------------- eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluation protocols");
  eval_cmd->require_subcommand(1);
  struct {
    std::string mode = "ALT", frames, bundle, out = "eval_temporal", size = "128x192", pattern = "*.png";
    int k = 16, epochs = 200, n = kDefaultIterations;
    uint64_t seed = 0;
  } et;
  auto* temporal_cmd = eval_cmd->add_subcommand("temporal", "Temporal super-resolution from alternate frames");
  temporal_cmd->add_option("--mode", et.mode, "ALT (train on even frames) or ALL");
  temporal_cmd->add_option("--frames", et.frames, "Video frames (default: built-in synthetic clip)");
  temporal_cmd->add_option("--bundle", et.bundle, "Use an existing model instead of training");
  temporal_cmd->add_option("--k", et.k);
  temporal_cmd->add_option("--size", et.size);
  temporal_cmd->add_option("--epochs", et.epochs);
  temporal_cmd->add_option("--n", et.n, "Reprojection iterations for the refined estimate");
  temporal_cmd->add_option("--pattern", et.pattern);
  temporal_cmd->add_option("--seed", et.seed);
  temporal_cmd->add_option("--out", et.out, "Output directory");
  temporal_cmd->callback([&] {
    const auto mode = parse_temporal_mode(et.mode);
    const auto [h, w] = parse_size(et.size);
    VideoAutoencoder model;
    FrameSequence seq;
    if (!et.bundle.empty()) {
      auto b = open_bundle(et.bundle);
      seq = study_frames(et.frames, et.pattern, b.bundle.manifest.input_height, b.bundle.manifest.input_width);
      model = std::move(b.model);
    } else {
      seq = study_frames(et.frames, et.pattern, h, w);
      std::vector<Frame> train_frames;
      for (int i : training_indices(seq.size(), mode)) train_frames.push_back(seq.frames[i]);
      model = build_model(AutoencoderConfig::with_base(et.k, seq.frames[0].height, seq.frames[0].width), et.seed);
      train(model, FrameSequence::from_frames(std::move(train_frames)), train_config(et.seed, et.epochs), log_epoch);
    }
    const auto ev = evaluate_temporal(model, seq, mode, et.n);
    const fs::path out = fs::path(et.out) / "temporal.json";
    write_text(out, ev.to_json());
    run.dir = et.out;
    run.add(out);
    run.finish({{"seed", et.seed}});
    std::cout << json{{"mode", to_string(mode)},
                      {"psnr_interp", TemporalEvaluation::mean(ev.psnr_interp)},
                      {"psnr_reprojected", TemporalEvaluation::mean(ev.psnr_reprojected)},
                      {"psnr_copy", TemporalEvaluation::mean(ev.psnr_copy)}}
                     .dump()
              << "\n";
  });

  // ---------------------------------------------------------------- analyze
  auto* an_cmd = app.add_subcommand("analyze", "Manifold studies");
  an_cmd->require_subcommand(1);
  struct {
    std::string frames, bundle, out = "analysis", size = "128x192", pattern = "*.png", video_frames;
    int k = 16, epochs = 200, n = -1, grid = 5;
    uint64_t seed = 0;
  } an;
  auto* flips_cmd = an_cmd->add_subcommand("flips", "Train with and without flip augmentation and compare embeddings");
  flips_cmd->add_option("--frames", an.frames, "Video frames (default: built-in synthetic clip)");
  flips_cmd->add_option("--k", an.k);
  flips_cmd->add_option("--size", an.size);
  flips_cmd->add_option("--epochs", an.epochs);
  flips_cmd->add_option("--n", an.n, "Reprojections applied to flipped frames before encoding");
  flips_cmd->add_option("--pattern", an.pattern);
  flips_cmd->add_option("--seed", an.seed);
  flips_cmd->add_option("--out", an.out, "Output directory");
  flips_cmd->callback([&] {
    const auto [h, w] = parse_size(an.size);
    const auto seq = study_frames(an.frames, an.pattern, h, w);
    const int n = an.n < 0 ? kDefaultIterations : an.n;
    json summary;
    for (bool flip : {false, true}) {
      auto cfg = AutoencoderConfig::with_base(an.k, seq.frames[0].height, seq.frames[0].width);
      cfg.hflip_augmentation = flip;
      auto model = build_model(cfg, an.seed);
      train(model, seq, train_config(an.seed, an.epochs), log_epoch);
      const auto sep = flip_separation(model, seq.frames, n, an.seed);
      const fs::path out = fs::path(an.out) / (flip ? "hflip_on.json" : "hflip_off.json");
      write_text(out, sep.to_json());
      run.add(out);
      summary[flip ? "hflip_on_purity" : "hflip_off_purity"] = sep.clusters.purity;
    }
    run.dir = an.out;
    run.finish({{"seed", an.seed}, {"summary", summary}});
    std::cout << summary.dump() << "\n";
  });

  auto* foreign_cmd = an_cmd->add_subcommand("foreign", "Iteratively reproject another video onto this manifold");
  foreign_cmd->add_option("--bundle", an.bundle)->required();
  foreign_cmd->add_option("--frames", an.frames, "Foreign frames")->required();
  foreign_cmd->add_option("--video-frames", an.video_frames, "The bundle's own frames, for embedding the traces");
  foreign_cmd->add_option("--n", an.n);
  foreign_cmd->add_option("--pattern", an.pattern);
  foreign_cmd->add_option("--out", an.out, "Output directory");
  foreign_cmd->callback([&] {
    const auto b = open_bundle(an.bundle);
    const auto foreign =
        conform(load_frames(an.frames, an.pattern), b.bundle.manifest.input_height, b.bundle.manifest.input_width);
    std::optional<EmbeddingModel> em;
    try {
      const auto own = video_frames(b, an.bundle, an.video_frames, an.pattern);
      em = fit_embedding(b.model.encode_all(own.frames));
    } catch (const Error& e) {
      if (!an.video_frames.empty()) throw;
    }
    const auto aligned = align_foreign(b.model, foreign, an.n < 0 ? kForeignIterations : an.n, em ? &*em : nullptr);
    run.dir = an.out;
    save_all(aligned.outputs.frames, fs::path(an.out) / "aligned", run);
    json traces = json::array();
    for (const auto& t : aligned.traces) traces.push_back(json::parse(t.to_json()));
    write_text(fs::path(an.out) / "traces.json", traces.dump(2));
    run.add(fs::path(an.out) / "traces.json");
    run.finish();
  });

  auto* manifold_cmd = an_cmd->add_subcommand("manifold", "Decode a grid of points across the 2D embedding");
  manifold_cmd->add_option("--bundle", an.bundle)->required();
  manifold_cmd->add_option("--frames", an.frames);
  manifold_cmd->add_option("--grid", an.grid, "Points per axis");
  manifold_cmd->add_option("--pattern", an.pattern);
  manifold_cmd->add_option("--out", an.out, "Output directory");
  manifold_cmd->callback([&] {
    if (an.grid < 1) fail(ErrorCode::InvalidConfig, "grid must be >= 1");
    const auto b = open_bundle(an.bundle);
    const auto seq = video_frames(b, an.bundle, an.frames, an.pattern);
    const auto codes = b.model.encode_all(seq.frames);
    const auto em = fit_embedding(codes);
    const auto pts = embed_all(em, codes);
    double x0 = pts[0].x, x1 = x0, y0 = pts[0].y, y1 = y0;
    for (const auto& p : pts) {
      x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
    std::vector<std::pair<double, double>> grid;
    auto at = [&](double lo, double hi, int i) { return an.grid == 1 ? (lo + hi) / 2 : lo + (hi - lo) * i / (an.grid - 1); };
    for (int r = 0; r < an.grid; ++r)
      for (int c = 0; c < an.grid; ++c) grid.emplace_back(at(x0, x1, c), at(y0, y1, r));
    const auto frames = sample_manifold(b.model, em, grid);
    run.dir = an.out;
    save_all(frames, fs::path(an.out) / "samples", run);
    json g = json::array();
    for (const auto& [x, y] : grid) g.push_back({x, y});
    write_text(fs::path(an.out) / "grid.json", g.dump(2));
    run.add(fs::path(an.out) / "grid.json");
    run.finish();
  });

  // ---------------------------------------------------------------- serve
  struct {
    std::string config, host, catalog;
    int port = -1;
  } sv;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service over a catalog");
  serve_cmd->add_option("--config", sv.config, "INI file with a [server] section");
  serve_cmd->add_option("--host", sv.host);
  serve_cmd->add_option("--port", sv.port);
  serve_cmd->add_option("--catalog", sv.catalog, "Catalog root");
  serve_cmd->callback([&] {
    auto cfg = ServiceConfig::load(sv.config.empty() ? std::nullopt : std::optional<fs::path>(sv.config));
    if (!sv.host.empty()) cfg.host = sv.host;
    if (sv.port >= 0) cfg.port = sv.port;
    if (!sv.catalog.empty()) cfg.catalog_root = sv.catalog;
    Service service(cfg);
    std::cerr << "serving " << cfg.catalog_root.string() << " on " << cfg.host << ":" << cfg.port << "\n";
    if (!service.run()) fail(ErrorCode::IoError, "cannot listen on " + cfg.host + ":" + std::to_string(cfg.port));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

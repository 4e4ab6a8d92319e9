#include "visa/service.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>

#include "httplib.h"
#include "json.hpp"
#include "visa/editing.hpp"
#include "visa/errors.hpp"
#include "visa/projection.hpp"

namespace visa {

namespace fs = std::filesystem;
using nlohmann::json;

// ------------------------------------------------------------- config

ServiceConfig ServiceConfig::load(const std::optional<fs::path>& ini_path) {
  ServiceConfig c;
  if (ini_path) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(ini_path->string(), tree);
    } catch (const boost::property_tree::ptree_error& e) {
      fail(ErrorCode::InvalidConfig, std::string("cannot read service config: ") + e.what());
    }
    try {
      c.host = tree.get<std::string>("server.host", c.host);
      c.port = tree.get<int>("server.port", c.port);
      c.catalog_root = tree.get<std::string>("server.catalog_root", c.catalog_root.string());
      c.threads = tree.get<int>("server.threads", c.threads);
    } catch (const boost::property_tree::ptree_error& e) {
      fail(ErrorCode::InvalidConfig, std::string("bad service config value: ") + e.what());
    }
  }
  auto env_int = [](const char* name, int& dst) {
    if (const char* v = std::getenv(name)) {
      try {
        dst = std::stoi(v);
      } catch (const std::exception&) {
        fail(ErrorCode::InvalidConfig, std::string(name) + " is not an integer");
      }
    }
  };
  if (const char* v = std::getenv("VISA_HOST")) c.host = v;
  if (const char* v = std::getenv("VISA_CATALOG_ROOT")) c.catalog_root = v;
  env_int("VISA_PORT", c.port);
  env_int("VISA_THREADS", c.threads);
  if (c.port < 0 || c.port > 65535) fail(ErrorCode::InvalidConfig, "port out of range");
  if (c.threads < 1) fail(ErrorCode::InvalidConfig, "threads must be >= 1");
  return c;
}

// ------------------------------------------------------------- base64

std::string base64_encode(std::span<const uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<size_t>(n));
  return out;
}

std::vector<uint8_t> base64_decode(const std::string& text) {
  std::string clean;
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch))) clean.push_back(ch);
  if (clean.size() % 4 != 0) fail(ErrorCode::BadImage, "base64 length is not a multiple of 4");
  std::vector<uint8_t> out(3 * clean.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0) fail(ErrorCode::BadImage, "invalid base64");
  size_t pad = 0;
  if (!clean.empty() && clean.back() == '=') ++pad;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
  out.resize(static_cast<size_t>(n) - pad);
  return out;
}

// ------------------------------------------------------------- catalog

namespace {

bool is_image_name(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> image_files(const fs::path& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_image_name(e.path())) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string frames_fingerprint(const std::vector<fs::path>& files) {
  std::string listing;
  for (const auto& f : files) listing += f.filename().string() + ":" + std::to_string(fs::file_size(f)) + "\n";
  return sha256_hex(std::span(reinterpret_cast<const uint8_t*>(listing.data()), listing.size()));
}

// Codes cache: "VSAC" | digest (64) | fingerprint (64) | u32 count, c, h, w, src_h, src_w | floats
std::optional<std::vector<LatentCode>> read_codes_cache(const fs::path& path, const std::string& digest,
                                                        const std::string& fingerprint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[4];
  std::string d(64, '\0'), f(64, '\0');
  uint32_t hdr[6];
  if (!in.read(magic, 4) || std::memcmp(magic, "VSAC", 4) != 0) return std::nullopt;
  if (!in.read(d.data(), 64) || !in.read(f.data(), 64) || d != digest || f != fingerprint) return std::nullopt;
  if (!in.read(reinterpret_cast<char*>(hdr), sizeof hdr)) return std::nullopt;
  std::vector<LatentCode> codes(hdr[0]);
  for (auto& c : codes) {
    c.channels = static_cast<int>(hdr[1]);
    c.height = static_cast<int>(hdr[2]);
    c.width = static_cast<int>(hdr[3]);
    c.source_shape = {static_cast<int>(hdr[4]), static_cast<int>(hdr[5])};
    c.values.resize(static_cast<size_t>(hdr[1]) * hdr[2] * hdr[3]);
    if (!in.read(reinterpret_cast<char*>(c.values.data()), static_cast<std::streamsize>(c.values.size() * 4)))
      return std::nullopt;
  }
  return codes;
}

void write_codes_cache(const fs::path& path, const std::string& digest, const std::string& fingerprint,
                       const std::vector<LatentCode>& codes) {
  if (codes.empty()) return;
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return;  // read-only catalog: run without a cache
    const auto& c0 = codes.front();
    const uint32_t hdr[6] = {static_cast<uint32_t>(codes.size()), static_cast<uint32_t>(c0.channels),
                             static_cast<uint32_t>(c0.height),   static_cast<uint32_t>(c0.width),
                             static_cast<uint32_t>(c0.source_shape.first),
                             static_cast<uint32_t>(c0.source_shape.second)};
    out.write("VSAC", 4);
    out.write(digest.data(), 64);
    out.write(fingerprint.data(), 64);
    out.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
    for (const auto& c : codes)
      out.write(reinterpret_cast<const char*>(c.values.data()), static_cast<std::streamsize>(c.values.size() * 4));
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
}

}  // namespace

Catalog::Catalog(fs::path root) : root_(std::move(root)) {}

std::vector<Catalog::Entry> Catalog::list() const {
  std::vector<Entry> out;
  std::error_code ec;
  if (!fs::is_directory(root_, ec)) return out;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root_))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    Entry e;
    e.video_id = d.filename().string();
    e.bundle_path = d / "bundle";
    e.frames_path = d / "frames";
    const auto files = image_files(e.frames_path);
    e.frame_count = files.size();
    e.trained = fs::exists(e.bundle_path / "manifest.json") && fs::exists(e.bundle_path / "weights.bin");
    if (e.trained) {
      try {
        const auto m = ModelManifest::from_json(read_text(e.bundle_path / "manifest.json"));
        e.height = m.input_height;
        e.width = m.input_width;
      } catch (const Error&) {
        e.trained = false;
      }
    }
    if (!e.trained && !files.empty()) {
      try {
        const Frame f = load_image(files.front());
        e.height = f.height;
        e.width = f.width;
      } catch (const Error&) {
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::optional<Catalog::Entry> Catalog::find(const std::string& video_id) const {
  for (auto& e : list())
    if (e.video_id == video_id) return e;
  return std::nullopt;
}

std::shared_ptr<const LoadedVideo> Catalog::load(const Entry& entry) {
  const auto manifest = ModelManifest::from_json(read_text(entry.bundle_path / "manifest.json"));
  std::mutex* init = nullptr;
  {
    std::lock_guard lock(mutex_);
    auto it = loaded_.find(entry.video_id);
    if (it != loaded_.end() && it->second->digest == manifest.weights_digest) return it->second;
    auto& slot = init_locks_[entry.video_id];
    if (!slot) slot = std::make_unique<std::mutex>();
    init = slot.get();
  }
  // One initializer per video; others wait here and then reuse its result.
  std::lock_guard init_lock(*init);
  {
    std::lock_guard lock(mutex_);
    auto it = loaded_.find(entry.video_id);
    if (it != loaded_.end() && it->second->digest == manifest.weights_digest) return it->second;
  }

  auto v = std::make_shared<LoadedVideo>();
  v->video_id = entry.video_id;
  const ModelBundle bundle = load_model(entry.bundle_path);
  v->manifest = bundle.manifest;
  v->digest = bundle.manifest.weights_digest;
  v->model = model_from_bundle(bundle);
  const auto files = image_files(entry.frames_path);
  if (files.empty()) fail(ErrorCode::NoFrames, "video " + entry.video_id + " has no frames");
  for (const auto& f : files)
    v->frames.push_back(
        conform(load_image(f), v->manifest.input_height, v->manifest.input_width, ConformMode::Bilinear));
  const std::string fingerprint = frames_fingerprint(files);
  const fs::path cache = entry.bundle_path / "codes.cache";
  if (auto cached = read_codes_cache(cache, v->digest, fingerprint); cached && cached->size() == v->frames.size()) {
    v->codes = std::move(*cached);
  } else {
    v->codes = v->model.encode_all(v->frames);
    write_codes_cache(cache, v->digest, fingerprint, v->codes);
  }
  if (v->codes.size() >= 3) {
    v->embedding = fit_embedding(v->codes);
    std::vector<std::string> labels(v->codes.size(), entry.video_id);
    v->points = embed_all(v->embedding, v->codes, {}, labels);
  }
  std::shared_ptr<const LoadedVideo> result = v;
  std::lock_guard lock(mutex_);
  loaded_[entry.video_id] = result;
  return result;
}

// ------------------------------------------------------------- HTTP plumbing

namespace {

struct HttpError {
  int status;
  std::string code;
  std::string message;
};

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadImage:
      return 415;
    case ErrorCode::IoError:
    case ErrorCode::CorruptBundle:
      return 500;
    default:
      return 400;
  }
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  res.status = status;
  res.set_content(json{{"code", code}, {"message", message}}.dump(), "application/json");
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_png(httplib::Response& res, const Frame& frame) {
  const auto png = encode_png(frame);
  res.status = 200;
  res.set_content(std::string(png.begin(), png.end()), "image/png");
}

std::string png_b64(const Frame& frame) { return base64_encode(encode_png(frame)); }

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw HttpError{400, "BadRequest", "request body must be a JSON object"};
    return j;
  } catch (const json::parse_error& e) {
    throw HttpError{400, "BadRequest", std::string("malformed JSON: ") + e.what()};
  }
}

// Runs a handler and converts failures into structured JSON errors.
template <typename F>
void guarded(httplib::Response& res, F&& fn) {
  try {
    fn();
  } catch (const HttpError& e) {
    send_error(res, e.status, e.code, e.message);
  } catch (const Error& e) {
    send_error(res, status_for(e.code()), std::string(to_string(e.code())), e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, "BadRequest", std::string("invalid request field: ") + e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "Internal", e.what());
  }
}

int frame_index(const LoadedVideo& v, const json& value, const char* field) {
  if (!value.is_number_integer()) throw HttpError{400, "BadRequest", std::string(field) + " must be an integer"};
  const int id = value.get<int>();
  if (id < 0 || static_cast<size_t>(id) >= v.frames.size())
    throw HttpError{400, "InvalidFrame", std::string(field) + " " + std::to_string(id) + " is out of range"};
  return id;
}

int int_param(const httplib::Request& req, const json& body, const char* name, int fallback) {
  if (body.contains(name)) {
    if (!body.at(name).is_number_integer())
      throw HttpError{400, "BadRequest", std::string(name) + " must be an integer"};
    return body.at(name).get<int>();
  }
  if (req.has_param(name)) {
    try {
      return std::stoi(req.get_param_value(name));
    } catch (const std::exception&) {
      throw HttpError{400, "BadRequest", std::string(name) + " must be an integer"};
    }
  }
  if (req.has_file(name)) {
    try {
      return std::stoi(req.get_file_value(name).content);
    } catch (const std::exception&) {
      throw HttpError{400, "BadRequest", std::string(name) + " must be an integer"};
    }
  }
  return fallback;
}

bool wants_async(const httplib::Request& req, const json& body) {
  if (body.contains("async") && body.at("async").is_boolean()) return body.at("async").get<bool>();
  return req.has_param("async") && req.get_param_value("async") != "0" && req.get_param_value("async") != "false";
}

}  // namespace

// ------------------------------------------------------------- service

Service::Service(ServiceConfig config) : config_(std::move(config)), catalog_(config_.catalog_root) {}

Service::~Service() {
  stop();
  for (auto& t : workers_)
    if (t.joinable()) t.join();
}

std::shared_ptr<Job> Service::start_job(std::function<std::pair<std::string, std::string>(Job&)> work) {
  auto job = std::make_shared<Job>();
  {
    std::lock_guard lock(jobs_mutex_);
    job->id = "job-" + std::to_string(next_job_++);
    jobs_[job->id] = job;
    workers_.emplace_back([job, work = std::move(work)] {
      std::pair<std::string, std::string> result;
      int status = 0;
      try {
        result = work(*job);
      } catch (const Error& e) {
        status = status_for(e.code());
        result = {"application/json", json{{"code", std::string(to_string(e.code()))}, {"message", e.what()}}.dump()};
      } catch (const std::exception& e) {
        status = 500;
        result = {"application/json", json{{"code", "Internal"}, {"message", e.what()}}.dump()};
      }
      std::lock_guard lock(job->mutex);
      job->content_type = std::move(result.first);
      job->body = std::move(result.second);
      job->error_status = status;
      job->progress = 1.0;
      job->state = status == 0 ? 1 : 2;
    });
  }
  return job;
}

std::shared_ptr<Job> Service::find_job(const std::string& id) {
  std::lock_guard lock(jobs_mutex_);
  auto it = jobs_.find(id);
  return it == jobs_.end() ? nullptr : it->second;
}

bool Service::run() {
  server_ = std::make_unique<httplib::Server>();
  server_->new_task_queue = [n = config_.threads] { return new httplib::ThreadPool(static_cast<size_t>(n)); };
  install(*server_);
  return server_->listen(config_.host, config_.port);
}

void Service::stop() {
  if (server_) server_->stop();
}

void Service::install(httplib::Server& server) {
  // Resolves the video of a /videos/{id}/... request or raises 404 / 409.
  auto video = [this](const httplib::Request& req) {
    const std::string id = req.matches[1];
    const auto entry = catalog_.find(id);
    if (!entry) throw HttpError{404, "NotFound", "unknown video '" + id + "'"};
    if (!entry->trained) throw HttpError{409, "Untrained", "video '" + id + "' has no trained bundle"};
    return catalog_.load(*entry);
  };

  server.Get("/videos", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      json arr = json::array();
      for (const auto& e : catalog_.list())
        arr.push_back({{"video_id", e.video_id},
                       {"frame_count", e.frame_count},
                       {"resolution", {e.height, e.width}},
                       {"trained", e.trained}});
      send_json(res, arr);
    });
  });

  server.Get(R"(/videos/([^/]+)/embedding)", [video](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto v = video(req);
      if (!v->embedding.fitted())
        throw HttpError{409, "InsufficientData", "an embedding needs at least 3 frames"};
      json arr = json::array();
      for (const auto& p : v->points)
        arr.push_back({{"frame_id", p.frame_id}, {"x", p.x}, {"y", p.y}, {"source_label", p.source_label}});
      send_json(res, arr);
    });
  });

  server.Post(R"(/videos/([^/]+)/average)", [video](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      const auto v = video(req);
      if (!body.contains("frame_ids") || !body.at("frame_ids").is_array())
        throw HttpError{400, "BadRequest", "frame_ids must be an array"};
      std::vector<int> ids;
      for (const auto& id : body.at("frame_ids")) ids.push_back(frame_index(*v, id, "frame_id"));
      if (ids.empty()) throw HttpError{400, "EmptySelection", "frame_ids is empty"};
      const int iterations = int_param(req, body, "iterations", 0);
      std::vector<LatentCode> subset;
      for (int id : ids) subset.push_back(v->codes[id]);
      const Frame avg = decode_average(v->model, subset, iterations);
      const int mediod = ids[mediod_index(subset)];
      if (req.get_param_value("format") == "json") {
        send_json(res, {{"mediod_frame_id", mediod}, {"image_png_base64", png_b64(avg)}});
      } else {
        send_png(res, avg);
        res.set_header("X-Mediod-Frame-Id", std::to_string(mediod));
      }
    });
  });

  server.Post(R"(/videos/([^/]+)/path)", [this, video](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      const auto v = video(req);
      if (!body.contains("path")) throw HttpError{400, "InvalidPath", "missing path"};
      const PathSpec spec = PathSpec::from_json(body.at("path").dump());
      // Validate before accepting so bad specs fail synchronously.
      if (spec.waypoints.size() < 2) fail(ErrorCode::InvalidPath, "a path needs at least 2 waypoints");
      if (spec.bridge_frames < 0) fail(ErrorCode::InvalidPath, "bridge_frames must be >= 0");
      resolve_waypoints(v->codes, spec.waypoints);
      auto render = [v, spec](Job* job) {
        const auto tex = make_texture(v->model, v->codes, spec, [job](double p) {
          if (job) job->progress = p;
        });
        json frames = json::array();
        for (const auto& f : tex.frames.frames) frames.push_back(png_b64(f));
        return json{{"frame_count", tex.frames.size()}, {"sources", tex.sources}, {"frames_png_base64", frames}}
            .dump();
      };
      if (wants_async(req, body)) {
        auto job = start_job([render](Job& j) { return std::make_pair(std::string("application/json"), render(&j)); });
        send_json(res, {{"job_id", job->id}}, 202);
      } else {
        res.set_content(render(nullptr), "application/json");
      }
    });
  });

  server.Post(R"(/videos/([^/]+)/edit)", [video](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      const auto v = video(req);
      const int id = frame_index(*v, body.value("frame_id", json()), "frame_id");
      const auto edits = PatchEdit::list_from_json(body.value("edits", json::array()).dump());
      for (const auto& e : edits)
        if (e.src_frame_id >= static_cast<int>(v->frames.size()))
          throw HttpError{400, "InvalidRect", "src_frame_id is out of range"};
      const int n = int_param(req, body, "iterations", kDefaultIterations);
      send_png(res, patch_edit_project(v->model, v->frames[id], edits, n, v->frames));
    });
  });

  server.Post(R"(/videos/([^/]+)/superres)", [video](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto v = video(req);
      std::string bytes;
      json body = json::object();
      if (req.is_multipart_form_data()) {
        if (!req.has_file("frame")) throw HttpError{400, "BadRequest", "multipart field 'frame' is required"};
        bytes = req.get_file_value("frame").content;
      } else if (req.get_header_value("Content-Type").rfind("application/json", 0) == 0) {
        body = parse_body(req);
        const auto raw = base64_decode(body.value("frame_png_base64", std::string()));
        bytes.assign(raw.begin(), raw.end());
      } else {
        bytes = req.body;
      }
      const int n = int_param(req, body, "n", kDefaultIterations);
      const Frame low = decode_image(std::span(reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size()));
      send_png(res, spatial_superres(v->model, low, v->manifest.input_height, v->manifest.input_width, n));
    });
  });

  server.Post(R"(/videos/([^/]+)/propagate_mask)", [this, video](const httplib::Request& req,
                                                                  httplib::Response& res) {
    guarded(res, [&] {
      const auto v = video(req);
      json body = json::object();
      std::vector<uint8_t> mask_bytes;
      int start = 0;
      if (req.is_multipart_form_data()) {
        if (!req.has_file("mask")) throw HttpError{400, "BadRequest", "multipart field 'mask' is required"};
        const auto& content = req.get_file_value("mask").content;
        mask_bytes.assign(content.begin(), content.end());
        start = int_param(req, body, "frame_id", 0);
        if (start < 0 || static_cast<size_t>(start) >= v->frames.size())
          throw HttpError{400, "InvalidFrame", "frame_id is out of range"};
      } else {
        body = parse_body(req);
        start = frame_index(*v, body.value("frame_id", json()), "frame_id");
        mask_bytes = base64_decode(body.value("mask_png_base64", std::string()));
      }
      const LabelMap mask = decode_label_png(mask_bytes);
      if (mask.height != v->manifest.input_height || mask.width != v->manifest.input_width)
        throw HttpError{400, "ShapeError", "mask must be " + std::to_string(v->manifest.input_height) + "x" +
                                               std::to_string(v->manifest.input_width)};
      const int radius = int_param(req, body, "search_radius", 16);
      if (radius < 0) fail(ErrorCode::InvalidRadius, "search_radius must be >= 0");
      auto render = [v, start, mask, radius](Job* job) {
        const auto masks = propagate_mask(v->model, std::span(v->frames).subspan(start), mask, radius,
                                          [job](double p) {
                                            if (job) job->progress = p;
                                          });
        json ids = json::array(), pngs = json::array();
        for (size_t i = 0; i < masks.size(); ++i) {
          ids.push_back(start + static_cast<int>(i));
          pngs.push_back(base64_encode(encode_label_png(masks[i])));
        }
        return json{{"frame_ids", ids}, {"masks_png_base64", pngs}}.dump();
      };
      if (wants_async(req, body)) {
        auto job = start_job([render](Job& j) { return std::make_pair(std::string("application/json"), render(&j)); });
        send_json(res, {{"job_id", job->id}}, 202);
      } else {
        res.set_content(render(nullptr), "application/json");
      }
    });
  });

  server.Post(R"(/videos/([^/]+)/interpolate)", [video](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      const auto v = video(req);
      const int a = frame_index(*v, body.value("frame_a", json()), "frame_a");
      const int b = frame_index(*v, body.value("frame_b", json()), "frame_b");
      const int steps = int_param(req, body, "steps", 1);
      if (steps < 1) throw HttpError{400, "InvalidFactor", "steps must be >= 1"};
      const bool endpoints = body.value("include_endpoints", false);
      std::vector<double> alphas;
      if (endpoints) alphas.push_back(1.0);
      for (int j = 1; j <= steps; ++j) alphas.push_back(1.0 - static_cast<double>(j) / (steps + 1));
      if (endpoints) alphas.push_back(0.0);
      json frames = json::array();
      for (double alpha : alphas) frames.push_back(png_b64(interpolate(v->model, v->codes[a], v->codes[b], alpha)));
      send_json(res, {{"alphas", alphas}, {"frames_png_base64", frames}});
    });
  });

  server.Get(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto job = find_job(req.matches[1]);
      if (!job) throw HttpError{404, "NotFound", "unknown job"};
      static const char* kStates[] = {"running", "done", "failed"};
      send_json(res, {{"job_id", job->id}, {"status", kStates[job->state.load()]}, {"progress", job->progress.load()}});
    });
  });

  server.Get(R"(/jobs/([^/]+)/result)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto job = find_job(req.matches[1]);
      if (!job) throw HttpError{404, "NotFound", "unknown job"};
      if (job->state == 0) throw HttpError{409, "Pending", "job is still running"};
      std::lock_guard lock(job->mutex);
      res.status = job->error_status == 0 ? 200 : job->error_status;
      res.set_content(job->body, job->content_type);
    });
  });

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, res.status == 404 ? "NotFound" : "HttpError", "no such endpoint");
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string msg = "unhandled error";
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      msg = e.what();
    } catch (...) {
    }
    send_error(res, 500, "Internal", msg);
  });
}

}  // namespace visa

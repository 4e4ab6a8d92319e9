#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "visa/autoencoder.hpp"
#include "visa/ingest.hpp"
#include "visa/latentops.hpp"

namespace httplib {
class Server;
}

namespace visa {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path catalog_root = "catalog";
  int threads = 4;

  /// Reads an INI file ([server] host/port/catalog_root/threads) when given, then
  /// applies VISA_HOST, VISA_PORT, VISA_CATALOG_ROOT and VISA_THREADS.
  static ServiceConfig load(const std::optional<std::filesystem::path>& ini_path);
};

/// Everything derived from one trained catalog entry. Immutable once built.
struct LoadedVideo {
  std::string video_id;
  std::string digest;
  ModelManifest manifest;
  VideoAutoencoder model;
  std::vector<Frame> frames;  // resized to the training resolution
  std::vector<LatentCode> codes;
  EmbeddingModel embedding;
  std::vector<Point2D> points;
};

/// Catalog layout: <root>/<video_id>/frames/*.png and, once trained,
/// <root>/<video_id>/bundle/{manifest.json,weights.bin}. Latent codes are cached in
/// <root>/<video_id>/bundle/codes.cache, keyed by the weights digest.
class Catalog {
 public:
  explicit Catalog(std::filesystem::path root);

  struct Entry {
    std::string video_id;
    std::filesystem::path bundle_path;
    std::filesystem::path frames_path;
    size_t frame_count = 0;
    int height = 0;
    int width = 0;
    bool trained = false;
  };

  std::vector<Entry> list() const;
  std::optional<Entry> find(const std::string& video_id) const;
  /// Loads (or returns the cached) state for a trained entry. Reloads when the
  /// bundle digest on disk changes.
  std::shared_ptr<const LoadedVideo> load(const Entry& entry);

 private:
  std::filesystem::path root_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const LoadedVideo>> loaded_;
  std::map<std::string, std::unique_ptr<std::mutex>> init_locks_;
};

/// Background job for long renders; polled by id.
struct Job {
  std::string id;
  std::atomic<double> progress{0.0};
  std::atomic<int> state{0};  // 0 running, 1 done, 2 failed
  std::mutex mutex;
  std::string content_type;
  std::string body;
  int error_status = 0;
};

class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Registers every endpoint on the server.
  void install(httplib::Server& server);
  /// Binds and serves until stop() (blocking).
  bool run();
  void stop();

  const ServiceConfig& config() const { return config_; }
  Catalog& catalog() { return catalog_; }

  std::shared_ptr<Job> start_job(std::function<std::pair<std::string, std::string>(Job&)> work);
  std::shared_ptr<Job> find_job(const std::string& id);

 private:
  ServiceConfig config_;
  Catalog catalog_;
  std::unique_ptr<httplib::Server> server_;
  std::mutex jobs_mutex_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::vector<std::thread> workers_;
  uint64_t next_job_ = 1;
};

std::string base64_encode(std::span<const uint8_t> bytes);
std::vector<uint8_t> base64_decode(const std::string& text);

}  // namespace visa

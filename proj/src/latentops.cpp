#include "visa/latentops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "json.hpp"
#include "visa/errors.hpp"
#include "visa/projection.hpp"

namespace visa {

using nlohmann::json;

std::vector<double> flatten(const LatentCode& code) { return {code.values.begin(), code.values.end()}; }

namespace {

void check_uniform(std::span<const LatentCode> codes) {
  for (const auto& c : codes)
    if (!c.same_shape(codes.front())) fail(ErrorCode::ShapeError, "latent codes differ in shape");
}

void orient(Eigen::VectorXd& v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v[arg] < 0) v = -v;
}

}  // namespace

// ------------------------------------------------------------- embedding

EmbeddingModel fit_embedding(std::span<const LatentCode> codes) {
  if (codes.size() < 3) fail(ErrorCode::InsufficientData, "embedding needs at least 3 codes");
  check_uniform(codes);
  const Eigen::Index n = static_cast<Eigen::Index>(codes.size());
  const Eigen::Index d = static_cast<Eigen::Index>(codes.front().size());

  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = codes[i].values[j];
  const Eigen::RowVectorXd mean = X.colwise().mean();
  X.rowwise() -= mean;

  // Exact eigen-decomposition of whichever of the covariance (d x d) or the
  // Gram matrix (n x n) is smaller; both give the same principal directions.
  std::array<Eigen::VectorXd, 2> basis;
  std::array<double, 2> variance{0, 0};
  const double denom = static_cast<double>(n - 1);
  if (d <= n) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X.transpose() * X / denom);
    for (int k = 0; k < 2 && k < d; ++k) {
      basis[k] = es.eigenvectors().col(d - 1 - k);
      variance[k] = std::max(0.0, es.eigenvalues()[d - 1 - k]);
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X * X.transpose() / denom);
    for (int k = 0; k < 2; ++k) {
      const double lambda = std::max(0.0, es.eigenvalues()[n - 1 - k]);
      Eigen::VectorXd v = X.transpose() * es.eigenvectors().col(n - 1 - k);
      const double norm = v.norm();
      variance[k] = lambda;
      if (norm > 1e-12 * std::max(1.0, X.norm()) && lambda > 0) basis[k] = v / norm;
    }
  }
  // Degenerate directions (rank < 2 or d == 1): complete with a deterministic orthonormal vector.
  for (int k = 0; k < 2; ++k) {
    if (basis[k].size() == d) continue;
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Unit(d, j);
      for (int m = 0; m < k; ++m) e -= basis[m].dot(e) * basis[m];
      if (e.norm() > 1e-6) {
        basis[k] = e.normalized();
        break;
      }
    }
    if (basis[k].size() != d) basis[k] = Eigen::VectorXd::Zero(d);
  }
  // Re-orthogonalize the second direction against the first.
  if (basis[1].norm() > 0) {
    basis[1] -= basis[0].dot(basis[1]) * basis[0];
    if (basis[1].norm() > 0) basis[1].normalize();
  }

  EmbeddingModel em;
  em.mean.assign(mean.data(), mean.data() + d);
  for (int k = 0; k < 2; ++k) {
    orient(basis[k]);
    em.basis[k].assign(basis[k].data(), basis[k].data() + d);
    em.explained_variance[k] = variance[k];
  }
  em.channels = codes.front().channels;
  em.height = codes.front().height;
  em.width = codes.front().width;
  em.source_shape = codes.front().source_shape;
  return em;
}

Point2D embed(const EmbeddingModel& em, const LatentCode& code, int frame_id, std::string source_label) {
  if (!em.fitted()) fail(ErrorCode::NotFitted, "embedding has not been fit");
  if (code.size() != em.mean.size()) fail(ErrorCode::ShapeError, "code does not match embedding dimension");
  Point2D p;
  double x = 0, y = 0;
  for (size_t i = 0; i < em.mean.size(); ++i) {
    const double c = code.values[i] - em.mean[i];
    x += c * em.basis[0][i];
    y += c * em.basis[1][i];
  }
  p.x = x;
  p.y = y;
  p.frame_id = frame_id;
  p.source_label = std::move(source_label);
  return p;
}

std::vector<Point2D> embed_all(const EmbeddingModel& em, std::span<const LatentCode> codes,
                               std::span<const int> frame_ids, std::span<const std::string> labels) {
  std::vector<Point2D> out;
  out.reserve(codes.size());
  for (size_t i = 0; i < codes.size(); ++i)
    out.push_back(embed(em, codes[i], i < frame_ids.size() ? frame_ids[i] : static_cast<int>(i),
                        i < labels.size() ? labels[i] : std::string{}));
  return out;
}

LatentCode back_project(const EmbeddingModel& em, double x, double y) {
  if (!em.fitted()) fail(ErrorCode::NotFitted, "embedding has not been fit");
  LatentCode code;
  code.channels = em.channels;
  code.height = em.height;
  code.width = em.width;
  code.source_shape = em.source_shape;
  code.values.resize(em.mean.size());
  for (size_t i = 0; i < em.mean.size(); ++i)
    code.values[i] = static_cast<float>(em.mean[i] + x * em.basis[0][i] + y * em.basis[1][i]);
  return code;
}

std::string points_to_json(std::span<const Point2D> points) {
  json arr = json::array();
  for (const auto& p : points)
    arr.push_back({{"frame_id", p.frame_id}, {"source_label", p.source_label}, {"x", p.x}, {"y", p.y}});
  return arr.dump();
}

// ------------------------------------------------------------- averages and interpolation

LatentCode average_codes(std::span<const LatentCode> codes) {
  if (codes.empty()) fail(ErrorCode::EmptySelection, "cannot average an empty selection");
  check_uniform(codes);
  std::vector<double> acc(codes.front().size(), 0.0);
  for (const auto& c : codes)
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += c.values[i];
  LatentCode out = codes.front();
  const double inv = 1.0 / static_cast<double>(codes.size());
  for (size_t i = 0; i < acc.size(); ++i) out.values[i] = static_cast<float>(acc[i] * inv);
  return out;
}

Frame decode_average(const FrameCodec& codec, std::span<const LatentCode> codes, int iterations) {
  if (iterations < 0) fail(ErrorCode::InvalidIterations, "iterations must be >= 0");
  return iterate_project(codec, codec.decode(average_codes(codes)), iterations);
}

size_t mediod_index(std::span<const LatentCode> codes) {
  const LatentCode mean = average_codes(codes);
  size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < codes.size(); ++i) {
    double d = 0;
    for (size_t j = 0; j < mean.size(); ++j) {
      const double diff = static_cast<double>(codes[i].values[j]) - mean.values[j];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

LatentCode mix_codes(const LatentCode& a, const LatentCode& b, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::InvalidAlpha, "alpha must lie in [0, 1]");
  if (!a.same_shape(b)) fail(ErrorCode::ShapeError, "codes differ in shape");
  LatentCode out = a;
  const float wa = static_cast<float>(alpha), wb = static_cast<float>(1.0 - alpha);
  for (size_t i = 0; i < out.values.size(); ++i) out.values[i] = wa * a.values[i] + wb * b.values[i];
  return out;
}

Frame interpolate(const FrameCodec& codec, const LatentCode& a, const LatentCode& b, double alpha) {
  return codec.decode(mix_codes(a, b, alpha));
}

FrameSequence resample_timeline(const FrameCodec& codec, std::span<const LatentCode> codes, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) fail(ErrorCode::InvalidFactor, "factor must be > 0");
  if (codes.size() < 2) fail(ErrorCode::InsufficientData, "resampling needs at least 2 codes");
  check_uniform(codes);
  const size_t n = codes.size();
  const size_t m = static_cast<size_t>(std::llround(static_cast<double>(n - 1) * factor)) + 1;
  std::vector<Frame> frames;
  frames.reserve(m);
  for (size_t j = 0; j < m; ++j) {
    const double p = m == 1 ? 0.0 : static_cast<double>(j) * static_cast<double>(n - 1) / static_cast<double>(m - 1);
    if (factor < 1.0) {
      frames.push_back(codec.decode(codes[std::min(n - 1, static_cast<size_t>(std::llround(p)))]));
      continue;
    }
    const size_t i0 = std::min(n - 1, static_cast<size_t>(std::floor(p + 1e-9)));
    const double frac = p - static_cast<double>(i0);
    if (i0 + 1 >= n || frac < 1e-9)
      frames.push_back(codec.decode(codes[i0]));
    else
      frames.push_back(interpolate(codec, codes[i0], codes[i0 + 1], 1.0 - frac));
  }
  return FrameSequence::from_frames(std::move(frames));
}

// ------------------------------------------------------------- clustering

namespace {

double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

ClusterResult kmeans_once(const std::vector<std::vector<double>>& data, int K, std::mt19937_64& rng) {
  const size_t n = data.size();
  std::vector<std::vector<double>> centroids;
  centroids.reserve(K);
  std::uniform_int_distribution<size_t> first(0, n - 1);
  centroids.push_back(data[first(rng)]);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centroids.size()) < K) {
    double total = 0;
    for (size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], sqdist(data[i], centroids.back()));
      total += nearest[i];
    }
    size_t pick = 0;
    if (total <= 0) {
      // All points coincide with chosen centres; take the first unused index.
      pick = centroids.size() % n;
    } else {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (pick = 0; pick + 1 < n; ++pick) {
        r -= nearest[pick];
        if (r <= 0 && nearest[pick] > 0) break;
      }
    }
    centroids.push_back(data[pick]);
  }

  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        const double d = sqdist(data[i], centroids[k]);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    std::vector<int> count(K, 0);
    for (auto& c : centroids) std::fill(c.begin(), c.end(), 0.0);
    for (size_t i = 0; i < n; ++i) {
      ++count[assign[i]];
      for (size_t j = 0; j < data[i].size(); ++j) centroids[assign[i]][j] += data[i][j];
    }
    for (int k = 0; k < K; ++k) {
      if (count[k] > 0) {
        for (auto& v : centroids[k]) v /= count[k];
        continue;
      }
      // Empty cluster: move it to the point farthest from its centre.
      size_t far = 0;
      double far_d = -1;
      for (size_t i = 0; i < n; ++i) {
        const double d = sqdist(data[i], centroids[assign[i]]);
        if (count[assign[i]] > 1 && d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --count[assign[far]];
      assign[far] = k;
      count[k] = 1;
      centroids[k] = data[far];
      changed = true;
    }
    if (!changed) break;
  }

  ClusterResult r;
  r.K = K;
  r.assignments = std::move(assign);
  r.centroids = std::move(centroids);
  for (size_t i = 0; i < n; ++i) r.inertia += sqdist(data[i], r.centroids[r.assignments[i]]);
  return r;
}

}  // namespace

void score_purity(ClusterResult& r, std::span<const std::string> labels) {
  const size_t n = r.assignments.size();
  if (labels.size() != n) fail(ErrorCode::ShapeError, "one label per code is required");
  r.cluster_purity.assign(r.K, 0.0);
  r.cluster_size.assign(r.K, 0);
  std::vector<std::map<std::string, int>> counts(r.K);
  for (size_t i = 0; i < n; ++i) {
    ++counts[r.assignments[i]][labels[i]];
    ++r.cluster_size[r.assignments[i]];
  }
  size_t agree = 0;
  for (int k = 0; k < r.K; ++k) {
    int majority = 0;
    for (const auto& [label, c] : counts[k]) majority = std::max(majority, c);
    agree += static_cast<size_t>(majority);
    r.cluster_purity[k] = r.cluster_size[k] > 0 ? static_cast<double>(majority) / r.cluster_size[k] : 0.0;
  }
  r.purity = n > 0 ? static_cast<double>(agree) / static_cast<double>(n) : 0.0;
  std::vector<int> order(r.K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return r.cluster_purity[a] > r.cluster_purity[b]; });
  r.purity_curve.clear();
  r.auc = 0;
  double covered = 0;
  for (int k : order) {
    if (r.cluster_size[k] == 0) continue;
    const double frac = static_cast<double>(r.cluster_size[k]) / static_cast<double>(n);
    covered += frac;
    r.auc += r.cluster_purity[k] * frac;
    r.purity_curve.emplace_back(std::min(1.0, covered), r.cluster_purity[k]);
  }
  if (!r.purity_curve.empty()) r.purity_curve.back().first = 1.0;
}

ClusterResult cluster_vectors(const std::vector<std::vector<double>>& data, std::span<const std::string> labels,
                              int K, uint64_t seed, int restarts) {
  if (K < 1) fail(ErrorCode::InvalidK, "K must be >= 1");
  if (static_cast<size_t>(K) > data.size()) fail(ErrorCode::InvalidK, "K exceeds the number of codes");
  std::mt19937_64 rng(seed);
  ClusterResult best;
  for (int r = 0; r < std::max(1, restarts); ++r) {
    ClusterResult cand = kmeans_once(data, K, rng);
    if (r == 0 || cand.inertia < best.inertia) best = std::move(cand);
  }
  score_purity(best, labels);
  return best;
}

ClusterResult cluster(std::span<const LatentCode> codes, std::span<const std::string> labels, int K, uint64_t seed,
                      int restarts) {
  if (codes.empty()) fail(ErrorCode::InsufficientData, "no codes to cluster");
  check_uniform(codes);
  std::vector<std::vector<double>> data;
  data.reserve(codes.size());
  for (const auto& c : codes) data.push_back(flatten(c));
  return cluster_vectors(data, labels, K, seed, restarts);
}

std::string ClusterResult::to_json() const {
  json curve = json::array();
  for (const auto& [cov, pur] : purity_curve) curve.push_back({{"cumulative_coverage", cov}, {"purity", pur}});
  json j;
  j["K"] = K;
  j["assignments"] = assignments;
  j["cluster_purity"] = cluster_purity;
  j["cluster_size"] = cluster_size;
  j["purity_curve"] = curve;
  j["purity"] = purity;
  j["auc"] = auc;
  j["inertia"] = inertia;
  j["centroids"] = centroids;
  return j.dump();
}

std::string ClusterResult::curve_csv() const {
  std::string out = "cumulative_coverage,purity\n";
  for (const auto& [cov, pur] : purity_curve) out += std::to_string(cov) + "," + std::to_string(pur) + "\n";
  return out;
}

// ------------------------------------------------------------- pixel codes

namespace {

// Bilinear resize of one plane with half-pixel centres (matches resize_bilinear).
void resize_plane(const float* src, int h, int w, int th, int tw, float* dst, size_t dst_stride) {
  const double sy = static_cast<double>(h) / th, sx = static_cast<double>(w) / tw;
  std::vector<int> x0(tw), x1(tw);
  std::vector<float> fx(tw);
  for (int x = 0; x < tw; ++x) {
    const double s = std::max(0.0, (x + 0.5) * sx - 0.5);
    const int i0 = std::min(static_cast<int>(s), w - 1);
    x0[x] = i0;
    x1[x] = std::min(i0 + 1, w - 1);
    fx[x] = static_cast<float>(s - i0);
  }
  for (int y = 0; y < th; ++y) {
    const double s = std::max(0.0, (y + 0.5) * sy - 0.5);
    const int y0 = std::min(static_cast<int>(s), h - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const float fy = static_cast<float>(s - y0);
    for (int x = 0; x < tw; ++x) {
      const float top = src[y0 * w + x0[x]] * (1 - fx[x]) + src[y0 * w + x1[x]] * fx[x];
      const float bot = src[y1 * w + x0[x]] * (1 - fx[x]) + src[y1 * w + x1[x]] * fx[x];
      dst[(static_cast<size_t>(y) * tw + x) * dst_stride] = top * (1 - fy) + bot * fy;
    }
  }
}

}  // namespace

PixelCodeField pixel_codes(const VideoAutoencoder& model, const Frame& frame) {
  const auto acts = model.encoder_activations(frame);
  PixelCodeField field;
  field.height = frame.height;
  field.width = frame.width;
  for (const auto& a : acts) {
    field.dim += a.c;
    field.layer_dims.push_back(a.c);
  }
  field.codes.assign(static_cast<size_t>(field.height) * field.width * field.dim, 0.0f);
  int offset = 0;
  for (const auto& a : acts) {
    for (int c = 0; c < a.c; ++c)
      resize_plane(a.data.data() + static_cast<size_t>(c) * a.h * a.w, a.h, a.w, field.height, field.width,
                   field.codes.data() + offset + c, field.dim);
    offset += a.c;
  }
  return field;
}

FlowField correspond(const PixelCodeField& a, const PixelCodeField& b, int search_radius) {
  if (search_radius < 0) fail(ErrorCode::InvalidRadius, "search radius must be >= 0");
  if (a.height != b.height || a.width != b.width || a.dim != b.dim)
    fail(ErrorCode::ShapeError, "pixel code fields differ in shape");
  const int h = a.height, w = a.width, dim = a.dim;
  const size_t npix = static_cast<size_t>(h) * w;
  std::vector<int> blocks = a.layer_dims.empty() ? std::vector<int>{dim} : a.layer_dims;
  if (blocks != (b.layer_dims.empty() ? std::vector<int>{dim} : b.layer_dims) ||
      std::accumulate(blocks.begin(), blocks.end(), 0) != dim)
    fail(ErrorCode::ShapeError, "pixel code layer layout mismatch");

  // Each block scaled to norm 1/sqrt(L): the dot product is then the mean per-layer
  // cosine. Blocks that are all zero contribute nothing; a pixel with no non-zero
  // block matches nothing.
  const float share = 1.0f / std::sqrt(static_cast<float>(blocks.size()));
  auto normalized = [&](const PixelCodeField& f, std::vector<uint8_t>& ok) {
    std::vector<float> out(f.codes.size(), 0.0f);
    ok.assign(npix, 0);
    for (size_t p = 0; p < npix; ++p) {
      int offset = 0;
      for (int n : blocks) {
        Eigen::Map<const Eigen::VectorXf> v(f.codes.data() + p * dim + offset, n);
        const float norm = v.norm();
        if (norm > 0 && std::isfinite(norm)) {
          Eigen::Map<Eigen::VectorXf>(out.data() + p * dim + offset, n) = v * (share / norm);
          ok[p] = 1;
        }
        offset += n;
      }
    }
    return out;
  };
  std::vector<uint8_t> ok_a, ok_b;
  const auto na = normalized(a, ok_a);
  const auto nb = normalized(b, ok_b);

  // Candidate offsets ordered by displacement so earlier candidates win near-ties.
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -search_radius; dy <= search_radius; ++dy)
    for (int dx = -search_radius; dx <= search_radius; ++dx) offsets.emplace_back(dx, dy);
  std::stable_sort(offsets.begin(), offsets.end(), [](const auto& p, const auto& q) {
    return p.first * p.first + p.second * p.second < q.first * q.first + q.second * q.second;
  });
  constexpr float kTie = 1e-6f;

  FlowField flow;
  flow.height = h;
  flow.width = w;
  flow.dx.assign(npix, 0);
  flow.dy.assign(npix, 0);
  flow.valid.assign(npix, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t p = static_cast<size_t>(y) * w + x;
      if (!ok_a[p]) continue;
      Eigen::Map<const Eigen::VectorXf> va(na.data() + p * dim, dim);
      float best = -2.0f;
      for (const auto& [dx, dy] : offsets) {
        const int qy = y + dy, qx = x + dx;
        if (qy < 0 || qy >= h || qx < 0 || qx >= w) continue;
        const size_t q = static_cast<size_t>(qy) * w + qx;
        if (!ok_b[q]) continue;
        const float s = va.dot(Eigen::Map<const Eigen::VectorXf>(nb.data() + q * dim, dim));
        if (s > best + kTie) {
          best = s;
          flow.dx[p] = dx;
          flow.dy[p] = dy;
          flow.valid[p] = 1;
          if (best >= 1.0f - kTie) break;  // nothing farther can beat it by more than the tie margin
        }
      }
    }
  return flow;
}

std::vector<LabelMap> propagate_mask(const VideoAutoencoder& model, std::span<const Frame> frames,
                                     const LabelMap& mask0, int search_radius,
                                     const std::function<void(double)>& progress) {
  if (search_radius < 0) fail(ErrorCode::InvalidRadius, "search radius must be >= 0");
  if (frames.empty()) fail(ErrorCode::NoFrames, "no frames to propagate through");
  for (const auto& f : frames)
    if (f.height != mask0.height || f.width != mask0.width)
      fail(ErrorCode::ShapeError, "mask dimensions do not match the frames");
  std::vector<LabelMap> masks{mask0};
  masks.reserve(frames.size());
  auto uniform = [](const LabelMap& m) {
    return std::all_of(m.labels.begin(), m.labels.end(), [&](int32_t v) { return v == m.labels.front(); });
  };
  PixelCodeField prev;
  bool have_prev = false;
  for (size_t t = 0; t + 1 < frames.size(); ++t) {
    const LabelMap& cur = masks.back();
    if (uniform(cur)) {
      masks.push_back(cur);
      have_prev = false;
      if (progress) progress(static_cast<double>(t + 1) / static_cast<double>(frames.size() - 1));
      continue;
    }
    if (!have_prev) prev = pixel_codes(model, frames[t]);
    PixelCodeField next = pixel_codes(model, frames[t + 1]);
    const FlowField flow = correspond(next, prev, search_radius);
    LabelMap out(cur.height, cur.width);
    for (int y = 0; y < cur.height; ++y)
      for (int x = 0; x < cur.width; ++x) {
        const size_t p = flow.index(y, x);
        out.at(y, x) = flow.valid[p] ? cur.at(y + flow.dy[p], x + flow.dx[p]) : cur.at(y, x);
      }
    masks.push_back(std::move(out));
    prev = std::move(next);
    have_prev = true;
    if (progress) progress(static_cast<double>(t + 1) / static_cast<double>(frames.size() - 1));
  }
  return masks;
}

double mask_iou(const LabelMap& a, const LabelMap& b, int32_t label) {
  if (a.height != b.height || a.width != b.width) fail(ErrorCode::ShapeError, "masks differ in shape");
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.labels.size(); ++i) {
    const bool pa = a.labels[i] == label, pb = b.labels[i] == label;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace visa

#include "doctest.h"
#include "helpers.hpp"
#include "visa/latentops.hpp"
#include "visa/autoencoder.hpp"
#include "visa/projection.hpp"

using namespace visa;

namespace {

LatentCode code_of(std::vector<float> v, int c = -1, int h = 1, int w = 1) {
  LatentCode code;
  code.channels = c < 0 ? static_cast<int>(v.size()) : c;
  code.height = h;
  code.width = w;
  code.values = std::move(v);
  return code;
}

// Decodes a code by reading its values as a constant image per channel.
struct ToyCodec : FrameCodec {
  LatentCode encode(const Frame& f) const override {
    return code_of({f.at(0, 0, 0), f.at(1, 0, 0), f.at(2, 0, 0)});
  }
  Frame decode(const LatentCode& c) const override {
    Frame f(2, 2);
    for (int ch = 0; ch < 3; ++ch)
      for (int i = 0; i < 4; ++i) f.pixels[ch * 4 + i] = c.values[ch];
    return f;
  }
};

PixelCodeField field_from(const std::vector<Frame>& planes_src, int dim) {
  // Pixel codes taken straight from a multi-channel texture.
  PixelCodeField f;
  f.height = planes_src[0].height;
  f.width = planes_src[0].width;
  f.dim = dim;
  f.codes.resize(static_cast<size_t>(f.height) * f.width * dim);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x)
      for (int d = 0; d < dim; ++d)
        f.codes[(static_cast<size_t>(y) * f.width + x) * dim + d] = planes_src[d / 3].at(d % 3, y, x);
  return f;
}

}  // namespace

TEST_CASE("embedding matches an SVD reference up to the sign convention") {
  const auto ref = test::reference_values()["embedding_codes_7x8"];
  std::vector<LatentCode> codes;
  for (int i = 0; i < 7; ++i) {
    std::vector<float> v;
    for (int d = 0; d < 8; ++d) v.push_back(static_cast<float>(std::sin(0.7 * i + 1.1 * d) + 0.1 * d * i));
    codes.push_back(code_of(v, 4, 1, 2));
  }
  const auto em = fit_embedding(codes);
  const auto pts = embed_all(em, codes);
  for (int i = 0; i < 7; ++i) {
    CHECK(pts[i].x == doctest::Approx(ref[i][0].get<double>()).epsilon(1e-5));
    CHECK(pts[i].y == doctest::Approx(ref[i][1].get<double>()).epsilon(1e-5));
    CHECK(pts[i].frame_id == i);
  }
  CHECK(em.explained_variance[0] >= em.explained_variance[1]);

  // The Gram path (more dimensions than codes) gives the same coordinates.
  std::vector<LatentCode> wide;
  for (int i = 0; i < 4; ++i) {
    std::vector<float> v;
    for (int d = 0; d < 30; ++d) v.push_back(static_cast<float>(std::cos(0.3 * i * d + d)));
    wide.push_back(code_of(v));
  }
  const auto ew = fit_embedding(wide);
  const auto back = back_project(ew, 0.0, 0.0);
  for (size_t d = 0; d < back.size(); ++d) CHECK(back.values[d] == doctest::Approx(ew.mean[d]).epsilon(1e-6));

  CHECK(test::error_of([&] { fit_embedding(std::span(codes).first(2)); }) == ErrorCode::InsufficientData);
  CHECK(test::error_of([&] { embed(EmbeddingModel{}, codes[0]); }) == ErrorCode::NotFitted);
}

TEST_CASE("embedding is deterministic and points serialize") {
  std::vector<LatentCode> codes;
  for (int i = 0; i < 5; ++i) codes.push_back(code_of({float(i), float(i * i), 1.0f}));
  const auto a = embed_all(fit_embedding(codes), codes);
  const auto b = embed_all(fit_embedding(codes), codes);
  CHECK(points_to_json(a) == points_to_json(b));
  CHECK(nlohmann::json::parse(points_to_json(a)).size() == 5);
}

TEST_CASE("averages, mediod and mixing") {
  std::vector<LatentCode> codes{code_of({0, 0, 0}), code_of({1, 1, 1}), code_of({5, 5, 5})};
  const auto avg = average_codes(codes);
  CHECK(avg.values[0] == doctest::Approx(2.0));
  CHECK(mediod_index(codes) == 1);
  CHECK(test::error_of([] { average_codes({}); }) == ErrorCode::EmptySelection);

  ToyCodec codec;
  std::vector<LatentCode> one{code_of({0.2f, 0.4f, 0.6f})};
  CHECK(decode_average(codec, one, 0) == codec.decode(one[0]));
  CHECK(test::error_of([&] { decode_average(codec, one, -1); }) == ErrorCode::InvalidIterations);

  const auto a = code_of({0.1f, 0.2f, 0.3f}), b = code_of({0.9f, 0.8f, 0.7f});
  CHECK(mix_codes(a, b, 1.0) == a);
  CHECK(mix_codes(a, b, 0.0) == b);
  CHECK(mix_codes(a, b, 0.25).values[0] == doctest::Approx(0.25 * 0.1 + 0.75 * 0.9));
  CHECK(test::error_of([&] { mix_codes(a, b, 1.5); }) == ErrorCode::InvalidAlpha);
  CHECK(test::error_of([&] { mix_codes(a, code_of({1, 2}), 0.5); }) == ErrorCode::ShapeError);
  CHECK(interpolate(codec, a, b, 1.0) == codec.decode(a));
}

TEST_CASE("timeline resampling lengths and sample positions") {
  ToyCodec codec;
  std::vector<LatentCode> codes;
  for (int i = 0; i < 5; ++i) codes.push_back(code_of({0.1f * i, 0, 0}));
  const auto x2 = resample_timeline(codec, codes, 2.0);
  CHECK(x2.size() == 9);
  CHECK(x2.frames[1].at(0, 0, 0) == doctest::Approx(0.05));
  CHECK(x2.frames[8].at(0, 0, 0) == doctest::Approx(0.4));
  CHECK(resample_timeline(codec, codes, 1.0).size() == 5);
  const auto half = resample_timeline(codec, codes, 0.5);
  CHECK(half.size() == 3);
  CHECK(half.frames[1].at(0, 0, 0) == doctest::Approx(0.2));
  CHECK(resample_timeline(codec, codes, 1.5).size() == 7);
  CHECK(test::error_of([&] { resample_timeline(codec, codes, 0.0); }) == ErrorCode::InvalidFactor);
  CHECK(test::error_of([&] { resample_timeline(codec, std::span(codes).first(1), 2.0); }) ==
        ErrorCode::InsufficientData);
}

TEST_CASE("k-means recovers separated groups and scores purity") {
  std::vector<LatentCode> codes;
  std::vector<std::string> labels;
  std::mt19937_64 rng(5);
  std::normal_distribution<float> noise(0.0f, 0.1f);
  for (int g = 0; g < 3; ++g)
    for (int i = 0; i < 10; ++i) {
      codes.push_back(code_of({g * 3.0f + noise(rng), (g == 1 ? 4.0f : 0.0f) + noise(rng)}));
      labels.push_back("g" + std::to_string(g));
    }
  const auto r = cluster(codes, labels, 3, 0);
  CHECK(r.purity == doctest::Approx(1.0));
  CHECK(r.auc == doctest::Approx(1.0));
  CHECK(r.purity_curve.back().first == doctest::Approx(1.0));
  CHECK(r.assignments.size() == 30);
  CHECK(cluster(codes, labels, 3, 0).assignments == r.assignments);
  const auto one = cluster(codes, labels, 1, 0);
  CHECK(one.purity == doctest::Approx(1.0 / 3.0));
  CHECK(test::error_of([&] { cluster(codes, labels, 0, 0); }) == ErrorCode::InvalidK);
  CHECK(test::error_of([&] { cluster(codes, labels, 31, 0); }) == ErrorCode::InvalidK);
  CHECK(nlohmann::json::parse(r.to_json()).contains("purity_curve"));
  CHECK(r.curve_csv().rfind("cumulative_coverage,purity\n", 0) == 0);
}

TEST_CASE("purity bookkeeping for a hand-made assignment") {
  ClusterResult r;
  r.K = 2;
  r.assignments = {0, 0, 0, 1, 1, 1, 1, 1};
  const std::vector<std::string> labels{"a", "a", "b", "b", "b", "b", "b", "a"};
  score_purity(r, labels);
  CHECK(r.cluster_purity[0] == doctest::Approx(2.0 / 3.0));
  CHECK(r.cluster_purity[1] == doctest::Approx(0.8));
  CHECK(r.purity == doctest::Approx(6.0 / 8.0));
  REQUIRE(r.purity_curve.size() == 2);
  CHECK(r.purity_curve[0].first == doctest::Approx(5.0 / 8.0));
  CHECK(r.purity_curve[0].second == doctest::Approx(0.8));
  CHECK(r.auc == doctest::Approx(5.0 / 8.0 * 0.8 + 3.0 / 8.0 * 2.0 / 3.0));
}

TEST_CASE("correspondence on identical and translated fields") {
  const Frame t1 = [] {
    Frame f(24, 32);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> u(0.f, 1.f);
    for (auto& v : f.pixels) v = u(rng);
    return f;
  }();
  const Frame t2 = test::random_frame(24, 32, 2);
  const auto a = field_from({t1, t2}, 6);
  const auto flow = correspond(a, a, 4);
  for (size_t i = 0; i < flow.dx.size(); ++i) {
    CHECK(flow.dx[i] == 0);
    CHECK(flow.dy[i] == 0);
  }
  // b(y, x) = a(y, x - 3): pixel (y, x) of a matches (y, x + 3) of b.
  Frame s1(24, 32), s2(24, 32);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 32; ++x) {
        s1.at(c, y, x) = t1.at(c, y, (x + 29) % 32);
        s2.at(c, y, x) = t2.at(c, y, (x + 29) % 32);
      }
  const auto b = field_from({s1, s2}, 6);
  const auto shifted = correspond(a, b, 4);
  int right = 0, total = 0;
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 29; ++x, ++total) right += shifted.dx[shifted.index(y, x)] == 3 && shifted.dy[shifted.index(y, x)] == 0;
  CHECK(right == total);
  CHECK(test::error_of([&] { correspond(a, b, -1); }) == ErrorCode::InvalidRadius);
  auto c = a;
  c.width = 31;
  CHECK(test::error_of([&] { correspond(a, c, 2); }) == ErrorCode::ShapeError);
}

TEST_CASE("correspondence weighs layers equally") {
  // One wide, nearly flat block and one narrow block that carries the position.
  PixelCodeField a;
  a.height = 1;
  a.width = 16;
  a.layer_dims = {40, 2};
  a.dim = 42;
  a.codes.assign(16 * 42, 0.0f);
  for (int x = 0; x < 16; ++x) {
    float* v = a.codes.data() + x * 42;
    for (int d = 0; d < 40; ++d) v[d] = 10.0f + 0.01f * x * (d % 3);
    v[40] = 0.05f * std::cos(0.4f * x);
    v[41] = 0.05f * std::sin(0.4f * x);
  }
  auto b = a;
  for (int x = 0; x < 16; ++x)
    for (int d = 0; d < 42; ++d) b.codes[x * 42 + d] = a.codes[std::min(15, x + 2) * 42 + d];
  const auto flow = correspond(a, b, 4);
  for (int x = 2; x < 12; ++x) CHECK(flow.dx[x] == -2);
  // As one block the wide part dominates and the match collapses onto the tie rule.
  auto flat_a = a, flat_b = b;
  flat_a.layer_dims.clear();
  flat_b.layer_dims.clear();
  CHECK(correspond(flat_a, flat_b, 4).dx[6] != -2);
  auto bad = b;
  bad.layer_dims = {41, 1};
  CHECK(test::error_of([&] { correspond(a, bad, 1); }) == ErrorCode::ShapeError);
  CHECK(pixel_codes(build_model(AutoencoderConfig::with_base(2, 64, 64), 0), Frame(64, 64)).layer_dims ==
        std::vector<int>{2, 4, 8, 16, 24, 24});
}

TEST_CASE("mask IoU") {
  LabelMap a(4, 4, 0), b(4, 4, 0);
  a.at(0, 0) = a.at(0, 1) = 1;
  b.at(0, 1) = b.at(0, 2) = 1;
  CHECK(mask_iou(a, b) == doctest::Approx(1.0 / 3.0));
  CHECK(mask_iou(LabelMap(4, 4, 0), LabelMap(4, 4, 0)) == 1.0);
  CHECK(test::error_of([&] { mask_iou(a, LabelMap(3, 4)); }) == ErrorCode::ShapeError);
}

TEST_CASE("pixel codes and mask propagation with an untrained model") {
  const auto model = build_model(AutoencoderConfig::with_base(2, 64, 64), 3);
  const Frame f = test::random_frame(64, 64, 8);
  const auto field = pixel_codes(model, f);
  CHECK(field.dim == 2 + 4 + 8 + 16 + 24 + 24);
  CHECK(field.height == 64);

  LabelMap mask(64, 64, 0);
  for (int y = 20; y < 30; ++y)
    for (int x = 10; x < 25; ++x) mask.at(y, x) = 1;
  const std::vector<Frame> still{f, f, f};
  const auto masks = propagate_mask(model, still, mask, 3);
  REQUIRE(masks.size() == 3);
  CHECK(masks[2] == mask);

  const auto empty = propagate_mask(model, still, LabelMap(64, 64, 0), 3);
  for (const auto& m : empty) CHECK(m == LabelMap(64, 64, 0));

  std::vector<double> seen;
  propagate_mask(model, still, mask, 2, [&](double p) { seen.push_back(p); });
  CHECK(seen.back() == doctest::Approx(1.0));
  CHECK(test::error_of([&] { propagate_mask(model, still, LabelMap(32, 64), 3); }) == ErrorCode::ShapeError);
  CHECK(test::error_of([&] { propagate_mask(model, still, mask, -2); }) == ErrorCode::InvalidRadius);
}

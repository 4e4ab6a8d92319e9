#include "doctest.h"
#include "helpers.hpp"
#include "visa/frame.hpp"

using namespace visa;

TEST_CASE("bilinear resize matches OpenCV half-pixel sampling") {
  const auto ref = test::reference_values();
  const Frame r = test::ramp(9, 14);
  const Frame up = resize_bilinear(r, 20, 31);
  CHECK(test::max_abs_diff(up.pixels, ref["resize_ramp_9x14_to_20x31"].get<std::vector<double>>()) < 1e-5);
  const Frame down = resize_bilinear(r, 4, 5);
  CHECK(test::max_abs_diff(down.pixels, ref["resize_ramp_9x14_to_4x5"].get<std::vector<double>>()) < 1e-5);
  CHECK(resize_bilinear(r, 9, 14) == r);
  CHECK(test::error_of([&] { resize_bilinear(r, 0, 3); }) == ErrorCode::InvalidTarget);
}

TEST_CASE("mirror padding is centred and reflects without repeating the edge") {
  const auto ref = test::reference_values();
  const Frame r = test::ramp(9, 14);
  const Frame p = pad_mirror(r, 16, 24);
  CHECK(test::max_abs_diff(p.pixels, ref["pad_reflect_ramp_9x14_to_16x24"].get<std::vector<double>>()) == 0.0);
  const Frame z = pad_zero(r, 16, 24);
  CHECK(z.at(0, 0, 0) == 0.0f);
  CHECK(z.at(1, 3, 5) == r.at(1, 0, 0));
  CHECK(test::error_of([&] { pad_mirror(r, 8, 24); }).has_value());
}

TEST_CASE("box downsample averages blocks") {
  Frame f(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) f.at(c, y, x) = static_cast<float>(y * 4 + x);
  const Frame d = box_downsample(f, 2);
  CHECK(d.height == 2);
  CHECK(d.at(0, 0, 0) == doctest::Approx(2.5));
  CHECK(d.at(2, 1, 1) == doctest::Approx(12.5));
  CHECK(test::error_of([&] { box_downsample(f, 3); }).has_value());
}

TEST_CASE("crop, flip, concat, lerp and statistics") {
  const Frame r = test::ramp(8, 10);
  const Frame c = crop(r, {2, 1, 3, 4});
  CHECK(c.height == 4);
  CHECK(c.width == 3);
  CHECK(c.at(1, 0, 0) == r.at(1, 1, 2));
  CHECK(test::error_of([&] { crop(r, {8, 0, 3, 3}); }) == ErrorCode::InvalidRect);

  const Frame f = hflip(r);
  CHECK(f.at(2, 3, 0) == r.at(2, 3, 9));
  CHECK(hflip(f) == r);

  std::vector<Frame> two{r, r};
  CHECK(concat(two, Axis::Horizontal).width == 20);
  CHECK(concat(two, Axis::Vertical).height == 16);
  std::vector<Frame> mismatched{r, test::ramp(8, 11)};
  CHECK(test::error_of([&] { concat(mismatched, Axis::Vertical); }).has_value());

  const Frame zero(8, 10, 0.0f), one(8, 10, 1.0f);
  CHECK(lerp(one, zero, 0.25f).at(0, 0, 0) == doctest::Approx(0.25));
  CHECK(mse(one, zero) == doctest::Approx(1.0));
  CHECK(mean_abs_diff(one, zero) == doctest::Approx(1.0));
  std::vector<Frame> pair{one, zero};
  CHECK(pixel_mean(pair).at(1, 2, 3) == doctest::Approx(0.5));
  CHECK(gradient_energy(one) == 0.0);
  CHECK(gradient_energy(r) > 0.0);
  Frame out_of_range(2, 2, 1.5f);
  CHECK(clamp01(out_of_range).at(0, 0, 0) == 1.0f);
}

TEST_CASE("frame sequences validate their invariants") {
  auto seq = FrameSequence::from_frames({Frame(4, 4), Frame(4, 4)}, "x");
  CHECK(seq.frame_ids == std::vector<int>{0, 1});
  CHECK_NOTHROW(seq.validate());
  seq.frames.push_back(Frame(4, 5));
  seq.frame_ids.push_back(2);
  CHECK(test::error_of([&] { seq.validate(); }) == ErrorCode::ResolutionMismatch);
  auto ids = FrameSequence::from_frames({Frame(4, 4), Frame(4, 4)});
  ids.frame_ids = {1, 1};
  CHECK(test::error_of([&] { ids.validate(); }).has_value());
}

// Python bindings. Images cross the boundary as float32 arrays of shape (H, W, 3)
// in [0, 1]; latent codes as float32 arrays of shape (C, h, w).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "visa/autoencoder.hpp"
#include "visa/errors.hpp"
#include "visa/ingest.hpp"
#include "visa/latentops.hpp"
#include "visa/projection.hpp"
#include "visa/transmit.hpp"

namespace py = pybind11;
using namespace visa;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Frame to_frame(const FloatArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("image must have shape (H, W, 3)");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  Frame f(h, w);
  auto r = a.unchecked<3>();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) f.at(c, y, x) = r(y, x, c);
  return f;
}

FloatArray from_frame(const Frame& f) {
  FloatArray a({f.height, f.width, 3});
  auto w = a.mutable_unchecked<3>();
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x)
      for (int c = 0; c < 3; ++c) w(y, x, c) = f.at(c, y, x);
  return a;
}

FloatArray from_code(const LatentCode& code) {
  FloatArray a({code.channels, code.height, code.width});
  std::copy(code.values.begin(), code.values.end(), a.mutable_data());
  return a;
}

LatentCode to_code(const FloatArray& a) {
  if (a.ndim() != 3) throw py::value_error("code must have shape (C, h, w)");
  LatentCode c;
  c.channels = static_cast<int>(a.shape(0));
  c.height = static_cast<int>(a.shape(1));
  c.width = static_cast<int>(a.shape(2));
  c.values.assign(a.data(), a.data() + a.size());
  c.source_shape = {c.height * kDownsampleFactor, c.width * kDownsampleFactor};
  return c;
}

std::vector<Frame> to_frames(const std::vector<FloatArray>& images) {
  std::vector<Frame> out;
  for (const auto& i : images) out.push_back(to_frame(i));
  return out;
}

// A trained model plus the manifest it came with.
struct Model {
  VideoAutoencoder net;
  ModelManifest manifest;
  std::vector<uint8_t> weights;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Video-specific autoencoders: training, projection, latent operations and transmission";

  static py::exception<Error> visa_error(m, "VisaError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = visa_error;
      py::object inst = err(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(err.ptr(), inst.ptr());
    }
  });

  m.def("load_frames", [](const std::filesystem::path& dir, const std::string& pattern) {
    std::vector<FloatArray> out;
    for (const auto& f : load_frames(dir, pattern).frames) out.push_back(from_frame(f));
    return out;
  }, py::arg("directory"), py::arg("pattern") = "*.png");
  m.def("load_image", [](const std::filesystem::path& p) { return from_frame(load_image(p)); });
  m.def("save_png", [](const FloatArray& img, const std::filesystem::path& p) { save_png(to_frame(img), p); });
  m.def("psnr", [](const FloatArray& a, const FloatArray& b) { return psnr(to_frame(a), to_frame(b)); });
  m.def("ssim", [](const FloatArray& a, const FloatArray& b) { return ssim(to_frame(a), to_frame(b)); });
  m.def("resize_bilinear", [](const FloatArray& img, int h, int w) { return from_frame(resize_bilinear(to_frame(img), h, w)); });
  m.def("box_downsample", [](const FloatArray& img, int factor) { return from_frame(box_downsample(to_frame(img), factor)); });

  py::class_<Model>(m, "Model")
      .def_static("load", [](const std::filesystem::path& bundle) {
        auto b = load_model(bundle);
        return Model{model_from_bundle(b), b.manifest, b.weights};
      }, py::arg("bundle"))
      .def_static("train", [](const std::vector<FloatArray>& images, int k, int height, int width, int epochs,
                              bool hflip, bool multires, uint64_t seed, const std::string& label) {
        auto cfg = AutoencoderConfig::with_base(k, height, width);
        cfg.hflip_augmentation = hflip;
        cfg.multires_augmentation = multires;
        Model out{build_model(cfg, seed), {}, {}};
        TrainConfig tc;
        tc.seed = seed;
        if (epochs > 0) tc.epochs_constant = epochs / 2, tc.epochs_decay = epochs - epochs / 2;
        TrainHistory h;
        {
          py::gil_scoped_release release;
          h = train(out.net, FrameSequence::from_frames(to_frames(images), label), tc);
        }
        auto bundle = make_bundle(out.net, h, {label});
        out.manifest = bundle.manifest;
        out.weights = std::move(bundle.weights);
        return out;
      }, py::arg("frames"), py::arg("k") = 16, py::arg("height") = 128, py::arg("width") = 192,
         py::arg("epochs") = 0, py::arg("hflip") = false, py::arg("multires") = false, py::arg("seed") = 0,
         py::arg("label") = "video")
      .def("save", [](const Model& self, const std::filesystem::path& p) {
        save_model(ModelBundle{self.weights, self.manifest}, p);
      })
      .def_property_readonly("digest", [](const Model& self) { return self.manifest.weights_digest; })
      .def_property_readonly("input_shape", [](const Model& self) {
        return std::make_pair(self.manifest.input_height, self.manifest.input_width);
      })
      .def_property_readonly("manifest", [](const Model& self) { return self.manifest.to_json(); })
      .def("encode", [](const Model& self, const FloatArray& img) { return from_code(self.net.encode(to_frame(img))); })
      .def("decode", [](const Model& self, const FloatArray& code) { return from_frame(self.net.decode(to_code(code))); })
      .def("reconstruct", [](const Model& self, const FloatArray& img) {
        return from_frame(self.net.reconstruct(to_frame(img)));
      })
      .def("project", [](const Model& self, const FloatArray& img, int n) {
        return from_frame(iterate_project(self.net, to_frame(img), n));
      }, py::arg("image"), py::arg("n") = kDefaultIterations)
      .def("superres", [](const Model& self, const FloatArray& low, int n) {
        return from_frame(
            spatial_superres(self.net, to_frame(low), self.manifest.input_height, self.manifest.input_width, n));
      }, py::arg("lowres"), py::arg("n") = kDefaultIterations)
      .def("interpolate", [](const Model& self, const FloatArray& a, const FloatArray& b, double alpha) {
        return from_frame(interpolate(self.net, to_code(a), to_code(b), alpha));
      }, py::arg("code_a"), py::arg("code_b"), py::arg("alpha"))
      .def("average", [](const Model& self, const std::vector<FloatArray>& images, int iterations) {
        std::vector<LatentCode> codes;
        for (const auto& i : images) codes.push_back(self.net.encode(to_frame(i)));
        return from_frame(decode_average(self.net, codes, iterations));
      }, py::arg("frames"), py::arg("iterations") = kDefaultIterations)
      .def("embed", [](const Model& self, const std::vector<FloatArray>& images) {
        std::vector<LatentCode> codes;
        for (const auto& i : images) codes.push_back(self.net.encode(to_frame(i)));
        const auto pts = embed_all(fit_embedding(codes), codes);
        py::array_t<double> out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
        auto w = out.mutable_unchecked<2>();
        for (size_t i = 0; i < pts.size(); ++i) w(i, 0) = pts[i].x, w(i, 1) = pts[i].y;
        return out;
      });

  m.def("encode_packet", [](int frame_index, const FloatArray& lowres, int orig_h, int orig_w,
                            const std::string& digest_hex) {
    const Frame f = to_frame(lowres);
    TransmissionPacket p;
    p.model_digest16 = digest16_from_hex(digest_hex);
    p.frame_index = static_cast<uint32_t>(frame_index);
    p.orig_h = static_cast<uint16_t>(orig_h);
    p.orig_w = static_cast<uint16_t>(orig_w);
    p.payload_h = static_cast<uint16_t>(f.height);
    p.payload_w = static_cast<uint16_t>(f.width);
    for (int y = 0; y < f.height; ++y)
      for (int x = 0; x < f.width; ++x)
        for (int c = 0; c < 3; ++c)
          p.payload.push_back(static_cast<uint8_t>(std::lround(std::clamp(f.at(c, y, x), 0.0f, 1.0f) * 255.0f)));
    const auto bytes = encode_packet(p);
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  });
  m.def("decode_packet", [](const py::bytes& data) {
    const std::string s = data;
    const auto p = decode_packet(std::span(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
    py::dict d;
    d["frame_index"] = p.frame_index;
    d["orig_shape"] = std::make_pair(p.orig_h, p.orig_w);
    d["image"] = from_frame(packet_frame(p));
    return d;
  });
}

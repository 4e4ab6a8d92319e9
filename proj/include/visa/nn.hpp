#pragma once

// Minimal CPU layer library for the autoencoder: im2col convolutions backed
// by Eigen GEMM, batch normalization, pooling and Adam. Activations use a
// channel-major batch layout [C][N][H][W] so that a convolution over a whole
// batch is a single matrix product.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace visa::nn {

template <typename T>
struct Tensor {
  int c = 0;
  int n = 0;
  int h = 0;
  int w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int channels, int batch, int height, int width, T fill = T(0))
      : c(channels), n(batch), h(height), w(width),
        data(static_cast<size_t>(channels) * batch * height * width, fill) {}

  size_t size() const { return data.size(); }
  size_t plane() const { return static_cast<size_t>(h) * w; }
  // Offset of the (channel, sample) plane.
  size_t offset(int ch, int sample) const { return (static_cast<size_t>(ch) * n + sample) * plane(); }
  T* plane_ptr(int ch, int sample) { return data.data() + offset(ch, sample); }
  const T* plane_ptr(int ch, int sample) const { return data.data() + offset(ch, sample); }
};

/// Named view of a trainable (or persistent) parameter block.
template <typename T>
struct ParamRef {
  std::string name;
  std::vector<T>* value = nullptr;
  std::vector<T>* grad = nullptr;  // null for non-trainable state (running statistics)
};

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, bool bias);

  void init(std::mt19937_64& rng);
  // Stateless inference; safe to call concurrently.
  Tensor<T> infer(const Tensor<T>& x) const;
  Tensor<T> forward(const Tensor<T>& x, bool keep_for_backward);
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad);
  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int output_size(int input) const { return (input + 2 * pad_ - kernel_) / stride_ + 1; }

  std::vector<T> weight;  // out x (in * k * k), row-major
  std::vector<T> bias;
  std::vector<T> weight_grad;
  std::vector<T> bias_grad;

 private:
  Tensor<T> run(const Tensor<T>& x, std::vector<T>& cols) const;

  int in_ = 0, out_ = 0, kernel_ = 0, stride_ = 1, pad_ = 0;
  std::vector<T> cols_;
  int in_h_ = 0, in_w_ = 0, batch_ = 0, out_h_ = 0, out_w_ = 0;
};

/// Transposed convolution (the adjoint of a strided Conv2d); with kernel 4,
/// stride 2, pad 1 it exactly doubles each spatial dimension.
template <typename T>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride, int pad, bool bias);

  void init(std::mt19937_64& rng);
  Tensor<T> infer(const Tensor<T>& x) const;
  Tensor<T> forward(const Tensor<T>& x, bool keep_for_backward);
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad);
  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int output_size(int input) const { return (input - 1) * stride_ - 2 * pad_ + kernel_; }

  std::vector<T> weight;  // in x (out * k * k), row-major
  std::vector<T> bias;
  std::vector<T> weight_grad;
  std::vector<T> bias_grad;

 private:
  int in_ = 0, out_ = 0, kernel_ = 0, stride_ = 1, pad_ = 0;
  Tensor<T> input_;
};

template <typename T>
class BatchNorm2d {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels);

  // Normalizes with running statistics.
  Tensor<T> infer(const Tensor<T>& x) const;
  // training=true normalizes with batch statistics and updates running ones.
  Tensor<T> forward(const Tensor<T>& x, bool training);
  Tensor<T> backward(const Tensor<T>& dy);
  void collect(const std::string& prefix, std::vector<ParamRef<T>>& out);

  std::vector<T> gamma, beta, gamma_grad, beta_grad;
  std::vector<T> running_mean, running_var;

 private:
  int channels_ = 0;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

template <typename T>
class ReLU {
 public:
  static void apply(Tensor<T>& x);
  void forward_inplace(Tensor<T>& x, bool keep_for_backward);
  void backward_inplace(Tensor<T>& dy) const;

 private:
  std::vector<T> mask_;  // 1 where the input was positive
};

template <typename T>
class MaxPool2 {
 public:
  static Tensor<T> infer(const Tensor<T>& x);
  Tensor<T> forward(const Tensor<T>& x, bool keep_for_backward);
  Tensor<T> backward(const Tensor<T>& dy) const;

 private:
  std::vector<uint32_t> argmax_;
  int in_c_ = 0, in_n_ = 0, in_h_ = 0, in_w_ = 0;
};

template <typename T>
class Sigmoid {
 public:
  static void apply(Tensor<T>& x);
  void forward_inplace(Tensor<T>& x, bool keep_for_backward);
  void backward_inplace(Tensor<T>& dy) const;

 private:
  std::vector<T> out_;
};

struct AdamOptions {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
class Adam {
 public:
  Adam(std::vector<ParamRef<T>> params, AdamOptions options = {});
  void zero_grad();
  void step(double lr);
  long steps() const { return t_; }

 private:
  std::vector<ParamRef<T>> params_;
  std::vector<std::vector<T>> m_, v_;
  AdamOptions options_;
  long t_ = 0;
};

// im2col over the channel-major batch layout. Rows are (channel, ky, kx),
// columns are (sample, oy, ox); cols is row-major.
template <typename T>
void im2col(const T* x, int channels, int batch, int h, int w, int kernel, int stride, int pad, int out_h,
            int out_w, T* cols);
template <typename T>
void col2im(const T* cols, int channels, int batch, int h, int w, int kernel, int stride, int pad, int out_h,
            int out_w, T* x);

}  // namespace visa::nn

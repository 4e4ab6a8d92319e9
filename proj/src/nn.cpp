#include "visa/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "visa/errors.hpp"

namespace visa::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

// Output columns ox in [lo, hi) read an in-bounds input column for tap kx.
inline void valid_range(int kx, int stride, int pad, int in_w, int out_w, int& lo, int& hi) {
  int num = pad - kx;
  lo = num <= 0 ? 0 : (num + stride - 1) / stride;
  int top = in_w - 1 + pad - kx;
  hi = top < 0 ? 0 : top / stride + 1;
  lo = std::min(lo, out_w);
  hi = std::clamp(hi, lo, out_w);
}

template <typename T>
void uniform_fill(std::vector<T>& v, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& x : v) x = static_cast<T>(dist(rng));
}

// Sequential double-precision sum. Eigen's vectorized reductions peel by
// address alignment, which makes results depend on where buffers land.
template <typename F>
double ordered_sum(Eigen::Index n, F&& f) {
  double s = 0;
  for (Eigen::Index i = 0; i < n; ++i) s += static_cast<double>(f(i));
  return s;
}

}  // namespace

template <typename T>
void im2col(const T* x, int channels, int batch, int h, int w, int kernel, int stride, int pad, int out_h,
            int out_w, T* cols) {
  const size_t row_len = static_cast<size_t>(batch) * out_h * out_w;
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < kernel; ++ky)
      for (int kx = 0; kx < kernel; ++kx) {
        T* row = cols + (static_cast<size_t>(c) * kernel * kernel + ky * kernel + kx) * row_len;
        int lo, hi;
        valid_range(kx, stride, pad, w, out_w, lo, hi);
        for (int s = 0; s < batch; ++s) {
          const T* plane = x + (static_cast<size_t>(c) * batch + s) * h * w;
          for (int oy = 0; oy < out_h; ++oy) {
            T* dst = row + (static_cast<size_t>(s) * out_h + oy) * out_w;
            int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) {
              std::fill(dst, dst + out_w, T(0));
              continue;
            }
            const T* src = plane + static_cast<size_t>(iy) * w;
            std::fill(dst, dst + lo, T(0));
            if (stride == 1) {
              std::copy(src + lo - pad + kx, src + hi - pad + kx, dst + lo);
            } else {
              for (int ox = lo; ox < hi; ++ox) dst[ox] = src[ox * stride - pad + kx];
            }
            std::fill(dst + hi, dst + out_w, T(0));
          }
        }
      }
}

template <typename T>
void col2im(const T* cols, int channels, int batch, int h, int w, int kernel, int stride, int pad, int out_h,
            int out_w, T* x) {
  std::fill(x, x + static_cast<size_t>(channels) * batch * h * w, T(0));
  const size_t row_len = static_cast<size_t>(batch) * out_h * out_w;
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < kernel; ++ky)
      for (int kx = 0; kx < kernel; ++kx) {
        const T* row = cols + (static_cast<size_t>(c) * kernel * kernel + ky * kernel + kx) * row_len;
        int lo, hi;
        valid_range(kx, stride, pad, w, out_w, lo, hi);
        for (int s = 0; s < batch; ++s) {
          T* plane = x + (static_cast<size_t>(c) * batch + s) * h * w;
          for (int oy = 0; oy < out_h; ++oy) {
            int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            const T* src = row + (static_cast<size_t>(s) * out_h + oy) * out_w;
            T* dst = plane + static_cast<size_t>(iy) * w;
            for (int ox = lo; ox < hi; ++ox) dst[ox * stride - pad + kx] += src[ox];
          }
        }
      }
}

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, bool with_bias)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), pad_(pad) {
  weight.assign(static_cast<size_t>(out_) * in_ * kernel_ * kernel_, T(0));
  weight_grad.assign(weight.size(), T(0));
  if (with_bias) {
    bias.assign(out_, T(0));
    bias_grad.assign(out_, T(0));
  }
}

template <typename T>
void Conv2d<T>::init(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_ * kernel_ * kernel_));
  uniform_fill(weight, bound, rng);
  if (!bias.empty()) uniform_fill(bias, bound, rng);
}

template <typename T>
Tensor<T> Conv2d<T>::infer(const Tensor<T>& x) const {
  std::vector<T> cols;
  return run(x, cols);
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, bool keep) {
  Tensor<T> y = run(x, cols_);
  in_h_ = x.h, in_w_ = x.w, batch_ = x.n, out_h_ = y.h, out_w_ = y.w;
  if (!keep) {
    cols_.clear();
    cols_.shrink_to_fit();
  }
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::run(const Tensor<T>& x, std::vector<T>& cols) const {
  if (x.c != in_) fail(ErrorCode::ShapeError, "conv input has " + std::to_string(x.c) + " channels, expected " +
                                                  std::to_string(in_));
  const int oh = output_size(x.h), ow = output_size(x.w);
  if (oh <= 0 || ow <= 0) fail(ErrorCode::ShapeError, "conv input too small");
  const int rows = in_ * kernel_ * kernel_;
  const long cols_n = static_cast<long>(x.n) * oh * ow;
  cols.resize(static_cast<size_t>(rows) * cols_n);
  im2col(x.data.data(), in_, x.n, x.h, x.w, kernel_, stride_, pad_, oh, ow, cols.data());

  Tensor<T> y(out_, x.n, oh, ow);
  MapMat<T> ym(y.data.data(), out_, cols_n);
  ym.noalias() = CMapMat<T>(weight.data(), out_, rows) * CMapMat<T>(cols.data(), rows, cols_n);
  if (!bias.empty())
    for (int o = 0; o < out_; ++o) ym.row(o).array() += bias[o];
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy, bool need_input_grad) {
  const int rows = in_ * kernel_ * kernel_;
  const long cols_n = static_cast<long>(batch_) * out_h_ * out_w_;
  if (cols_.size() != static_cast<size_t>(rows) * cols_n)
    fail(ErrorCode::ShapeError, "conv backward without a kept forward pass");
  CMapMat<T> dym(dy.data.data(), out_, cols_n);
  CMapMat<T> colm(cols_.data(), rows, cols_n);
  MapMat<T>(weight_grad.data(), out_, rows).noalias() += dym * colm.transpose();
  if (!bias.empty())
    for (int o = 0; o < out_; ++o) bias_grad[o] += static_cast<T>(ordered_sum(cols_n, [&](Eigen::Index j) { return dym(o, j); }));
  Tensor<T> dx;
  if (need_input_grad) {
    std::vector<T> dcols(static_cast<size_t>(rows) * cols_n);
    MapMat<T>(dcols.data(), rows, cols_n).noalias() = CMapMat<T>(weight.data(), out_, rows).transpose() * dym;
    dx = Tensor<T>(in_, batch_, in_h_, in_w_);
    col2im(dcols.data(), in_, batch_, in_h_, in_w_, kernel_, stride_, pad_, out_h_, out_w_, dx.data.data());
  }
  return dx;
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  out.push_back({prefix + ".weight", &weight, &weight_grad});
  if (!bias.empty()) out.push_back({prefix + ".bias", &bias, &bias_grad});
}

// ------------------------------------------------------- ConvTranspose2d
//
// Only the kernel 4 / stride 2 / pad 1 geometry is supported. Each output
// parity class (Y % 2, X % 2) then depends on a 2x2 neighbourhood of input
// pixels, so the layer is evaluated as four small GEMMs over gathered input
// taps instead of a full col2im scatter.

namespace {

// For output parity p, the two (input offset, kernel tap) pairs that reach it.
constexpr int kTapOffset[2][2] = {{0, -1}, {1, 0}};
constexpr int kTapIndex[2][2] = {{1, 3}, {0, 2}};

// Gathers rows (c, ty, tx) x columns (s, m, n) of input taps for parity
// (py, px), for samples s in [s0, s1).
template <typename T>
void gather_taps(const Tensor<T>& x, int s0, int s1, int py, int px, T* g) {
  const size_t cols = static_cast<size_t>(s1 - s0) * x.h * x.w;
  for (int c = 0; c < x.c; ++c)
    for (int ty = 0; ty < 2; ++ty)
      for (int tx = 0; tx < 2; ++tx) {
        const int dy = kTapOffset[py][ty], dx = kTapOffset[px][tx];
        T* row = g + ((static_cast<size_t>(c) * 2 + ty) * 2 + tx) * cols;
        const int lo = std::max(0, -dx), hi = std::min(x.w, x.w - dx);
        for (int s = s0; s < s1; ++s) {
          const T* plane = x.plane_ptr(c, s);
          for (int m = 0; m < x.h; ++m) {
            T* dst = row + (static_cast<size_t>(s - s0) * x.h + m) * x.w;
            const int iy = m + dy;
            if (iy < 0 || iy >= x.h) {
              std::fill(dst, dst + x.w, T(0));
              continue;
            }
            const T* src = plane + static_cast<size_t>(iy) * x.w + dx;
            std::fill(dst, dst + lo, T(0));
            std::copy(src + lo, src + hi, dst + lo);
            std::fill(dst + hi, dst + x.w, T(0));
          }
        }
      }
}

// Adjoint of gather_taps: accumulates tap gradients back into dx.
template <typename T>
void scatter_taps(const T* g, int s0, int s1, int py, int px, Tensor<T>& dx) {
  const size_t cols = static_cast<size_t>(s1 - s0) * dx.h * dx.w;
  for (int c = 0; c < dx.c; ++c)
    for (int ty = 0; ty < 2; ++ty)
      for (int tx = 0; tx < 2; ++tx) {
        const int dy = kTapOffset[py][ty], ddx = kTapOffset[px][tx];
        const T* row = g + ((static_cast<size_t>(c) * 2 + ty) * 2 + tx) * cols;
        const int lo = std::max(0, -ddx), hi = std::min(dx.w, dx.w - ddx);
        for (int s = s0; s < s1; ++s) {
          T* plane = dx.plane_ptr(c, s);
          for (int m = 0; m < dx.h; ++m) {
            const int iy = m + dy;
            if (iy < 0 || iy >= dx.h) continue;
            const T* src = row + (static_cast<size_t>(s - s0) * dx.h + m) * dx.w;
            T* dst = plane + static_cast<size_t>(iy) * dx.w + ddx;
            for (int n = lo; n < hi; ++n) dst[n] += src[n];
          }
        }
      }
}

// Parity weight matrix: out x (in * 4), entries W[c, o, ky, kx] for the parity's taps.
template <typename T>
void parity_weights(const std::vector<T>& weight, int in, int out, int py, int px, T* wp) {
  for (int o = 0; o < out; ++o)
    for (int c = 0; c < in; ++c)
      for (int ty = 0; ty < 2; ++ty)
        for (int tx = 0; tx < 2; ++tx)
          wp[static_cast<size_t>(o) * in * 4 + (c * 2 + ty) * 2 + tx] =
              weight[static_cast<size_t>(c) * out * 16 + o * 16 + kTapIndex[py][ty] * 4 + kTapIndex[px][tx]];
}

// Samples per GEMM chunk: enough columns for an efficient product while the
// gathered taps stay cache resident.
inline int chunk_samples(int batch, int h, int w) {
  constexpr long kTargetColumns = 4096;
  const long per = static_cast<long>(h) * w;
  return static_cast<int>(std::clamp<long>(kTargetColumns / std::max<long>(per, 1), 1, batch));
}

}  // namespace

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride, int pad,
                                    bool with_bias)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), pad_(pad) {
  if (kernel != 4 || stride != 2 || pad != 1)
    fail(ErrorCode::InvalidConfig, "transposed conv supports kernel 4, stride 2, pad 1 only");
  weight.assign(static_cast<size_t>(in_) * out_ * kernel_ * kernel_, T(0));
  weight_grad.assign(weight.size(), T(0));
  if (with_bias) {
    bias.assign(out_, T(0));
    bias_grad.assign(out_, T(0));
  }
}

template <typename T>
void ConvTranspose2d<T>::init(std::mt19937_64& rng) {
  // Each output pixel receives in_channels * 4 taps.
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_ * 4));
  uniform_fill(weight, bound, rng);
  if (!bias.empty()) uniform_fill(bias, bound, rng);
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::forward(const Tensor<T>& x, bool keep) {
  Tensor<T> y = infer(x);
  if (keep)
    input_ = x;
  else
    input_ = Tensor<T>();
  return y;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::infer(const Tensor<T>& x) const {
  if (x.c != in_) fail(ErrorCode::ShapeError, "transposed conv input has " + std::to_string(x.c) +
                                                  " channels, expected " + std::to_string(in_));
  Tensor<T> y(out_, x.n, 2 * x.h, 2 * x.w);
  const int chunk = chunk_samples(x.n, x.h, x.w);
  const size_t per = static_cast<size_t>(x.h) * x.w;
  std::vector<T> g(static_cast<size_t>(in_) * 4 * chunk * per), yp(static_cast<size_t>(out_) * chunk * per);
  std::vector<T> wp[4];
  for (int p = 0; p < 4; ++p) {
    wp[p].resize(static_cast<size_t>(out_) * in_ * 4);
    parity_weights(weight, in_, out_, p / 2, p % 2, wp[p].data());
  }
  for (int s0 = 0; s0 < x.n; s0 += chunk) {
    const int s1 = std::min(x.n, s0 + chunk);
    const long cols = static_cast<long>(s1 - s0) * per;
    for (int py = 0; py < 2; ++py)
      for (int px = 0; px < 2; ++px) {
        gather_taps(x, s0, s1, py, px, g.data());
        MapMat<T>(yp.data(), out_, cols).noalias() =
            CMapMat<T>(wp[py * 2 + px].data(), out_, in_ * 4) * CMapMat<T>(g.data(), in_ * 4, cols);
        for (int o = 0; o < out_; ++o) {
          const T b = bias.empty() ? T(0) : bias[o];
          for (int s = s0; s < s1; ++s) {
            T* plane = y.plane_ptr(o, s);
            const T* src = yp.data() + static_cast<size_t>(o) * cols + (s - s0) * per;
            for (int m = 0; m < x.h; ++m) {
              T* dst = plane + static_cast<size_t>(2 * m + py) * y.w + px;
              for (int n = 0; n < x.w; ++n) dst[2 * n] = src[m * x.w + n] + b;
            }
          }
        }
      }
  }
  return y;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::backward(const Tensor<T>& dy, bool need_input_grad) {
  const Tensor<T>& x = input_;
  if (x.data.empty()) fail(ErrorCode::ShapeError, "transposed conv backward without a kept forward pass");
  const int chunk = chunk_samples(x.n, x.h, x.w);
  const size_t per = static_cast<size_t>(x.h) * x.w;
  std::vector<T> g(static_cast<size_t>(in_) * 4 * chunk * per), dyp(static_cast<size_t>(out_) * chunk * per),
      dg(need_input_grad ? static_cast<size_t>(in_) * 4 * chunk * per : 0);
  std::vector<T> wp[4], dwp[4];
  for (int p = 0; p < 4; ++p) {
    wp[p].resize(static_cast<size_t>(out_) * in_ * 4);
    dwp[p].assign(static_cast<size_t>(out_) * in_ * 4, T(0));
    parity_weights(weight, in_, out_, p / 2, p % 2, wp[p].data());
  }
  Tensor<T> dx;
  if (need_input_grad) dx = Tensor<T>(in_, x.n, x.h, x.w);
  for (int s0 = 0; s0 < x.n; s0 += chunk) {
    const int s1 = std::min(x.n, s0 + chunk);
    const long cols = static_cast<long>(s1 - s0) * per;
    for (int py = 0; py < 2; ++py)
      for (int px = 0; px < 2; ++px) {
        for (int o = 0; o < out_; ++o)
          for (int s = s0; s < s1; ++s) {
            const T* plane = dy.plane_ptr(o, s);
            T* dst = dyp.data() + static_cast<size_t>(o) * cols + (s - s0) * per;
            for (int m = 0; m < x.h; ++m) {
              const T* src = plane + static_cast<size_t>(2 * m + py) * dy.w + px;
              for (int n = 0; n < x.w; ++n) dst[m * x.w + n] = src[2 * n];
            }
          }
        gather_taps(x, s0, s1, py, px, g.data());
        CMapMat<T> dym(dyp.data(), out_, cols);
        MapMat<T>(dwp[py * 2 + px].data(), out_, in_ * 4).noalias() +=
            dym * CMapMat<T>(g.data(), in_ * 4, cols).transpose();
        if (!bias.empty())
          for (int o = 0; o < out_; ++o) bias_grad[o] += static_cast<T>(ordered_sum(cols, [&](Eigen::Index j) { return dym(o, j); }));
        if (need_input_grad) {
          MapMat<T>(dg.data(), in_ * 4, cols).noalias() =
              CMapMat<T>(wp[py * 2 + px].data(), out_, in_ * 4).transpose() * dym;
          scatter_taps(dg.data(), s0, s1, py, px, dx);
        }
      }
  }
  for (int py = 0; py < 2; ++py)
    for (int px = 0; px < 2; ++px)
      for (int o = 0; o < out_; ++o)
        for (int c = 0; c < in_; ++c)
          for (int ty = 0; ty < 2; ++ty)
            for (int tx = 0; tx < 2; ++tx)
              weight_grad[static_cast<size_t>(c) * out_ * 16 + o * 16 + kTapIndex[py][ty] * 4 + kTapIndex[px][tx]] +=
                  dwp[py * 2 + px][static_cast<size_t>(o) * in_ * 4 + (c * 2 + ty) * 2 + tx];
  return dx;
}

template <typename T>
void ConvTranspose2d<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  out.push_back({prefix + ".weight", &weight, &weight_grad});
  if (!bias.empty()) out.push_back({prefix + ".bias", &bias, &bias_grad});
}

// ----------------------------------------------------------- BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(int channels)
    : gamma(channels, T(1)),
      beta(channels, T(0)),
      gamma_grad(channels, T(0)),
      beta_grad(channels, T(0)),
      running_mean(channels, T(0)),
      running_var(channels, T(1)),
      channels_(channels) {}

template <typename T>
Tensor<T> BatchNorm2d<T>::infer(const Tensor<T>& x) const {
  if (x.c != channels_) fail(ErrorCode::ShapeError, "batch-norm channel mismatch");
  const size_t m = static_cast<size_t>(x.n) * x.h * x.w;
  Tensor<T> y(x.c, x.n, x.h, x.w);
  for (int c = 0; c < channels_; ++c) {
    const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + kEpsilon));
    const T scale = gamma[c] * inv, shift = beta[c] - gamma[c] * inv * running_mean[c];
    const T* src = x.data.data() + c * m;
    T* dst = y.data.data() + c * m;
    for (size_t i = 0; i < m; ++i) dst[i] = scale * src[i] + shift;
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, bool training) {
  if (!training) return infer(x);
  if (x.c != channels_) fail(ErrorCode::ShapeError, "batch-norm channel mismatch");
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  const Eigen::Index m = static_cast<Eigen::Index>(x.n) * x.h * x.w;
  Tensor<T> y(x.c, x.n, x.h, x.w);
  xhat_ = Tensor<T>(x.c, x.n, x.h, x.w);
  inv_std_.assign(channels_, T(0));
  for (int c = 0; c < channels_; ++c) {
    Eigen::Map<const Arr> src(x.data.data() + c * m, m);
    Eigen::Map<Arr> xh(xhat_.data.data() + c * m, m);
    const T mean = static_cast<T>(ordered_sum(m, [&](Eigen::Index i) { return src[i]; }) / static_cast<double>(m));
    xh = src - mean;
    const double ss = ordered_sum(m, [&](Eigen::Index i) { return static_cast<double>(xh[i]) * xh[i]; });
    const double var = ss / static_cast<double>(m);
    const double unbiased = m > 1 ? ss / static_cast<double>(m - 1) : var;
    running_mean[c] = static_cast<T>((1 - kMomentum) * running_mean[c] + kMomentum * mean);
    running_var[c] = static_cast<T>((1 - kMomentum) * running_var[c] + kMomentum * unbiased);
    const T inv = static_cast<T>(1.0 / std::sqrt(var + kEpsilon));
    inv_std_[c] = inv;
    xh *= inv;
    Eigen::Map<Arr>(y.data.data() + c * m, m) = gamma[c] * xh + beta[c];
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& dy) {
  if (xhat_.data.size() != dy.data.size()) fail(ErrorCode::ShapeError, "batch-norm backward without training forward");
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  const Eigen::Index m = static_cast<Eigen::Index>(dy.n) * dy.h * dy.w;
  Tensor<T> dx(dy.c, dy.n, dy.h, dy.w);
  for (int c = 0; c < channels_; ++c) {
    Eigen::Map<const Arr> g(dy.data.data() + c * m, m);
    Eigen::Map<const Arr> xh(xhat_.data.data() + c * m, m);
    const T sum_g = static_cast<T>(ordered_sum(m, [&](Eigen::Index i) { return g[i]; }));
    const T sum_gx = static_cast<T>(ordered_sum(m, [&](Eigen::Index i) { return static_cast<double>(g[i]) * xh[i]; }));
    gamma_grad[c] += sum_gx;
    beta_grad[c] += sum_g;
    const T scale = gamma[c] * inv_std_[c] / static_cast<T>(m);
    Eigen::Map<Arr>(dx.data.data() + c * m, m) = scale * (static_cast<T>(m) * g - sum_g - xh * sum_gx);
  }
  return dx;
}

template <typename T>
void BatchNorm2d<T>::collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  out.push_back({prefix + ".gamma", &gamma, &gamma_grad});
  out.push_back({prefix + ".beta", &beta, &beta_grad});
  out.push_back({prefix + ".running_mean", &running_mean, nullptr});
  out.push_back({prefix + ".running_var", &running_var, nullptr});
}

// ------------------------------------------------------ pointwise layers

template <typename T>
void ReLU<T>::apply(Tensor<T>& x) {
  Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> a(x.data.data(), static_cast<Eigen::Index>(x.size()));
  a = a.max(T(0));
}

template <typename T>
void ReLU<T>::forward_inplace(Tensor<T>& x, bool keep) {
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::Map<Arr> a(x.data.data(), n);
  if (keep) {
    mask_.resize(x.size());
    Eigen::Map<Arr>(mask_.data(), n) = (a > T(0)).template cast<T>();
  }
  a = a.max(T(0));
}

template <typename T>
void ReLU<T>::backward_inplace(Tensor<T>& dy) const {
  if (mask_.size() != dy.size()) fail(ErrorCode::ShapeError, "relu backward without kept forward pass");
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  const auto n = static_cast<Eigen::Index>(dy.size());
  Eigen::Map<Arr>(dy.data.data(), n) *= Eigen::Map<const Arr>(mask_.data(), n);
}

template <typename T>
Tensor<T> MaxPool2<T>::infer(const Tensor<T>& x) {
  if (x.h % 2 != 0 || x.w % 2 != 0) fail(ErrorCode::ShapeError, "max-pool input must have even dims");
  Tensor<T> y(x.c, x.n, x.h / 2, x.w / 2);
  size_t k = 0;
  for (int c = 0; c < x.c; ++c)
    for (int s = 0; s < x.n; ++s) {
      const T* p = x.plane_ptr(c, s);
      for (int oy = 0; oy < y.h; ++oy)
        for (int ox = 0; ox < y.w; ++ox, ++k) {
          const T* r0 = p + 2 * oy * x.w + 2 * ox;
          const T* r1 = r0 + x.w;
          y.data[k] = std::max(std::max(r0[0], r0[1]), std::max(r1[0], r1[1]));
        }
    }
  return y;
}

template <typename T>
Tensor<T> MaxPool2<T>::forward(const Tensor<T>& x, bool keep) {
  if (!keep) return infer(x);
  if (x.h % 2 != 0 || x.w % 2 != 0) fail(ErrorCode::ShapeError, "max-pool input must have even dims");
  Tensor<T> y(x.c, x.n, x.h / 2, x.w / 2);
  if (keep) argmax_.resize(y.size());
  in_c_ = x.c, in_n_ = x.n, in_h_ = x.h, in_w_ = x.w;
  size_t k = 0;
  for (int c = 0; c < x.c; ++c)
    for (int s = 0; s < x.n; ++s) {
      const T* p = x.plane_ptr(c, s);
      const uint32_t base = static_cast<uint32_t>(x.offset(c, s));
      for (int oy = 0; oy < y.h; ++oy)
        for (int ox = 0; ox < y.w; ++ox, ++k) {
          uint32_t best = static_cast<uint32_t>(2 * oy * x.w + 2 * ox);
          const uint32_t cand[3] = {best + 1, best + static_cast<uint32_t>(x.w),
                                    best + static_cast<uint32_t>(x.w) + 1};
          for (uint32_t idx : cand)
            if (p[idx] > p[best]) best = idx;
          y.data[k] = p[best];
          if (keep) argmax_[k] = base + best;
        }
    }
  return y;
}

template <typename T>
Tensor<T> MaxPool2<T>::backward(const Tensor<T>& dy) const {
  if (argmax_.size() != dy.size()) fail(ErrorCode::ShapeError, "max-pool backward without kept forward pass");
  Tensor<T> dx(in_c_, in_n_, in_h_, in_w_);
  for (size_t k = 0; k < dy.size(); ++k) dx.data[argmax_[k]] += dy.data[k];
  return dx;
}

template <typename T>
void Sigmoid<T>::apply(Tensor<T>& x) {
  for (auto& v : x.data) v = T(1) / (T(1) + std::exp(-v));
}

template <typename T>
void Sigmoid<T>::forward_inplace(Tensor<T>& x, bool keep) {
  for (auto& v : x.data) v = T(1) / (T(1) + std::exp(-v));
  if (keep) out_ = x.data;
}

template <typename T>
void Sigmoid<T>::backward_inplace(Tensor<T>& dy) const {
  if (out_.size() != dy.size()) fail(ErrorCode::ShapeError, "sigmoid backward without kept forward pass");
  for (size_t i = 0; i < dy.size(); ++i) dy.data[i] *= out_[i] * (T(1) - out_[i]);
}

// ------------------------------------------------------------------ Adam

template <typename T>
Adam<T>::Adam(std::vector<ParamRef<T>> params, AdamOptions options) : options_(options) {
  for (auto& p : params)
    if (p.grad) params_.push_back(p);
  for (auto& p : params_) {
    m_.emplace_back(p.value->size(), T(0));
    v_.emplace_back(p.value->size(), T(0));
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) std::fill(p.grad->begin(), p.grad->end(), T(0));
}

template <typename T>
void Adam<T>::step(double lr) {
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const T step = static_cast<T>(lr / c1);
  const T eps = static_cast<T>(options_.epsilon);
  const T sc2 = static_cast<T>(1.0 / std::sqrt(c2));
  for (size_t k = 0; k < params_.size(); ++k) {
    auto& value = *params_[k].value;
    const auto& grad = *params_[k].grad;
    auto& m = m_[k];
    auto& v = v_[k];
    for (size_t i = 0; i < value.size(); ++i) {
      m[i] = static_cast<T>(b1) * m[i] + static_cast<T>(1 - b1) * grad[i];
      v[i] = static_cast<T>(b2) * v[i] + static_cast<T>(1 - b2) * grad[i] * grad[i];
      value[i] -= step * m[i] / (std::sqrt(v[i]) * sc2 + eps);
    }
  }
}

#define VISA_NN_INSTANTIATE(T)                                                                     \
  template struct Tensor<T>;                                                                      \
  template class Conv2d<T>;                                                                       \
  template class ConvTranspose2d<T>;                                                              \
  template class BatchNorm2d<T>;                                                                  \
  template class ReLU<T>;                                                                         \
  template class MaxPool2<T>;                                                                     \
  template class Sigmoid<T>;                                                                      \
  template class Adam<T>;                                                                         \
  template void im2col<T>(const T*, int, int, int, int, int, int, int, int, int, T*);             \
  template void col2im<T>(const T*, int, int, int, int, int, int, int, int, int, T*);

VISA_NN_INSTANTIATE(float)
VISA_NN_INSTANTIATE(double)

}  // namespace visa::nn

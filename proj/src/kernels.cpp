#include "bregnext/kernels.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "bregnext/error.hpp"

namespace bnx {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// Upper bound on im2col scratch (elements); the batch is processed in chunks of whole samples.
constexpr std::size_t kColumnBudget = std::size_t{1} << 22;

std::size_t channels_of(const Shape& s) { return s.empty() ? 1 : s.back(); }

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank)
    throw ShapeError(op, "expected rank " + std::to_string(rank) + ", got " + shape_str(s));
}

template <typename T>
void im2col(const T* input, const ConvGeometry& g, std::size_t channels, std::size_t samples, T* col) {
  const std::size_t row_len = g.kernel_h * g.kernel_w * channels;
  const std::size_t sample_stride = g.in_h * g.in_w * channels;
  for (std::size_t n = 0; n < samples; ++n) {
    const T* img = input + n * sample_stride;
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        T* row = col + ((n * g.out_h + oy) * g.out_w + ox) * row_len;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
          for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
            const auto ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
            T* dst = row + (ky * g.kernel_w + kx) * channels;
            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h) ||
                ix >= static_cast<std::ptrdiff_t>(g.in_w)) {
              std::fill(dst, dst + channels, T(0));
            } else {
              const T* src = img + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * channels;
              std::copy(src, src + channels, dst);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, std::size_t channels, std::size_t samples, T* grad_input) {
  const std::size_t row_len = g.kernel_h * g.kernel_w * channels;
  const std::size_t sample_stride = g.in_h * g.in_w * channels;
  for (std::size_t n = 0; n < samples; ++n) {
    T* img = grad_input + n * sample_stride;
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        const T* row = col + ((n * g.out_h + oy) * g.out_w + ox) * row_len;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
            const auto ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
            const T* src = row + (ky * g.kernel_w + kx) * channels;
            T* dst = img + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * channels;
            for (std::size_t c = 0; c < channels; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }
}

void check_conv_shapes(const Shape& in, const Shape& k) {
  require_rank(in, 4, "conv2d");
  require_rank(k, 4, "conv2d");
  if (in[3] != k[2])
    throw ShapeError("conv2d", "input channels " + std::to_string(in[3]) + " vs kernel " + shape_str(k));
}

}  // namespace

ConvGeometry conv_geometry(std::size_t in_h, std::size_t in_w, std::size_t kernel_h, std::size_t kernel_w,
                           std::size_t stride, Padding padding) {
  if (stride == 0) throw ConfigError("conv2d stride must be positive");
  ConvGeometry g{in_h, in_w, 0, 0, kernel_h, kernel_w, stride, 0, 0};
  if (padding == Padding::Valid) {
    if (kernel_h > in_h || kernel_w > in_w)
      throw ShapeError("conv2d", "kernel " + std::to_string(kernel_h) + "x" + std::to_string(kernel_w) +
                                     " larger than input " + std::to_string(in_h) + "x" + std::to_string(in_w));
    g.out_h = (in_h - kernel_h) / stride + 1;
    g.out_w = (in_w - kernel_w) / stride + 1;
  } else {
    g.out_h = (in_h + stride - 1) / stride;
    g.out_w = (in_w + stride - 1) / stride;
    const std::size_t need_h = (g.out_h - 1) * stride + kernel_h;
    const std::size_t need_w = (g.out_w - 1) * stride + kernel_w;
    const std::size_t pad_h = need_h > in_h ? need_h - in_h : 0;
    const std::size_t pad_w = need_w > in_w ? need_w - in_w : 0;
    if (kernel_h > in_h + pad_h || kernel_w > in_w + pad_w)
      throw ShapeError("conv2d", "kernel larger than padded input");
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  }
  return g;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, std::size_t stride,
                      Padding padding) {
  check_conv_shapes(input.shape(), kernel.shape());
  const std::size_t n = input.dim(0), cin = input.dim(3), cout = kernel.dim(3);
  const ConvGeometry g = conv_geometry(input.dim(1), input.dim(2), kernel.dim(0), kernel.dim(1), stride, padding);
  BasicTensor<T> out(Shape{n, g.out_h, g.out_w, cout});
  const std::size_t positions = g.out_h * g.out_w;
  const std::size_t row_len = g.kernel_h * g.kernel_w * cin;
  const std::size_t per_chunk = std::max<std::size_t>(1, kColumnBudget / std::max<std::size_t>(1, positions * row_len));
  std::vector<T> col(std::min(per_chunk, n) * positions * row_len);
  ConstMatMap<T> w(kernel.raw(), static_cast<Eigen::Index>(row_len), static_cast<Eigen::Index>(cout));
  const std::size_t sample_in = g.in_h * g.in_w * cin;
  for (std::size_t n0 = 0; n0 < n; n0 += per_chunk) {
    const std::size_t nb = std::min(per_chunk, n - n0);
    im2col(input.raw() + n0 * sample_in, g, cin, nb, col.data());
    const auto rows = static_cast<Eigen::Index>(nb * positions);
    ConstMatMap<T> c(col.data(), rows, static_cast<Eigen::Index>(row_len));
    MatMap<T> o(out.raw() + n0 * positions * cout, rows, static_cast<Eigen::Index>(cout));
    o.noalias() = c * w;
  }
  return out;
}

template <typename T>
void conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel, std::size_t stride,
                     Padding padding, const BasicTensor<T>& grad_out, BasicTensor<T>* grad_input,
                     BasicTensor<T>* grad_kernel) {
  check_conv_shapes(input.shape(), kernel.shape());
  const std::size_t n = input.dim(0), cin = input.dim(3), cout = kernel.dim(3);
  const ConvGeometry g = conv_geometry(input.dim(1), input.dim(2), kernel.dim(0), kernel.dim(1), stride, padding);
  if (grad_out.shape() != Shape{n, g.out_h, g.out_w, cout})
    throw ShapeError("conv2d", "gradient " + shape_str(grad_out.shape()) + " does not match output");
  const std::size_t positions = g.out_h * g.out_w;
  const std::size_t row_len = g.kernel_h * g.kernel_w * cin;
  const std::size_t per_chunk = std::max<std::size_t>(1, kColumnBudget / std::max<std::size_t>(1, positions * row_len));
  std::vector<T> col(std::min(per_chunk, n) * positions * row_len);
  ConstMatMap<T> w(kernel.raw(), static_cast<Eigen::Index>(row_len), static_cast<Eigen::Index>(cout));
  const std::size_t sample_in = g.in_h * g.in_w * cin;
  for (std::size_t n0 = 0; n0 < n; n0 += per_chunk) {
    const std::size_t nb = std::min(per_chunk, n - n0);
    const auto rows = static_cast<Eigen::Index>(nb * positions);
    ConstMatMap<T> go(grad_out.raw() + n0 * positions * cout, rows, static_cast<Eigen::Index>(cout));
    if (grad_kernel) {
      im2col(input.raw() + n0 * sample_in, g, cin, nb, col.data());
      ConstMatMap<T> c(col.data(), rows, static_cast<Eigen::Index>(row_len));
      MatMap<T> gk(grad_kernel->raw(), static_cast<Eigen::Index>(row_len), static_cast<Eigen::Index>(cout));
      gk.noalias() += c.transpose() * go;
    }
    if (grad_input) {
      MatMap<T> dc(col.data(), rows, static_cast<Eigen::Index>(row_len));
      dc.noalias() = go * w.transpose();
      col2im_add(col.data(), g, cin, nb, grad_input->raw() + n0 * sample_in);
    }
  }
}

template <typename T>
BasicTensor<T> batch_norm_train(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                                double epsilon, BatchStats& stats) {
  const std::size_t c = channels_of(x.shape());
  if (gamma.size() != c || beta.size() != c)
    throw ShapeError("batch_norm", "gamma/beta length vs " + std::to_string(c) + " channels");
  const std::size_t rows = x.size() / c;
  stats.mean.assign(c, 0.0);
  stats.var.assign(c, 0.0);
  stats.invstd.assign(c, 0.0);
  const T* px = x.raw();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) stats.mean[j] += static_cast<double>(px[r * c + j]);
  for (std::size_t j = 0; j < c; ++j) stats.mean[j] /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      const double d = static_cast<double>(px[r * c + j]) - stats.mean[j];
      stats.var[j] += d * d;
    }
  std::vector<T> scale(c), shift(c);
  for (std::size_t j = 0; j < c; ++j) {
    stats.var[j] /= static_cast<double>(rows);
    stats.invstd[j] = 1.0 / std::sqrt(stats.var[j] + epsilon);
    scale[j] = static_cast<T>(static_cast<double>(gamma[j]) * stats.invstd[j]);
    shift[j] = static_cast<T>(static_cast<double>(beta[j]) - stats.mean[j] * static_cast<double>(gamma[j]) * stats.invstd[j]);
  }
  BasicTensor<T> out(x.shape());
  T* po = out.raw();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) po[r * c + j] = px[r * c + j] * scale[j] + shift[j];
  return out;
}

template <typename T>
BasicTensor<T> batch_norm_infer(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                                const BasicTensor<T>& running_mean, const BasicTensor<T>& running_var,
                                double epsilon) {
  const std::size_t c = channels_of(x.shape());
  if (gamma.size() != c || beta.size() != c || running_mean.size() != c || running_var.size() != c)
    throw ShapeError("batch_norm", "parameter length vs " + std::to_string(c) + " channels");
  std::vector<T> scale(c), shift(c);
  for (std::size_t j = 0; j < c; ++j) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(running_var[j]) + epsilon);
    scale[j] = static_cast<T>(static_cast<double>(gamma[j]) * inv);
    shift[j] = static_cast<T>(static_cast<double>(beta[j]) -
                              static_cast<double>(running_mean[j]) * static_cast<double>(gamma[j]) * inv);
  }
  BasicTensor<T> out(x.shape());
  const std::size_t rows = x.size() / c;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = x[r * c + j] * scale[j] + shift[j];
  return out;
}

template <typename T>
void batch_norm_backward(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BatchStats& stats, Mode mode,
                         const BasicTensor<T>& grad_out, BasicTensor<T>* grad_input, BasicTensor<T>* grad_gamma,
                         BasicTensor<T>* grad_beta) {
  const std::size_t c = channels_of(x.shape());
  const std::size_t rows = x.size() / c;
  std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      const double g = static_cast<double>(grad_out[r * c + j]);
      const double xhat = (static_cast<double>(x[r * c + j]) - stats.mean[j]) * stats.invstd[j];
      sum_g[j] += g;
      sum_gx[j] += g * xhat;
    }
  if (grad_gamma)
    for (std::size_t j = 0; j < c; ++j) (*grad_gamma)[j] += static_cast<T>(sum_gx[j]);
  if (grad_beta)
    for (std::size_t j = 0; j < c; ++j) (*grad_beta)[j] += static_cast<T>(sum_g[j]);
  if (!grad_input) return;
  const double m = static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      const double k = static_cast<double>(gamma[j]) * stats.invstd[j];
      const double g = static_cast<double>(grad_out[r * c + j]);
      if (mode == Mode::Infer) {
        (*grad_input)[r * c + j] += static_cast<T>(k * g);
      } else {
        const double xhat = (static_cast<double>(x[r * c + j]) - stats.mean[j]) * stats.invstd[j];
        (*grad_input)[r * c + j] += static_cast<T>(k * (g - sum_g[j] / m - xhat * sum_gx[j] / m));
      }
    }
}

template <typename T>
void RunningStats<T>::update(const BatchStats& batch, double momentum) {
  for (std::size_t j = 0; j < mean.size(); ++j) {
    mean[j] = static_cast<T>(momentum * static_cast<double>(mean[j]) + (1.0 - momentum) * batch.mean[j]);
    var[j] = static_cast<T>(momentum * static_cast<double>(var[j]) + (1.0 - momentum) * batch.var[j]);
  }
  ++count;
}

template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta, Mode mode,
                          RunningStats<T>& stats, double epsilon, double momentum) {
  if (mode == Mode::Infer) {
    if (stats.count == 0) throw StateError("batch_norm inference before any running statistics were recorded");
    return batch_norm_infer(x, gamma, beta, stats.mean, stats.var, epsilon);
  }
  BatchStats batch;
  auto out = batch_norm_train(x, gamma, beta, epsilon, batch);
  stats.update(batch, momentum);
  return out;
}

template <typename T>
BasicTensor<T> elu(const BasicTensor<T>& x, double a) {
  BasicTensor<T> out(x.shape());
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::Map<const Arr> in(x.raw(), n);
  // Evaluate exp in an Eigen-owned (aligned) buffer: on a mapped buffer the
  // scalar head peeled for alignment makes results depend on the allocation.
  Arr e = in.min(T(0));
  e = e.exp();
  const T* px = x.raw();
  T* po = out.raw();
  const T ta = static_cast<T>(a);
  for (std::size_t i = 0; i < x.size(); ++i) po[i] = px[i] > T(0) ? px[i] : ta * (e[static_cast<Eigen::Index>(i)] - T(1));
  return out;
}

template <typename T>
void elu_backward(const BasicTensor<T>& x, const BasicTensor<T>& y, double a, const BasicTensor<T>& grad_out,
                  BasicTensor<T>& grad_input) {
  const T ta = static_cast<T>(a);
  for (std::size_t i = 0; i < x.size(); ++i)
    grad_input[i] += x[i] > T(0) ? grad_out[i] : grad_out[i] * (y[i] + ta);
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input) {
  require_rank(input.shape(), 4, "global_avg_pool");
  const std::size_t n = input.dim(0), hw = input.dim(1) * input.dim(2), c = input.dim(3);
  if (hw == 0) throw ShapeError("global_avg_pool", "empty spatial extent");
  BasicTensor<T> out(Shape{n, c});
  std::vector<double> acc(c);
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const T* p = input.raw() + s * hw * c;
    for (std::size_t i = 0; i < hw; ++i)
      for (std::size_t j = 0; j < c; ++j) acc[j] += static_cast<double>(p[i * c + j]);
    for (std::size_t j = 0; j < c; ++j) out[s * c + j] = static_cast<T>(acc[j] / static_cast<double>(hw));
  }
  return out;
}

template <typename T>
void global_avg_pool_backward(const Shape& input_shape, const BasicTensor<T>& grad_out, BasicTensor<T>& grad_input) {
  const std::size_t n = input_shape[0], hw = input_shape[1] * input_shape[2], c = input_shape[3];
  const T inv = static_cast<T>(1.0 / static_cast<double>(hw));
  for (std::size_t s = 0; s < n; ++s) {
    T* p = grad_input.raw() + s * hw * c;
    for (std::size_t i = 0; i < hw; ++i)
      for (std::size_t j = 0; j < c; ++j) p[i * c + j] += grad_out[s * c + j] * inv;
  }
}

template <typename T>
BasicTensor<T> avg_pool2x2(const BasicTensor<T>& input) {
  require_rank(input.shape(), 4, "avg_pool2x2");
  const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
  const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
  BasicTensor<T> out(Shape{n, oh, ow, c});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t y1 = std::min(2 * oy + 2, h), x1 = std::min(2 * ox + 2, w);
        const T inv = static_cast<T>(1.0 / static_cast<double>((y1 - 2 * oy) * (x1 - 2 * ox)));
        T* dst = out.raw() + ((s * oh + oy) * ow + ox) * c;
        for (std::size_t y = 2 * oy; y < y1; ++y)
          for (std::size_t x = 2 * ox; x < x1; ++x) {
            const T* src = input.raw() + ((s * h + y) * w + x) * c;
            for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
          }
        for (std::size_t j = 0; j < c; ++j) dst[j] *= inv;
      }
  return out;
}

template <typename T>
void avg_pool2x2_backward(const Shape& input_shape, const BasicTensor<T>& grad_out, BasicTensor<T>& grad_input) {
  const std::size_t n = input_shape[0], h = input_shape[1], w = input_shape[2], c = input_shape[3];
  const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t y1 = std::min(2 * oy + 2, h), x1 = std::min(2 * ox + 2, w);
        const T inv = static_cast<T>(1.0 / static_cast<double>((y1 - 2 * oy) * (x1 - 2 * ox)));
        const T* src = grad_out.raw() + ((s * oh + oy) * ow + ox) * c;
        for (std::size_t y = 2 * oy; y < y1; ++y)
          for (std::size_t x = 2 * ox; x < x1; ++x) {
            T* dst = grad_input.raw() + ((s * h + y) * w + x) * c;
            for (std::size_t j = 0; j < c; ++j) dst[j] += src[j] * inv;
          }
      }
}

template <typename T>
BasicTensor<T> channel_pad(const BasicTensor<T>& input, std::size_t out_channels) {
  const std::size_t c = channels_of(input.shape());
  if (out_channels < c)
    throw ShapeError("channel_pad", "cannot pad " + std::to_string(c) + " channels down to " +
                                        std::to_string(out_channels));
  Shape shape = input.shape();
  shape.back() = out_channels;
  BasicTensor<T> out(shape);
  const std::size_t rows = input.size() / c;
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(input.raw() + r * c, c, out.raw() + r * out_channels);
  return out;
}

template <typename T>
void channel_pad_backward(const BasicTensor<T>& grad_out, BasicTensor<T>& grad_input) {
  const std::size_t c = channels_of(grad_input.shape());
  const std::size_t oc = channels_of(grad_out.shape());
  const std::size_t rows = grad_input.size() / c;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) grad_input[r * c + j] += grad_out[r * oc + j];
}

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias) {
  require_rank(input.shape(), 2, "dense");
  require_rank(weights.shape(), 2, "dense");
  const std::size_t n = input.dim(0), d = input.dim(1), k = weights.dim(1);
  if (weights.dim(0) != d || bias.size() != k)
    throw ShapeError("dense", "input " + shape_str(input.shape()) + ", weights " + shape_str(weights.shape()) +
                                  ", bias " + shape_str(bias.shape()));
  BasicTensor<T> out(Shape{n, k});
  ConstMatMap<T> x(input.raw(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  ConstMatMap<T> w(weights.raw(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
  MatMap<T> y(out.raw(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  y.noalias() = x * w;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] += bias[j];
  return out;
}

template <typename T>
void dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& grad_out,
                    BasicTensor<T>* grad_input, BasicTensor<T>* grad_weights, BasicTensor<T>* grad_bias) {
  const std::size_t n = input.dim(0), d = input.dim(1), k = weights.dim(1);
  ConstMatMap<T> x(input.raw(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  ConstMatMap<T> w(weights.raw(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
  ConstMatMap<T> g(grad_out.raw(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  if (grad_weights) {
    MatMap<T> gw(grad_weights->raw(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
    gw.noalias() += x.transpose() * g;
  }
  if (grad_bias)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < k; ++j) (*grad_bias)[j] += grad_out[i * k + j];
  if (grad_input) {
    MatMap<T> gx(grad_input->raw(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    gx.noalias() += g * w.transpose();
  }
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  const std::size_t k = channels_of(logits.shape());
  const std::size_t rows = logits.size() / k;
  BasicTensor<T> out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* z = logits.raw() + r * k;
    T* p = out.raw() + r * k;
    const double zmax = static_cast<double>(*std::max_element(z, z + k));
    double sum = 0.0;
    std::vector<double> e(k);
    for (std::size_t j = 0; j < k; ++j) sum += e[j] = std::exp(static_cast<double>(z[j]) - zmax);
    for (std::size_t j = 0; j < k; ++j) p[j] = static_cast<T>(e[j] / sum);
  }
  return out;
}

template <typename T>
void softmax_backward(const BasicTensor<T>& probs, const BasicTensor<T>& grad_out, BasicTensor<T>& grad_input) {
  const std::size_t k = channels_of(probs.shape());
  const std::size_t rows = probs.size() / k;
  for (std::size_t r = 0; r < rows; ++r) {
    double dot = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      dot += static_cast<double>(grad_out[r * k + j]) * static_cast<double>(probs[r * k + j]);
    for (std::size_t j = 0; j < k; ++j) {
      const double p = static_cast<double>(probs[r * k + j]);
      grad_input[r * k + j] += static_cast<T>(p * (static_cast<double>(grad_out[r * k + j]) - dot));
    }
  }
}

#define BNX_INSTANTIATE_KERNELS(T)                                                                                  \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, std::size_t, Padding);              \
  template void conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, std::size_t, Padding,                \
                                const BasicTensor<T>&, BasicTensor<T>*, BasicTensor<T>*);                          \
  template BasicTensor<T> batch_norm_train(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
                                           double, BatchStats&);                                                  \
  template BasicTensor<T> batch_norm_infer(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
                                           const BasicTensor<T>&, const BasicTensor<T>&, double);                 \
  template void batch_norm_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BatchStats&, Mode,         \
                                    const BasicTensor<T>&, BasicTensor<T>*, BasicTensor<T>*, BasicTensor<T>*);     \
  template struct RunningStats<T>;                                                                                 \
  template BasicTensor<T> batch_norm(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, Mode,    \
                                     RunningStats<T>&, double, double);                                           \
  template BasicTensor<T> elu(const BasicTensor<T>&, double);                                                      \
  template void elu_backward(const BasicTensor<T>&, const BasicTensor<T>&, double, const BasicTensor<T>&,          \
                             BasicTensor<T>&);                                                                     \
  template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                                                  \
  template void global_avg_pool_backward(const Shape&, const BasicTensor<T>&, BasicTensor<T>&);                    \
  template BasicTensor<T> avg_pool2x2(const BasicTensor<T>&);                                                      \
  template void avg_pool2x2_backward(const Shape&, const BasicTensor<T>&, BasicTensor<T>&);                        \
  template BasicTensor<T> channel_pad(const BasicTensor<T>&, std::size_t);                                         \
  template void channel_pad_backward(const BasicTensor<T>&, BasicTensor<T>&);                                      \
  template BasicTensor<T> dense(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);              \
  template void dense_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,                \
                               BasicTensor<T>*, BasicTensor<T>*, BasicTensor<T>*);                                 \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                                          \
  template void softmax_backward(const BasicTensor<T>&, const BasicTensor<T>&, BasicTensor<T>&);

BNX_INSTANTIATE_KERNELS(float)
BNX_INSTANTIATE_KERNELS(double)

}  // namespace bnx

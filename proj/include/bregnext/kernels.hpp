#pragma once

// Primitive layer kernels on NHWC tensors. Forward functions return fresh
// tensors; backward functions accumulate (+=) into the gradients they are
// handed, any of which may be null when not needed.

#include <cstddef>
#include <vector>

#include "bregnext/tensor.hpp"

namespace bnx {

enum class Padding { Same, Valid };
enum class Mode { Train, Infer };

struct ConvGeometry {
  std::size_t in_h, in_w, out_h, out_w;
  std::size_t kernel_h, kernel_w, stride;
  std::size_t pad_top, pad_left;
};

/// SAME follows the usual convention: out = ceil(in / stride), extra padding
/// on the bottom/right. Throws if the kernel exceeds the (padded) input.
ConvGeometry conv_geometry(std::size_t in_h, std::size_t in_w, std::size_t kernel_h, std::size_t kernel_w,
                           std::size_t stride, Padding padding);

/// Cross-correlation, no bias. input (N,H,W,Cin), kernel (kh,kw,Cin,Cout).
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, std::size_t stride,
                      Padding padding);

template <typename T>
void conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel, std::size_t stride,
                     Padding padding, const BasicTensor<T>& grad_out, BasicTensor<T>* grad_input,
                     BasicTensor<T>* grad_kernel);

/// Per-channel statistics saved by a training-mode forward pass.
struct BatchStats {
  std::vector<double> mean;
  std::vector<double> var;     // biased (1/M)
  std::vector<double> invstd;  // 1 / sqrt(var + eps)
};

template <typename T>
BasicTensor<T> batch_norm_train(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                                double epsilon, BatchStats& stats);

template <typename T>
BasicTensor<T> batch_norm_infer(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                                const BasicTensor<T>& running_mean, const BasicTensor<T>& running_var,
                                double epsilon);

/// stats: those of the forward pass (training mode) or built from the running
/// statistics (inference mode, where mean/invstd are constants).
template <typename T>
void batch_norm_backward(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BatchStats& stats, Mode mode,
                         const BasicTensor<T>& grad_out, BasicTensor<T>* grad_input, BasicTensor<T>* grad_gamma,
                         BasicTensor<T>* grad_beta);

/// Running statistics for a batch-norm layer. count == 0 means never updated.
template <typename T>
struct RunningStats {
  BasicTensor<T> mean;
  BasicTensor<T> var;
  std::size_t count = 0;

  explicit RunningStats(std::size_t channels) : mean(Shape{channels}, T(0)), var(Shape{channels}, T(1)) {}
  /// running = momentum * running + (1 - momentum) * batch
  void update(const BatchStats& batch, double momentum);
};

/// Standalone batch norm. Train mode normalises with batch statistics and
/// updates stats; infer mode requires stats.count > 0.
template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta, Mode mode,
                          RunningStats<T>& stats, double epsilon = 1e-5, double momentum = 0.99);

template <typename T>
BasicTensor<T> elu(const BasicTensor<T>& x, double a = 1.0);

/// Uses the forward output: d/dx = 1 for x > 0, y + a otherwise.
template <typename T>
void elu_backward(const BasicTensor<T>& x, const BasicTensor<T>& y, double a, const BasicTensor<T>& grad_out,
                  BasicTensor<T>& grad_input);

/// (N,H,W,C) -> (N,C)
template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input);

template <typename T>
void global_avg_pool_backward(const Shape& input_shape, const BasicTensor<T>& grad_out, BasicTensor<T>& grad_input);

/// 2x2 window, stride 2, output ceil(H/2) x ceil(W/2); edge windows average the pixels they cover.
template <typename T>
BasicTensor<T> avg_pool2x2(const BasicTensor<T>& input);

template <typename T>
void avg_pool2x2_backward(const Shape& input_shape, const BasicTensor<T>& grad_out, BasicTensor<T>& grad_input);

/// Appends zero channels up to out_channels.
template <typename T>
BasicTensor<T> channel_pad(const BasicTensor<T>& input, std::size_t out_channels);

template <typename T>
void channel_pad_backward(const BasicTensor<T>& grad_out, BasicTensor<T>& grad_input);

/// (N,D) x (D,K) + (K)
template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias);

template <typename T>
void dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& grad_out,
                    BasicTensor<T>* grad_input, BasicTensor<T>* grad_weights, BasicTensor<T>* grad_bias);

/// Row-wise over the last dimension.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

template <typename T>
void softmax_backward(const BasicTensor<T>& probs, const BasicTensor<T>& grad_out, BasicTensor<T>& grad_input);

}  // namespace bnx

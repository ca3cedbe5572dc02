#pragma once

#include <cstddef>
#include <vector>

#include "e2emd/nn/tensor.hpp"

namespace e2emd::nn {

// Which implementation runs a kernel. `reference` is the plain serial loop
// nest kept as the ground truth; `parallel` is the im2col + blocked GEMM path
// with OpenMP work sharing. The two agree within 1e-5 elementwise.
enum class Exec { reference, parallel };

// C[M x N] (+)= A[M x K] * B[K x N], all row-major with leading dimensions.
// Each C element accumulates k = 0..K-1 in order regardless of thread count.
template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
          std::size_t ldc, bool accumulate, Exec exec = Exec::parallel);

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst);

// input N x C x H x W, kernel O x C x Kh x Kw, bias O. Cross-correlation
// (no kernel flip), symmetric zero padding.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>& bias,
                              std::size_t stride, std::size_t padding, Exec exec = Exec::parallel);

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;  // empty unless requested
  BasicTensor<T> kernel;
  BasicTensor<T> bias;
};

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>& grad_out,
                             std::size_t stride, std::size_t padding, bool need_input_grad,
                             Exec exec = Exec::parallel);

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  // Flat input index of each output's winner; ties go to the first element
  // in row-major window order.
  std::vector<std::size_t> argmax;
};

template <typename T>
PoolResult<T> maxpool2d_forward(const BasicTensor<T>& input, std::size_t window, std::size_t stride,
                                Exec exec = Exec::parallel);

template <typename T>
BasicTensor<T> maxpool2d_backward(const BasicTensor<T>& grad_out, const std::vector<std::size_t>& argmax,
                                  const Shape& input_shape);

// input N x F, weights F x G, bias G -> N x G.
template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias,
                             Exec exec = Exec::parallel);

template <typename T>
struct DenseGrads {
  BasicTensor<T> input;  // empty unless requested
  BasicTensor<T> weights;
  BasicTensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& grad_out,
                             bool need_input_grad, Exec exec = Exec::parallel);

// N x (H x W planes) nearest-neighbour upsampling and its adjoint.
template <typename T>
BasicTensor<T> upsample2d_forward(const BasicTensor<T>& input, std::size_t factor);
template <typename T>
BasicTensor<T> upsample2d_backward(const BasicTensor<T>& grad_out, std::size_t factor);

// Row-wise softmax of N x C logits with max subtraction.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

// Mean over the batch of -ln(max(p_true, 1e-12)). Throws IndexError for a
// label outside [0, C).
template <typename T>
T cross_entropy_loss(const BasicTensor<T>& probs, const std::vector<int>& labels);

}  // namespace e2emd::nn

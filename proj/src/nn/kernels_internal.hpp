#pragma once

// Implementation-side declarations shared by the dispatching front end
// (kernels.cpp) and the two back ends.

#include <cstddef>
#include <vector>

namespace e2emd::nn::detail {

struct ConvGeometry {
  std::size_t batch, in_c, in_h, in_w;
  std::size_t out_c, k_h, k_w;
  std::size_t stride, padding;
  std::size_t out_h, out_w;
};

namespace ref {

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
          std::size_t ldc, bool accumulate);

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* kernel, const T* bias, T* out);

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* in, const T* kernel, const T* grad_out, T* grad_in,
                     T* grad_kernel, T* grad_bias);

template <typename T>
void dense_forward(std::size_t n, std::size_t f, std::size_t g, const T* in, const T* w, const T* b, T* out);

template <typename T>
void dense_backward(std::size_t n, std::size_t f, std::size_t g, const T* in, const T* w, const T* grad_out,
                    T* grad_in, T* grad_w, T* grad_b);

}  // namespace ref

namespace par {

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
          std::size_t ldc, bool accumulate);

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* kernel, const T* bias, T* out);

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* in, const T* kernel, const T* grad_out, T* grad_in,
                     T* grad_kernel, T* grad_bias);

template <typename T>
void dense_forward(std::size_t n, std::size_t f, std::size_t g, const T* in, const T* w, const T* b, T* out);

template <typename T>
void dense_backward(std::size_t n, std::size_t f, std::size_t g, const T* in, const T* w, const T* grad_out,
                    T* grad_in, T* grad_w, T* grad_b);

}  // namespace par

}  // namespace e2emd::nn::detail

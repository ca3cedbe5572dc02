// Serial reference kernels: direct loop nests, no blocking, no threads.

#include <algorithm>

#include "kernels_internal.hpp"

namespace e2emd::nn::detail::ref {

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
          std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = accumulate ? c[i * ldc + j] : T{0};
      for (std::size_t p = 0; p < k; ++p) acc += a[i * lda + p] * b[p * ldb + j];
      c[i * ldc + j] = acc;
    }
  }
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* kernel, const T* bias, T* out) {
  const long pad = static_cast<long>(g.padding);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_c; ++o) {
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          T acc = bias[o];
          for (std::size_t c = 0; c < g.in_c; ++c) {
            for (std::size_t ky = 0; ky < g.k_h; ++ky) {
              const long iy = static_cast<long>(oy * g.stride + ky) - pad;
              if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
              for (std::size_t kx = 0; kx < g.k_w; ++kx) {
                const long ix = static_cast<long>(ox * g.stride + kx) - pad;
                if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
                acc += in[((n * g.in_c + c) * g.in_h + iy) * g.in_w + ix] *
                       kernel[((o * g.in_c + c) * g.k_h + ky) * g.k_w + kx];
              }
            }
          }
          out[((n * g.out_c + o) * g.out_h + oy) * g.out_w + ox] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* in, const T* kernel, const T* grad_out, T* grad_in,
                     T* grad_kernel, T* grad_bias) {
  const long pad = static_cast<long>(g.padding);
  const std::size_t in_size = g.batch * g.in_c * g.in_h * g.in_w;
  if (grad_in) std::fill(grad_in, grad_in + in_size, T{0});
  std::fill(grad_kernel, grad_kernel + g.out_c * g.in_c * g.k_h * g.k_w, T{0});
  std::fill(grad_bias, grad_bias + g.out_c, T{0});
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_c; ++o) {
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const T go = grad_out[((n * g.out_c + o) * g.out_h + oy) * g.out_w + ox];
          grad_bias[o] += go;
          for (std::size_t c = 0; c < g.in_c; ++c) {
            for (std::size_t ky = 0; ky < g.k_h; ++ky) {
              const long iy = static_cast<long>(oy * g.stride + ky) - pad;
              if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
              for (std::size_t kx = 0; kx < g.k_w; ++kx) {
                const long ix = static_cast<long>(ox * g.stride + kx) - pad;
                if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
                const std::size_t ii = ((n * g.in_c + c) * g.in_h + iy) * g.in_w + ix;
                const std::size_t ki = ((o * g.in_c + c) * g.k_h + ky) * g.k_w + kx;
                grad_kernel[ki] += go * in[ii];
                if (grad_in) grad_in[ii] += go * kernel[ki];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void dense_forward(std::size_t n, std::size_t f, std::size_t g, const T* in, const T* w, const T* b, T* out) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < g; ++j) {
      T acc = b[j];
      for (std::size_t p = 0; p < f; ++p) acc += in[i * f + p] * w[p * g + j];
      out[i * g + j] = acc;
    }
  }
}

template <typename T>
void dense_backward(std::size_t n, std::size_t f, std::size_t g, const T* in, const T* w, const T* grad_out,
                    T* grad_in, T* grad_w, T* grad_b) {
  for (std::size_t j = 0; j < g; ++j) {
    T acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += grad_out[i * g + j];
    grad_b[j] = acc;
  }
  for (std::size_t p = 0; p < f; ++p) {
    for (std::size_t j = 0; j < g; ++j) {
      T acc = 0;
      for (std::size_t i = 0; i < n; ++i) acc += in[i * f + p] * grad_out[i * g + j];
      grad_w[p * g + j] = acc;
    }
  }
  if (grad_in) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t p = 0; p < f; ++p) {
        T acc = 0;
        for (std::size_t j = 0; j < g; ++j) acc += grad_out[i * g + j] * w[p * g + j];
        grad_in[i * f + p] = acc;
      }
    }
  }
}

#define E2EMD_INSTANTIATE(T)                                                                                        \
  template void gemm<T>(std::size_t, std::size_t, std::size_t, const T*, std::size_t, const T*, std::size_t, T*,    \
                        std::size_t, bool);                                                                         \
  template void conv2d_forward<T>(const ConvGeometry&, const T*, const T*, const T*, T*);                           \
  template void conv2d_backward<T>(const ConvGeometry&, const T*, const T*, const T*, T*, T*, T*);                  \
  template void dense_forward<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, const T*, T*);          \
  template void dense_backward<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, const T*, T*, T*, T*);

E2EMD_INSTANTIATE(float)
E2EMD_INSTANTIATE(double)

#undef E2EMD_INSTANTIATE

}  // namespace e2emd::nn::detail::ref

// OpenMP kernels: convolutions lowered to im2col + register-tiled GEMM.

#include <algorithm>
#include <vector>

#include "e2emd/nn/kernels.hpp"
#include "kernels_internal.hpp"

namespace e2emd::nn::detail::par {

namespace {

template <typename T>
constexpr std::size_t kTileRows = 4;
template <typename T>
constexpr std::size_t kTileCols = 128 / sizeof(T);

constexpr std::size_t kDepthBlock = 256;

// im2col buffers are capped at roughly this many elements; larger batches
// are processed in sample chunks.
constexpr std::size_t kColBudget = std::size_t{1} << 24;

template <typename T>
inline void tile_full(std::size_t k, const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc,
                      bool accumulate) {
  constexpr std::size_t MR = kTileRows<T>;
  constexpr std::size_t NR = kTileCols<T>;
  T acc[MR][NR];
  for (std::size_t r = 0; r < MR; ++r)
    for (std::size_t j = 0; j < NR; ++j) acc[r][j] = accumulate ? c[r * ldc + j] : T{0};
  for (std::size_t p = 0; p < k; ++p) {
    const T* brow = b + p * ldb;
    for (std::size_t r = 0; r < MR; ++r) {
      const T ar = a[r * lda + p];
      for (std::size_t j = 0; j < NR; ++j) acc[r][j] += ar * brow[j];
    }
  }
  for (std::size_t r = 0; r < MR; ++r)
    for (std::size_t j = 0; j < NR; ++j) c[r * ldc + j] = acc[r][j];
}

template <typename T>
inline void tile_edge(std::size_t mr, std::size_t nr, std::size_t k, const T* a, std::size_t lda, const T* b,
                      std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  constexpr std::size_t NR = kTileCols<T>;
  T acc[NR];
  for (std::size_t r = 0; r < mr; ++r) {
    for (std::size_t j = 0; j < nr; ++j) acc[j] = accumulate ? c[r * ldc + j] : T{0};
    for (std::size_t p = 0; p < k; ++p) {
      const T ar = a[r * lda + p];
      const T* brow = b + p * ldb;
      for (std::size_t j = 0; j < nr; ++j) acc[j] += ar * brow[j];
    }
    for (std::size_t j = 0; j < nr; ++j) c[r * ldc + j] = acc[j];
  }
}

// col[(c*Kh + ky)*Kw + kx][local_n*P + oy*OW + ox] for samples [n0, n0+nb).
template <typename T>
void im2col(const ConvGeometry& g, const T* in, std::size_t n0, std::size_t nb, T* col) {
  const std::size_t plane = g.out_h * g.out_w;
  const std::size_t width = nb * plane;
  const long pad = static_cast<long>(g.padding);
  const long rows = static_cast<long>(g.in_c * g.k_h * g.k_w);
#pragma omp parallel for schedule(static)
  for (long row = 0; row < rows; ++row) {
    const std::size_t kx = row % g.k_w;
    const std::size_t ky = (row / g.k_w) % g.k_h;
    const std::size_t c = row / (g.k_w * g.k_h);
    T* dst = col + row * width;
    for (std::size_t ln = 0; ln < nb; ++ln) {
      const T* src = in + ((n0 + ln) * g.in_c + c) * g.in_h * g.in_w;
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        const long iy = static_cast<long>(oy * g.stride + ky) - pad;
        T* out = dst + ln * plane + oy * g.out_w;
        if (iy < 0 || iy >= static_cast<long>(g.in_h)) {
          std::fill(out, out + g.out_w, T{0});
          continue;
        }
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const long ix = static_cast<long>(ox * g.stride + kx) - pad;
          out[ox] = (ix < 0 || ix >= static_cast<long>(g.in_w)) ? T{0} : src[iy * g.in_w + ix];
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add col back into grad_in for samples [n0, n0+nb).
template <typename T>
void col2im(const ConvGeometry& g, const T* col, std::size_t n0, std::size_t nb, T* grad_in) {
  const std::size_t plane = g.out_h * g.out_w;
  const std::size_t width = nb * plane;
  const long pad = static_cast<long>(g.padding);
  // Parallel over (sample, channel) so no two threads touch the same plane.
  const long jobs = static_cast<long>(nb * g.in_c);
#pragma omp parallel for schedule(static)
  for (long job = 0; job < jobs; ++job) {
    const std::size_t ln = job / g.in_c;
    const std::size_t c = job % g.in_c;
    T* dst = grad_in + ((n0 + ln) * g.in_c + c) * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.k_h; ++ky) {
      for (std::size_t kx = 0; kx < g.k_w; ++kx) {
        const T* src = col + ((c * g.k_h + ky) * g.k_w + kx) * width + ln * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - pad;
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - pad;
            if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
            dst[iy * g.in_w + ix] += src[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

std::size_t chunk_samples(const ConvGeometry& g) {
  const std::size_t per_sample = g.in_c * g.k_h * g.k_w * g.out_h * g.out_w;
  return std::clamp<std::size_t>(kColBudget / std::max<std::size_t>(per_sample, 1), 1, g.batch);
}

}  // namespace

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
          std::size_t ldc, bool accumulate) {
  constexpr std::size_t MR = kTileRows<T>;
  constexpr std::size_t NR = kTileCols<T>;
  const long col_tiles = static_cast<long>((n + NR - 1) / NR);
  // Column tiles are independent. Within a tile, K is walked in blocks so the
  // B panel stays in cache while every row block of A streams past it; each
  // C element still accumulates k = 0..K-1 in order.
#pragma omp parallel for schedule(static)
  for (long jt = 0; jt < col_tiles; ++jt) {
    const std::size_t j0 = static_cast<std::size_t>(jt) * NR;
    const std::size_t nr = std::min(NR, n - j0);
    for (std::size_t k0 = 0; k0 < k || k0 == 0; k0 += kDepthBlock) {
      const std::size_t kc = std::min(kDepthBlock, k - k0);
      const bool acc = accumulate || k0 > 0;
      for (std::size_t i0 = 0; i0 < m; i0 += MR) {
        const std::size_t mr = std::min(MR, m - i0);
        const T* ab = a + i0 * lda + k0;
        const T* bb = b + k0 * ldb + j0;
        T* cb = c + i0 * ldc + j0;
        if (mr == MR && nr == NR) {
          tile_full(kc, ab, lda, bb, ldb, cb, ldc, acc);
        } else {
          tile_edge(mr, nr, kc, ab, lda, bb, ldb, cb, ldc, acc);
        }
      }
      if (k == 0) break;
    }
  }
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* in, const T* kernel, const T* bias, T* out) {
  const std::size_t plane = g.out_h * g.out_w;
  const std::size_t ckk = g.in_c * g.k_h * g.k_w;
  const std::size_t chunk = chunk_samples(g);
  std::vector<T> col(ckk * chunk * plane);
  std::vector<T> tmp(g.out_c * chunk * plane);
  for (std::size_t n0 = 0; n0 < g.batch; n0 += chunk) {
    const std::size_t nb = std::min(chunk, g.batch - n0);
    const std::size_t width = nb * plane;
    im2col(g, in, n0, nb, col.data());
    gemm(g.out_c, width, ckk, kernel, ckk, col.data(), width, tmp.data(), width, false);
    const long jobs = static_cast<long>(nb * g.out_c);
#pragma omp parallel for schedule(static)
    for (long job = 0; job < jobs; ++job) {
      const std::size_t ln = job / g.out_c;
      const std::size_t o = job % g.out_c;
      const T* src = tmp.data() + o * width + ln * plane;
      T* dst = out + ((n0 + ln) * g.out_c + o) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = src[p] + bias[o];
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* in, const T* kernel, const T* grad_out, T* grad_in,
                     T* grad_kernel, T* grad_bias) {
  const std::size_t plane = g.out_h * g.out_w;
  const std::size_t ckk = g.in_c * g.k_h * g.k_w;
  const std::size_t chunk = chunk_samples(g);
  std::vector<T> col(ckk * chunk * plane);
  std::vector<T> col_t(ckk * chunk * plane);
  std::vector<T> dy(g.out_c * chunk * plane);
  std::vector<T> kernel_t;
  if (grad_in) {
    kernel_t.resize(ckk * g.out_c);
    nn::transpose(g.out_c, ckk, kernel, kernel_t.data());
    std::fill(grad_in, grad_in + g.batch * g.in_c * g.in_h * g.in_w, T{0});
  }
  std::fill(grad_bias, grad_bias + g.out_c, T{0});
  for (std::size_t n0 = 0; n0 < g.batch; n0 += chunk) {
    const std::size_t nb = std::min(chunk, g.batch - n0);
    const std::size_t width = nb * plane;
    for (std::size_t ln = 0; ln < nb; ++ln) {
      for (std::size_t o = 0; o < g.out_c; ++o) {
        const T* src = grad_out + ((n0 + ln) * g.out_c + o) * plane;
        std::copy(src, src + plane, dy.data() + o * width + ln * plane);
      }
    }
    for (std::size_t o = 0; o < g.out_c; ++o) {
      T acc = grad_bias[o];
      const T* row = dy.data() + o * width;
      for (std::size_t p = 0; p < width; ++p) acc += row[p];
      grad_bias[o] = acc;
    }
    im2col(g, in, n0, nb, col.data());
    nn::transpose(ckk, width, col.data(), col_t.data());
    gemm(g.out_c, ckk, width, dy.data(), width, col_t.data(), ckk, grad_kernel, ckk, n0 != 0);
    if (grad_in) {
      gemm(ckk, width, g.out_c, kernel_t.data(), g.out_c, dy.data(), width, col.data(), width, false);
      col2im(g, col.data(), n0, nb, grad_in);
    }
  }
}

template <typename T>
void dense_forward(std::size_t n, std::size_t f, std::size_t g, const T* in, const T* w, const T* b, T* out) {
  gemm(n, g, f, in, f, w, g, out, g, false);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < g; ++j) out[i * g + j] += b[j];
}

template <typename T>
void dense_backward(std::size_t n, std::size_t f, std::size_t g, const T* in, const T* w, const T* grad_out,
                    T* grad_in, T* grad_w, T* grad_b) {
  for (std::size_t j = 0; j < g; ++j) grad_b[j] = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < g; ++j) grad_b[j] += grad_out[i * g + j];
  std::vector<T> in_t(f * n);
  nn::transpose(n, f, in, in_t.data());
  gemm(f, g, n, in_t.data(), n, grad_out, g, grad_w, g, false);
  if (grad_in) {
    std::vector<T> w_t(g * f);
    nn::transpose(f, g, w, w_t.data());
    gemm(n, f, g, grad_out, g, w_t.data(), f, grad_in, f, false);
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

}  // namespace e2emd::nn::detail::par

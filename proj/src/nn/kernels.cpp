#include "e2emd/nn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kernels_internal.hpp"

namespace e2emd::nn {

namespace {

template <typename T>
detail::ConvGeometry conv_geometry(const BasicTensor<T>& input, const BasicTensor<T>& kernel, std::size_t stride,
                                   std::size_t padding) {
  if (input.rank() != 4) throw DimensionError("conv2d input must be N x C x H x W, got " + shape_string(input.shape()));
  if (kernel.rank() != 4) throw DimensionError("conv2d kernel must be O x I x Kh x Kw, got " + shape_string(kernel.shape()));
  if (stride < 1) throw ConfigError("conv2d stride must be >= 1");
  if (input.dim(1) != kernel.dim(1)) {
    throw DimensionError("conv2d channel mismatch: input axis 1 (C) = " + std::to_string(input.dim(1)) +
                         ", kernel axis 1 (I) = " + std::to_string(kernel.dim(1)));
  }
  detail::ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_c = input.dim(1);
  g.in_h = input.dim(2);
  g.in_w = input.dim(3);
  g.out_c = kernel.dim(0);
  g.k_h = kernel.dim(2);
  g.k_w = kernel.dim(3);
  g.stride = stride;
  g.padding = padding;
  if (g.in_h + 2 * padding < g.k_h || g.in_w + 2 * padding < g.k_w) {
    throw DimensionError("conv2d kernel axes 2,3 (" + std::to_string(g.k_h) + "x" + std::to_string(g.k_w) +
                         ") exceed padded input axes 2,3 (" + std::to_string(g.in_h + 2 * padding) + "x" +
                         std::to_string(g.in_w + 2 * padding) + ")");
  }
  g.out_h = (g.in_h + 2 * padding - g.k_h) / stride + 1;
  g.out_w = (g.in_w + 2 * padding - g.k_w) / stride + 1;
  return g;
}

}  // namespace

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
          std::size_t ldc, bool accumulate, Exec exec) {
  if (exec == Exec::reference) {
    detail::ref::gemm(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  } else {
    detail::par::gemm(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  }
}

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst) {
  constexpr std::size_t B = 32;
  for (std::size_t i0 = 0; i0 < rows; i0 += B) {
    const std::size_t i1 = std::min(rows, i0 + B);
    for (std::size_t j0 = 0; j0 < cols; j0 += B) {
      const std::size_t j1 = std::min(cols, j0 + B);
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) dst[j * rows + i] = src[i * cols + j];
    }
  }
}

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>& bias,
                              std::size_t stride, std::size_t padding, Exec exec) {
  const auto g = conv_geometry(input, kernel, stride, padding);
  if (bias.size() != g.out_c) {
    throw DimensionError("conv2d bias length " + std::to_string(bias.size()) + " does not match kernel axis 0 (O) = " +
                         std::to_string(g.out_c));
  }
  BasicTensor<T> out({g.batch, g.out_c, g.out_h, g.out_w});
  if (exec == Exec::reference) {
    detail::ref::conv2d_forward(g, input.ptr(), kernel.ptr(), bias.ptr(), out.ptr());
  } else {
    detail::par::conv2d_forward(g, input.ptr(), kernel.ptr(), bias.ptr(), out.ptr());
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>& grad_out,
                             std::size_t stride, std::size_t padding, bool need_input_grad, Exec exec) {
  const auto g = conv_geometry(input, kernel, stride, padding);
  const Shape expect{g.batch, g.out_c, g.out_h, g.out_w};
  if (grad_out.shape() != expect) {
    throw DimensionError("conv2d output gradient has shape " + shape_string(grad_out.shape()) + ", expected " +
                         shape_string(expect));
  }
  ConvGrads<T> grads;
  grads.kernel = BasicTensor<T>(kernel.shape());
  grads.bias = BasicTensor<T>({g.out_c});
  if (need_input_grad) grads.input = BasicTensor<T>(input.shape());
  T* gin = need_input_grad ? grads.input.ptr() : nullptr;
  if (exec == Exec::reference) {
    detail::ref::conv2d_backward(g, input.ptr(), kernel.ptr(), grad_out.ptr(), gin, grads.kernel.ptr(), grads.bias.ptr());
  } else {
    detail::par::conv2d_backward(g, input.ptr(), kernel.ptr(), grad_out.ptr(), gin, grads.kernel.ptr(), grads.bias.ptr());
  }
  return grads;
}

template <typename T>
PoolResult<T> maxpool2d_forward(const BasicTensor<T>& input, std::size_t window, std::size_t stride, Exec exec) {
  if (input.rank() != 4) throw DimensionError("maxpool2d input must be N x C x H x W, got " + shape_string(input.shape()));
  if (window < 1 || stride < 1) throw ConfigError("maxpool2d window and stride must be >= 1");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (window > h || window > w) {
    throw DimensionError("maxpool2d window " + std::to_string(window) + " exceeds input axes 2,3 (" +
                         std::to_string(h) + "x" + std::to_string(w) + ")");
  }
  const std::size_t oh = (h - window) / stride + 1, ow = (w - window) / stride + 1;
  PoolResult<T> res{BasicTensor<T>({n, c, oh, ow}), std::vector<std::size_t>(n * c * oh * ow)};
  const long planes = static_cast<long>(n * c);
  const T* src = input.ptr();
  T* dst = res.output.ptr();
  std::size_t* arg = res.argmax.data();
  // Each plane is independent and scanned identically on both paths, so the
  // result is exact regardless of `exec`.
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (long pl = 0; pl < planes; ++pl) {
    const std::size_t base = static_cast<std::size_t>(pl) * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = base + (oy * stride) * w + ox * stride;
        T best_v = src[best];
        for (std::size_t ky = 0; ky < window; ++ky) {
          for (std::size_t kx = 0; kx < window; ++kx) {
            const std::size_t idx = base + (oy * stride + ky) * w + ox * stride + kx;
            if (src[idx] > best_v) {
              best_v = src[idx];
              best = idx;
            }
          }
        }
        const std::size_t o = (static_cast<std::size_t>(pl) * oh + oy) * ow + ox;
        dst[o] = best_v;
        arg[o] = best;
      }
    }
  }
  return res;
}

template <typename T>
BasicTensor<T> maxpool2d_backward(const BasicTensor<T>& grad_out, const std::vector<std::size_t>& argmax,
                                  const Shape& input_shape) {
  if (grad_out.size() != argmax.size()) throw DimensionError("maxpool2d gradient does not match its argmax map");
  BasicTensor<T> grad_in(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad_in[argmax[i]] += grad_out[i];
  return grad_in;
}

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias,
                             Exec exec) {
  if (input.rank() != 2 || weights.rank() != 2) {
    throw DimensionError("dense expects N x F input and F x G weights, got " + shape_string(input.shape()) + " and " +
                         shape_string(weights.shape()));
  }
  const std::size_t n = input.dim(0), f = input.dim(1), g = weights.dim(1);
  if (weights.dim(0) != f) {
    throw DimensionError("dense inner dims disagree: input axis 1 (F) = " + std::to_string(f) +
                         ", weights axis 0 = " + std::to_string(weights.dim(0)));
  }
  if (bias.size() != g) {
    throw DimensionError("dense bias length " + std::to_string(bias.size()) + " does not match weights axis 1 (G) = " +
                         std::to_string(g));
  }
  BasicTensor<T> out({n, g});
  if (exec == Exec::reference) {
    detail::ref::dense_forward(n, f, g, input.ptr(), weights.ptr(), bias.ptr(), out.ptr());
  } else {
    detail::par::dense_forward(n, f, g, input.ptr(), weights.ptr(), bias.ptr(), out.ptr());
  }
  return out;
}

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& grad_out,
                             bool need_input_grad, Exec exec) {
  if (input.rank() != 2 || weights.rank() != 2 || grad_out.rank() != 2 || weights.dim(0) != input.dim(1) ||
      grad_out.dim(0) != input.dim(0) || grad_out.dim(1) != weights.dim(1)) {
    throw DimensionError("dense backward shapes disagree: input " + shape_string(input.shape()) + ", weights " +
                         shape_string(weights.shape()) + ", output gradient " + shape_string(grad_out.shape()));
  }
  const std::size_t n = input.dim(0), f = input.dim(1), g = weights.dim(1);
  DenseGrads<T> grads;
  grads.weights = BasicTensor<T>(weights.shape());
  grads.bias = BasicTensor<T>({g});
  if (need_input_grad) grads.input = BasicTensor<T>(input.shape());
  T* gin = need_input_grad ? grads.input.ptr() : nullptr;
  if (exec == Exec::reference) {
    detail::ref::dense_backward(n, f, g, input.ptr(), weights.ptr(), grad_out.ptr(), gin, grads.weights.ptr(),
                                grads.bias.ptr());
  } else {
    detail::par::dense_backward(n, f, g, input.ptr(), weights.ptr(), grad_out.ptr(), gin, grads.weights.ptr(),
                                grads.bias.ptr());
  }
  return grads;
}

template <typename T>
BasicTensor<T> upsample2d_forward(const BasicTensor<T>& input, std::size_t factor) {
  if (input.rank() != 4) throw DimensionError("upsample2d input must be N x C x H x W, got " + shape_string(input.shape()));
  const std::size_t planes = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  BasicTensor<T> out({input.dim(0), input.dim(1), h * factor, w * factor});
  const std::size_t ow = w * factor;
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = input.ptr() + p * h * w;
    T* dst = out.ptr() + p * h * w * factor * factor;
    for (std::size_t y = 0; y < h * factor; ++y)
      for (std::size_t x = 0; x < ow; ++x) dst[y * ow + x] = src[(y / factor) * w + x / factor];
  }
  return out;
}

template <typename T>
BasicTensor<T> upsample2d_backward(const BasicTensor<T>& grad_out, std::size_t factor) {
  if (grad_out.rank() != 4 || grad_out.dim(2) % factor || grad_out.dim(3) % factor) {
    throw DimensionError("upsample2d gradient shape " + shape_string(grad_out.shape()) + " is not a multiple of the factor");
  }
  const std::size_t h = grad_out.dim(2) / factor, w = grad_out.dim(3) / factor;
  const std::size_t planes = grad_out.dim(0) * grad_out.dim(1), ow = w * factor;
  BasicTensor<T> out({grad_out.dim(0), grad_out.dim(1), h, w});
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = grad_out.ptr() + p * h * w * factor * factor;
    T* dst = out.ptr() + p * h * w;
    for (std::size_t y = 0; y < h * factor; ++y)
      for (std::size_t x = 0; x < ow; ++x) dst[(y / factor) * w + x / factor] += src[y * ow + x];
  }
  return out;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.rank() != 2 || logits.dim(1) < 2) {
    throw DimensionError("softmax expects N x C logits with C >= 2, got " + shape_string(logits.shape()));
  }
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  BasicTensor<T> out(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.ptr() + i * c;
    T* dst = out.ptr() + i * c;
    const T mx = *std::max_element(row, row + c);
    T sum = 0;
    for (std::size_t j = 0; j < c; ++j) {
      dst[j] = std::exp(row[j] - mx);
      sum += dst[j];
    }
    for (std::size_t j = 0; j < c; ++j) dst[j] /= sum;
  }
  return out;
}

template <typename T>
T cross_entropy_loss(const BasicTensor<T>& probs, const std::vector<int>& labels) {
  if (probs.rank() != 2 || probs.dim(0) != labels.size()) {
    throw DimensionError("cross entropy expects N x C probabilities and N labels, got " + shape_string(probs.shape()) +
                         " and " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t c = probs.dim(1);
  T total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw IndexError("label " + std::to_string(labels[i]) + " at batch index " + std::to_string(i) +
                       " is outside [0, " + std::to_string(c) + ")");
    }
    const T p = std::max(probs[i * c + labels[i]], static_cast<T>(1e-12));
    total -= std::log(p);
  }
  return total / static_cast<T>(labels.size());
}

#define E2EMD_INSTANTIATE(T)                                                                                          \
  template void gemm<T>(std::size_t, std::size_t, std::size_t, const T*, std::size_t, const T*, std::size_t, T*,      \
                        std::size_t, bool, Exec);                                                                     \
  template void transpose<T>(std::size_t, std::size_t, const T*, T*);                                                 \
  template BasicTensor<T> conv2d_forward<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,      \
                                            std::size_t, std::size_t, Exec);                                          \
  template ConvGrads<T> conv2d_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,       \
                                           std::size_t, std::size_t, bool, Exec);                                     \
  template PoolResult<T> maxpool2d_forward<T>(const BasicTensor<T>&, std::size_t, std::size_t, Exec);                 \
  template BasicTensor<T> maxpool2d_backward<T>(const BasicTensor<T>&, const std::vector<std::size_t>&, const Shape&); \
  template BasicTensor<T> dense_forward<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, Exec); \
  template DenseGrads<T> dense_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, bool,  \
                                           Exec);                                                                     \
  template BasicTensor<T> upsample2d_forward<T>(const BasicTensor<T>&, std::size_t);                                  \
  template BasicTensor<T> upsample2d_backward<T>(const BasicTensor<T>&, std::size_t);                                 \
  template BasicTensor<T> softmax<T>(const BasicTensor<T>&);                                                          \
  template T cross_entropy_loss<T>(const BasicTensor<T>&, const std::vector<int>&);

E2EMD_INSTANTIATE(float)
E2EMD_INSTANTIATE(double)

#undef E2EMD_INSTANTIATE

}  // namespace e2emd::nn

#pragma once

#include <cstddef>
#include <vector>

#include "polsar/core/gemm.hpp"

// Raw convolution and pooling kernels on N,C,H,W buffers. All convolutions are
// stride 1 with SAME zero padding (pad = kernel/2).

namespace polsar::kernels {

struct ConvDims {
  std::size_t n, c, h, w;  // input
  std::size_t k;           // output channels
  std::size_t kh, kw;

  std::size_t pixels() const { return h * w; }
  std::size_t patch() const { return c * kh * kw; }
  std::size_t columns() const { return n * h * w; }
};

/// col[c*kh*kw, n*h*w] from x[n,c,h,w].
template <class T>
void im2col(const ConvDims& d, const T* x, T* col) {
  const long ph = static_cast<long>(d.kh / 2), pw = static_cast<long>(d.kw / 2);
  const std::size_t hw = d.pixels(), cols = d.columns();
  for (std::size_t c = 0; c < d.c; ++c)
    for (std::size_t ky = 0; ky < d.kh; ++ky)
      for (std::size_t kx = 0; kx < d.kw; ++kx) {
        T* row = col + ((c * d.kh + ky) * d.kw + kx) * cols;
        for (std::size_t n = 0; n < d.n; ++n) {
          const T* plane = x + (n * d.c + c) * hw;
          T* dst = row + n * hw;
          for (std::size_t y = 0; y < d.h; ++y) {
            const long sy = static_cast<long>(y) + static_cast<long>(ky) - ph;
            T* drow = dst + y * d.w;
            if (sy < 0 || sy >= static_cast<long>(d.h)) {
              for (std::size_t xx = 0; xx < d.w; ++xx) drow[xx] = T{0};
              continue;
            }
            const T* srow = plane + static_cast<std::size_t>(sy) * d.w;
            for (std::size_t xx = 0; xx < d.w; ++xx) {
              const long sx = static_cast<long>(xx) + static_cast<long>(kx) - pw;
              drow[xx] = (sx < 0 || sx >= static_cast<long>(d.w)) ? T{0} : srow[sx];
            }
          }
        }
      }
}

/// dx[n,c,h,w] += scatter of dcol.
template <class T>
void col2im_accumulate(const ConvDims& d, const T* dcol, T* dx) {
  const long ph = static_cast<long>(d.kh / 2), pw = static_cast<long>(d.kw / 2);
  const std::size_t hw = d.pixels(), cols = d.columns();
  for (std::size_t c = 0; c < d.c; ++c)
    for (std::size_t ky = 0; ky < d.kh; ++ky)
      for (std::size_t kx = 0; kx < d.kw; ++kx) {
        const T* row = dcol + ((c * d.kh + ky) * d.kw + kx) * cols;
        for (std::size_t n = 0; n < d.n; ++n) {
          T* plane = dx + (n * d.c + c) * hw;
          const T* src = row + n * hw;
          for (std::size_t y = 0; y < d.h; ++y) {
            const long sy = static_cast<long>(y) + static_cast<long>(ky) - ph;
            if (sy < 0 || sy >= static_cast<long>(d.h)) continue;
            T* drow = plane + static_cast<std::size_t>(sy) * d.w;
            const T* srow = src + y * d.w;
            for (std::size_t xx = 0; xx < d.w; ++xx) {
              const long sx = static_cast<long>(xx) + static_cast<long>(kx) - pw;
              if (sx >= 0 && sx < static_cast<long>(d.w)) drow[sx] += srow[xx];
            }
          }
        }
      }
}

/// y[n,k,h,w] = conv(x, weight[k, c, kh, kw]) + bias[k]. `bias` may be null.
template <class T>
void conv2d_forward(const ConvDims& d, const T* x, const T* weight, const T* bias, T* y) {
  const std::size_t hw = d.pixels(), cols = d.columns(), patch = d.patch();
  std::vector<T> col(patch * cols);
  im2col(d, x, col.data());
  std::vector<T> out(d.k * cols, T{0});
  gemm_accumulate(false, d.k, cols, patch, weight, patch, col.data(), cols, out.data(), cols);
  for (std::size_t n = 0; n < d.n; ++n)
    for (std::size_t k = 0; k < d.k; ++k) {
      const T b = bias ? bias[k] : T{0};
      const T* src = out.data() + k * cols + n * hw;
      T* dst = y + (n * d.k + k) * hw;
      for (std::size_t p = 0; p < hw; ++p) dst[p] = src[p] + b;
    }
}

/// Accumulates into dx (if non-null), dweight, dbias (if non-null).
template <class T>
void conv2d_backward(const ConvDims& d, const T* x, const T* weight, const T* dy, T* dx,
                     T* dweight, T* dbias) {
  const std::size_t hw = d.pixels(), cols = d.columns(), patch = d.patch();
  std::vector<T> dout(d.k * cols);
  for (std::size_t n = 0; n < d.n; ++n)
    for (std::size_t k = 0; k < d.k; ++k) {
      const T* src = dy + (n * d.k + k) * hw;
      T* dst = dout.data() + k * cols + n * hw;
      for (std::size_t p = 0; p < hw; ++p) dst[p] = src[p];
    }
  if (dbias) {
    for (std::size_t k = 0; k < d.k; ++k) {
      T s{0};
      const T* row = dout.data() + k * cols;
      for (std::size_t p = 0; p < cols; ++p) s += row[p];
      dbias[k] += s;
    }
  }
  if (dweight) {
    std::vector<T> col(patch * cols);
    im2col(d, x, col.data());
    gemm_accumulate_bt(d.k, patch, cols, dout.data(), col.data(), dweight);
  }
  if (dx) {
    std::vector<T> dcol(patch * cols, T{0});
    gemm_accumulate(true, patch, cols, d.k, weight, patch, dout.data(), cols, dcol.data(), cols);
    col2im_accumulate(d, dcol.data(), dx);
  }
}

/// Per-channel 3x3 (or any odd) spatial filtering, depth multiplier 1.
/// weight[c, kh, kw].
template <class T>
void depthwise_forward(const ConvDims& d, const T* x, const T* weight, T* y) {
  const long ph = static_cast<long>(d.kh / 2), pw = static_cast<long>(d.kw / 2);
  const long H = static_cast<long>(d.h), W = static_cast<long>(d.w);
  for (std::size_t n = 0; n < d.n; ++n)
    for (std::size_t c = 0; c < d.c; ++c) {
      const T* plane = x + (n * d.c + c) * d.pixels();
      const T* ker = weight + c * d.kh * d.kw;
      T* out = y + (n * d.c + c) * d.pixels();
      for (long yy = 0; yy < H; ++yy)
        for (long xx = 0; xx < W; ++xx) {
          T s{0};
          for (long ky = 0; ky < static_cast<long>(d.kh); ++ky) {
            const long sy = yy + ky - ph;
            if (sy < 0 || sy >= H) continue;
            for (long kx = 0; kx < static_cast<long>(d.kw); ++kx) {
              const long sx = xx + kx - pw;
              if (sx < 0 || sx >= W) continue;
              s += ker[ky * static_cast<long>(d.kw) + kx] * plane[sy * W + sx];
            }
          }
          out[yy * W + xx] = s;
        }
    }
}

template <class T>
void depthwise_backward(const ConvDims& d, const T* x, const T* weight, const T* dy, T* dx,
                        T* dweight) {
  const long ph = static_cast<long>(d.kh / 2), pw = static_cast<long>(d.kw / 2);
  const long H = static_cast<long>(d.h), W = static_cast<long>(d.w);
  for (std::size_t n = 0; n < d.n; ++n)
    for (std::size_t c = 0; c < d.c; ++c) {
      const T* plane = x + (n * d.c + c) * d.pixels();
      const T* ker = weight + c * d.kh * d.kw;
      const T* g = dy + (n * d.c + c) * d.pixels();
      T* gx = dx ? dx + (n * d.c + c) * d.pixels() : nullptr;
      T* gk = dweight ? dweight + c * d.kh * d.kw : nullptr;
      for (long yy = 0; yy < H; ++yy)
        for (long xx = 0; xx < W; ++xx) {
          const T go = g[yy * W + xx];
          for (long ky = 0; ky < static_cast<long>(d.kh); ++ky) {
            const long sy = yy + ky - ph;
            if (sy < 0 || sy >= H) continue;
            for (long kx = 0; kx < static_cast<long>(d.kw); ++kx) {
              const long sx = xx + kx - pw;
              if (sx < 0 || sx >= W) continue;
              const long ki = ky * static_cast<long>(d.kw) + kx;
              if (gk) gk[ki] += go * plane[sy * W + sx];
              if (gx) gx[sy * W + sx] += go * ker[ki];
            }
          }
        }
    }
}

/// 2x2/stride-2 max pooling with floor semantics. `argmax` receives the flat
/// input index of each selected element (first maximum in row-major order).
template <class T>
void max_pool_forward(std::size_t n, std::size_t c, std::size_t h, std::size_t w,
                      std::size_t window, std::size_t stride, const T* x, T* y,
                      std::size_t* argmax) {
  const std::size_t oh = (h - window) / stride + 1, ow = (w - window) / stride + 1;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const T* src = x + plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (oy * stride) * w + ox * stride;
        for (std::size_t dy = 0; dy < window; ++dy)
          for (std::size_t dx = 0; dx < window; ++dx) {
            const std::size_t idx = (oy * stride + dy) * w + ox * stride + dx;
            if (src[idx] > src[best]) best = idx;
          }
        const std::size_t o = plane * oh * ow + oy * ow + ox;
        y[o] = src[best];
        argmax[o] = plane * h * w + best;
      }
  }
}

}  // namespace polsar::kernels

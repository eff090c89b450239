#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace polsar::kernels {

namespace detail {

#if defined(__AVX512F__)
inline constexpr std::size_t kMR = 6, kNR = 32;
#elif defined(__AVX2__)
inline constexpr std::size_t kMR = 6, kNR = 16;
#else
inline constexpr std::size_t kMR = 4, kNR = 8;
#endif
inline constexpr std::size_t kKC = 256, kNC = 2048;

// Copies B[p0.., j0..] (kc x nc) into column panels of width kNR, each
// [kc][kNR], zero-padding the last panel. B(p, j) is b[p*ldb + j], or
// b[j*ldb + p] when TransB.
template <class T, bool TransB>
void pack_b(std::size_t kc, std::size_t nc, const T* b, std::size_t ldb, std::size_t p0,
            std::size_t j0, T* out) {
  for (std::size_t jb = 0; jb < nc; jb += kNR) {
    const std::size_t w = std::min(kNR, nc - jb);
    if constexpr (TransB) {
      for (std::size_t j = 0; j < kNR; ++j) {
        if (j < w) {
          const T* src = b + (j0 + jb + j) * ldb + p0;
          for (std::size_t p = 0; p < kc; ++p) out[p * kNR + j] = src[p];
        } else {
          for (std::size_t p = 0; p < kc; ++p) out[p * kNR + j] = T{0};
        }
      }
      out += kc * kNR;
    } else {
      for (std::size_t p = 0; p < kc; ++p) {
        const T* src = b + (p0 + p) * ldb + j0 + jb;
        std::size_t j = 0;
        for (; j < w; ++j) out[j] = src[j];
        for (; j < kNR; ++j) out[j] = T{0};
        out += kNR;
      }
    }
  }
}

// C[MR, w] += A[MR, kc] * panel[kc, kNR] with A packed as [kc][MR];
// the MR x kNR block of C stays in registers for the whole k loop.
template <class T, std::size_t MR>
inline void micro_tile(std::size_t kc, const T* __restrict a, const T* __restrict panel,
                       T* __restrict c, std::size_t ldc, std::size_t w) {
  T acc[MR][kNR];
  for (std::size_t r = 0; r < MR; ++r)
    for (std::size_t j = 0; j < kNR; ++j) acc[r][j] = j < w ? c[r * ldc + j] : T{0};
  for (std::size_t p = 0; p < kc; ++p) {
    const T* __restrict brow = panel + p * kNR;
    const T* __restrict acol = a + p * MR;
    for (std::size_t r = 0; r < MR; ++r)
      for (std::size_t j = 0; j < kNR; ++j) acc[r][j] += acol[r] * brow[j];
  }
  for (std::size_t r = 0; r < MR; ++r)
    for (std::size_t j = 0; j < w; ++j) c[r * ldc + j] = acc[r][j];
}

template <class T, bool TransA>
void pack_a(std::size_t rows, std::size_t kc, const T* a, std::size_t lda, std::size_t i0,
            std::size_t p0, T* out) {
  for (std::size_t p = 0; p < kc; ++p)
    for (std::size_t r = 0; r < rows; ++r)
      out[p * rows + r] = TransA ? a[(p0 + p) * lda + i0 + r] : a[(i0 + r) * lda + p0 + p];
}

template <class T, bool TransA, bool TransB>
void gemm_impl(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
               const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  if (m == 0 || n == 0 || k == 0) return;
  std::vector<T> packed(kKC * ((std::min(n, kNC) + kNR - 1) / kNR) * kNR);
  std::vector<T> apack(kKC * m);
  for (std::size_t p0 = 0; p0 < k; p0 += kKC) {
    const std::size_t kc = std::min(kKC, k - p0);
    // A slivers for this k block: full kMR-row groups, then single rows.
    const std::size_t full = m / kMR * kMR;
    for (std::size_t i = 0; i < full; i += kMR)
      pack_a<T, TransA>(kMR, kc, a, lda, i, p0, apack.data() + i * kc);
    for (std::size_t i = full; i < m; ++i)
      pack_a<T, TransA>(1, kc, a, lda, i, p0, apack.data() + i * kc);
    for (std::size_t j0 = 0; j0 < n; j0 += kNC) {
      const std::size_t nc = std::min(kNC, n - j0);
      pack_b<T, TransB>(kc, nc, b, ldb, p0, j0, packed.data());
      for (std::size_t jp = 0; jp < nc; jp += kNR) {
        const std::size_t w = std::min(kNR, nc - jp);
        const T* panel = packed.data() + (jp / kNR) * kc * kNR;
        T* cblock = c + j0 + jp;
        for (std::size_t i = 0; i < full; i += kMR)
          micro_tile<T, kMR>(kc, apack.data() + i * kc, panel, cblock + i * ldc, ldc, w);
        for (std::size_t i = full; i < m; ++i)
          micro_tile<T, 1>(kc, apack.data() + i * kc, panel, cblock + i * ldc, ldc, w);
      }
    }
  }
}

}  // namespace detail

/// C[m,n] += op(A)[m,k] * B[k,n], all row-major.
///
/// op(A) is A (lda = row stride of A[m,k]) or, when `trans_a` is set, the
/// transpose of a stored A[k,m]. Each output element accumulates over k in
/// ascending order regardless of tiling, so results are independent of the
/// matrix sizes the caller batches together.
template <class T>
void gemm_accumulate(bool trans_a, std::size_t m, std::size_t n, std::size_t k, const T* a,
                     std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  if (trans_a)
    detail::gemm_impl<T, true, false>(m, n, k, a, lda, b, ldb, c, ldc);
  else
    detail::gemm_impl<T, false, false>(m, n, k, a, lda, b, ldb, c, ldc);
}

/// out[cols, rows] = in[rows, cols]^T
template <class T>
void transpose(const T* in, std::size_t rows, std::size_t cols, T* out) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::size_t r1 = std::min(rows, r0 + kTile);
      const std::size_t c1 = std::min(cols, c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t cc = c0; cc < c1; ++cc) out[cc * rows + r] = in[r * cols + cc];
    }
  }
}

/// C[m,n] += A[m,k] * B[n,k]^T, both operands row-major.
template <class T>
void gemm_accumulate_bt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b,
                        T* c) {
  detail::gemm_impl<T, false, true>(m, n, k, a, k, b, k, c, n);
}

}  // namespace polsar::kernels

#include "gemm.hpp"

#include <algorithm>
#include <cstring>

namespace eyedrive::nn::detail {

namespace {

typedef double Vec8 __attribute__((vector_size(64)));

constexpr std::size_t kRowBlock = 8;
constexpr std::size_t kLanes = 8;
constexpr std::size_t kDepthBlock = 256;

inline Vec8 load(const double* p) {
  Vec8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store(double* p, Vec8 v) { std::memcpy(p, &v, sizeof v); }

// R rows by V * 8 columns of C (V is 1 or 2), accumulated over k terms.
template <std::size_t R, std::size_t V>
inline void micro_kernel(std::size_t k, const double* x, std::size_t x_row, std::size_t x_col,
                         const double* y, std::size_t ldy, double* c, std::size_t ldc) {
  Vec8 lo[R];
  Vec8 hi[R];
  for (std::size_t r = 0; r < R; ++r) {
    lo[r] = load(c + r * ldc);
    if constexpr (V == 2) hi[r] = load(c + r * ldc + kLanes);
  }
  for (std::size_t p = 0; p < k; ++p) {
    const Vec8 ylo = load(y + p * ldy);
    Vec8 yhi{};
    if constexpr (V == 2) yhi = load(y + p * ldy + kLanes);
    const double* xp = x + p * x_col;
#pragma GCC unroll 8
    for (std::size_t r = 0; r < R; ++r) {
      const double xv = xp[r * x_row];
      lo[r] += xv * ylo;
      if constexpr (V == 2) hi[r] += xv * yhi;
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    store(c + r * ldc, lo[r]);
    if constexpr (V == 2) store(c + r * ldc + kLanes, hi[r]);
  }
}

template <std::size_t V>
inline void rows_kernel(std::size_t rows, std::size_t k, const double* x, std::size_t x_row,
                        std::size_t x_col, const double* y, std::size_t ldy, double* c,
                        std::size_t ldc) {
  switch (rows) {
    case 8: micro_kernel<8, V>(k, x, x_row, x_col, y, ldy, c, ldc); break;
    case 7: micro_kernel<7, V>(k, x, x_row, x_col, y, ldy, c, ldc); break;
    case 6: micro_kernel<6, V>(k, x, x_row, x_col, y, ldy, c, ldc); break;
    case 5: micro_kernel<5, V>(k, x, x_row, x_col, y, ldy, c, ldc); break;
    case 4: micro_kernel<4, V>(k, x, x_row, x_col, y, ldy, c, ldc); break;
    case 3: micro_kernel<3, V>(k, x, x_row, x_col, y, ldy, c, ldc); break;
    case 2: micro_kernel<2, V>(k, x, x_row, x_col, y, ldy, c, ldc); break;
    case 1: micro_kernel<1, V>(k, x, x_row, x_col, y, ldy, c, ldc); break;
    default: break;
  }
}

inline void scalar_kernel(std::size_t rows, std::size_t cols, std::size_t k, const double* x,
                          std::size_t x_row, std::size_t x_col, const double* y, std::size_t ldy,
                          double* c, std::size_t ldc) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = c[r * ldc + j];
      for (std::size_t p = 0; p < k; ++p) acc += x[r * x_row + p * x_col] * y[p * ldy + j];
      c[r * ldc + j] = acc;
    }
  }
}

}  // namespace

void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, const double* x,
                     std::size_t x_row, std::size_t x_col, const double* y, std::size_t ldy,
                     double* c, std::size_t ldc) {
  const std::size_t n16 = n - n % (2 * kLanes);
  const std::size_t n8 = n - n % kLanes;
  for (std::size_t p0 = 0; p0 < k; p0 += kDepthBlock) {
    const std::size_t kc = std::min(kDepthBlock, k - p0);
    const double* xk = x + p0 * x_col;
    const double* yk = y + p0 * ldy;
    for (std::size_t i = 0; i < m; i += kRowBlock) {
      const std::size_t rows = std::min(kRowBlock, m - i);
      const double* xi = xk + i * x_row;
      double* ci = c + i * ldc;
      for (std::size_t j = 0; j < n16; j += 2 * kLanes) {
        rows_kernel<2>(rows, kc, xi, x_row, x_col, yk + j, ldy, ci + j, ldc);
      }
      if (n16 < n8) rows_kernel<1>(rows, kc, xi, x_row, x_col, yk + n16, ldy, ci + n16, ldc);
      if (n8 < n) scalar_kernel(rows, n - n8, kc, xi, x_row, x_col, yk + n8, ldy, ci + n8, ldc);
    }
  }
}

}  // namespace eyedrive::nn::detail

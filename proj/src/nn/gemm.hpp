#pragma once

#include <cstddef>

namespace eyedrive::nn::detail {

// C(i, j) += sum over p of X(i, p) * Y(p, j), with X(i, p) = x[i * x_row + p * x_col]
// and Y, C row-major. Every element accumulates its terms in ascending p into a
// single double, so the result is independent of blocking.
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, const double* x,
                     std::size_t x_row, std::size_t x_col, const double* y, std::size_t ldy,
                     double* c, std::size_t ldc);

}  // namespace eyedrive::nn::detail

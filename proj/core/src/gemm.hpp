#pragma once

#include <cstddef>

namespace motionmidi::detail {

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
// Backed by single-threaded OpenBLAS so results are bit-reproducible.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, double alpha, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc);

}  // namespace motionmidi::detail

#pragma once

#include <cstdint>

namespace deepi2i {

// Row-major GEMM: C (m x n) = alpha * op(A) * op(B) + beta * C.
// op(A) is m x k, op(B) is k x n. lda/ldb are the leading dimensions of the
// stored (untransposed) matrices.
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, float alpha,
          const float* a, int64_t lda, const float* b, int64_t ldb, float beta, float* c,
          int64_t ldc);
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, double alpha,
          const double* a, int64_t lda, const double* b, int64_t ldb, double beta, double* c,
          int64_t ldc);

}  // namespace deepi2i
